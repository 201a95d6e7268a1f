"""Figure rendering: 2-D t-SNE scatters and metric-vs-ratio curves.

Both entry points read a file written by setembed, draw one figure, save it,
and return the plotted numbers so callers (and tests) can inspect exactly
what was drawn.  All randomness sits in the t-SNE seed, so a fixed seed and
input file reproduce the same figure.
"""

from __future__ import annotations

import logging
from inspect import signature
from pathlib import Path

import matplotlib

matplotlib.use("Agg")            # headless rendering only

import matplotlib.pyplot as plt
import numpy as np
from sklearn.manifold import TSNE

from .export_table import MISSING, parse_export, read_sweep

log = logging.getLogger(__name__)

TSNE_PERPLEXITY = 30.0
TSNE_ITERATIONS = 1000
TSNE_SEED = 0
MIN_ROWS = 10
MISSING_COLOR = "0.7"


def _project(coords: np.ndarray, perplexity: float, iterations: int,
             seed: int) -> np.ndarray:
    iter_name = ("max_iter"
                 if "max_iter" in signature(TSNE.__init__).parameters
                 else "n_iter")       # renamed across scikit-learn releases
    projector = TSNE(n_components=2, perplexity=perplexity,
                     random_state=seed, init="pca", **{iter_name: iterations})
    return projector.fit_transform(np.asarray(coords, dtype=float))


def _category_colors(labels):
    """Sorted distinct labels mapped onto a stable qualitative palette."""
    classes = sorted({lab for lab in labels if lab != MISSING})
    cmap = plt.get_cmap("tab10" if len(classes) <= 10 else "tab20")
    return {lab: cmap(i % cmap.N) for i, lab in enumerate(classes)}


def plot_tsne(export_file, color_by: str, out_image, *,
              skip_projection: bool = False,
              perplexity: float = TSNE_PERPLEXITY,
              iterations: int = TSNE_ITERATIONS,
              seed: int = TSNE_SEED) -> np.ndarray:
    """Scatter an embedding export in 2-D and save the figure.

    ``color_by`` selects the true or predicted label column for coloring;
    point positions never depend on it.  With ``skip_projection`` a 2-D
    export is plotted as-is.  Perplexity is lowered (with a warning) when
    the table has too few rows for the requested value.  Returns the (n, 2)
    plotted positions.
    """
    table = parse_export(export_file)
    if table.num_rows < MIN_ROWS:
        raise ValueError(f"need at least {MIN_ROWS} rows to plot, "
                         f"got {table.num_rows}")
    if table.dim < 2:
        raise ValueError("embedding dimension must be at least 2")
    if skip_projection:
        if table.dim != 2:
            raise ValueError("raw-coordinate mode needs 2-D embeddings, "
                             f"got d={table.dim}")
        positions = table.coords.copy()
        caption = "raw embedding coordinates (no projection)"
    else:
        effective = perplexity
        if effective >= table.num_rows:
            effective = max(2.0, (table.num_rows - 1) / 3.0)
            log.warning("perplexity %g needs more than %d rows; lowered "
                        "to %g", perplexity, table.num_rows, effective)
        positions = _project(table.coords, effective, iterations, seed)
        caption = (f"t-SNE: perplexity={effective:g}, "
                   f"iterations={iterations}, seed={seed}")

    labels = np.asarray(table.label_strings(color_by), dtype=object)
    fig, ax = plt.subplots(figsize=(7.0, 6.0))
    for lab, color in _category_colors(labels).items():
        mask = labels == lab
        ax.scatter(positions[mask, 0], positions[mask, 1], s=18,
                   color=color, label=lab)
    mask = labels == MISSING
    if mask.any():
        ax.scatter(positions[mask, 0], positions[mask, 1], s=18,
                   color=MISSING_COLOR, label="unlabeled")
    ax.legend(title=f"{color_by} label", loc="best")
    ax.set_xlabel("component 1")
    ax.set_ylabel("component 2")
    ax.set_title(Path(export_file).name)
    fig.text(0.5, 0.01, caption, ha="center", fontsize=8)
    fig.tight_layout(rect=(0.0, 0.03, 1.0, 1.0))
    fig.savefig(out_image, dpi=150)
    plt.close(fig)
    return positions


def plot_sweep(report_csv, metric: str, out_image):
    """Draw mean-with-±1-std error bars of one metric against the labeled
    ratio and save the figure.  Returns (ratios, means, stds) as plotted."""
    points = read_sweep(report_csv)
    chosen = sorted((p for p in points if p.metric == metric),
                    key=lambda p: p.ratio)
    if not chosen:
        available = ", ".join(sorted({p.metric for p in points})) or "none"
        raise ValueError(f"metric {metric!r} not in report; "
                         f"available: {available}")
    ratios = np.array([p.ratio for p in chosen])
    means = np.array([p.mean for p in chosen])
    stds = np.array([p.std for p in chosen])
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    ax.errorbar(ratios, means, yerr=stds, marker="o", capsize=3)
    ax.set_xlabel("labeled fraction")
    ax.set_ylabel(metric)
    ax.set_title(chosen[0].dataset)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_image, dpi=150)
    plt.close(fig)
    return ratios, means, stds
