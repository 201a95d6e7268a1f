"""Command line wrappers, one script per figure type.

Exit codes: 0 success, 1 bad input file or settings, 2 usage.
"""

from __future__ import annotations

import argparse
import sys

from .plots import (TSNE_ITERATIONS, TSNE_PERPLEXITY, TSNE_SEED, plot_sweep,
                    plot_tsne)


def main_tsne(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="setembed-plot-tsne",
        description="2-D t-SNE scatter of a setembed embedding export, "
                    "colored by label.")
    parser.add_argument("export_file", help="TSV from 'setembed export'")
    parser.add_argument("--out", default="tsne.png",
                        help="image path (default tsne.png)")
    parser.add_argument("--color-by", choices=("true", "predicted"),
                        default="true",
                        help="label column driving colors (default true)")
    parser.add_argument("--no-tsne", action="store_true",
                        help="plot 2-D embeddings directly, no projection")
    parser.add_argument("--perplexity", type=float, default=TSNE_PERPLEXITY)
    parser.add_argument("--iterations", type=int, default=TSNE_ITERATIONS)
    parser.add_argument("--seed", type=int, default=TSNE_SEED)
    args = parser.parse_args(argv)
    try:
        plot_tsne(args.export_file, args.color_by, args.out,
                  skip_projection=args.no_tsne, perplexity=args.perplexity,
                  iterations=args.iterations, seed=args.seed)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"image: {args.out}")
    return 0


def main_sweep(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="setembed-plot-sweep",
        description="Metric-vs-labeled-ratio curve with ±1 std error bars "
                    "from a setembed sweep report.")
    parser.add_argument("report_csv", help="CSV from 'setembed sweep'")
    parser.add_argument("--metric", default="accuracy",
                        help="report column to plot (default accuracy)")
    parser.add_argument("--out", default="sweep.png",
                        help="image path (default sweep.png)")
    args = parser.parse_args(argv)
    try:
        plot_sweep(args.report_csv, args.metric, args.out)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"image: {args.out}")
    return 0
