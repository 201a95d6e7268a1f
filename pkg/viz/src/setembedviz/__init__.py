"""Plotting companion for setembed exports.

Consumes only the primary package's file formats (embedding TSV, sweep CSV)
and renders the two figure types: t-SNE scatters colored by true or
predicted labels, and metric-vs-ratio curves with error bars.
"""

from .export_table import (EmbeddingExport, SweepPoint, parse_export,
                           read_sweep)
from .plots import plot_sweep, plot_tsne

__all__ = [
    "EmbeddingExport",
    "SweepPoint",
    "parse_export",
    "plot_sweep",
    "plot_tsne",
    "read_sweep",
]
