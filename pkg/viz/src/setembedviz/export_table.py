"""Readers for the two file formats setembed writes for downstream plotting.

The embedding export is a TSV with columns ``#id, type, label, predicted,
x0..x{d-1}`` where ``_`` marks a missing label; the sweep report is a CSV
with columns ``dataset, ratio, metric, mean, std, repeats, seed0..``.  Only
the documented columns are interpreted here.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

MISSING = "_"


@dataclass
class EmbeddingExport:
    """One parsed embedding table; rows stay in file order."""

    ids: list[str]
    types: np.ndarray            # (n,) int
    true_labels: list[str]       # raw label strings; "_" marks missing
    predicted: list[str]
    coords: np.ndarray           # (n, d) float

    @property
    def num_rows(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def label_strings(self, color_by: str) -> list[str]:
        if color_by == "true":
            return self.true_labels
        if color_by == "predicted":
            return self.predicted
        raise ValueError(
            f"color_by must be 'true' or 'predicted', got {color_by!r}")


def parse_export(path) -> EmbeddingExport:
    """Read an embedding TSV, validating the header and row widths."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#id\ttype\tlabel\tpredicted"):
        raise ValueError(f"{path}: not an embedding export (bad header)")
    d = len(lines[0].split("\t")) - 4
    if d < 1:
        raise ValueError(f"{path}: header has no coordinate columns")
    ids, types, true_labels, predicted = [], [], [], []
    coords = np.empty((len(lines) - 1, d))
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 4 + d:
            raise ValueError(f"{path} line {i}: expected {4 + d} columns, "
                             f"got {len(parts)}")
        try:
            types.append(int(parts[1]))
            coords[i - 2] = [float(x) for x in parts[4:]]
        except ValueError:
            raise ValueError(f"{path} line {i}: non-numeric field") from None
        ids.append(parts[0])
        true_labels.append(parts[2])
        predicted.append(parts[3])
    return EmbeddingExport(ids=ids, types=np.array(types, dtype=np.int64),
                           true_labels=true_labels, predicted=predicted,
                           coords=coords)


@dataclass
class SweepPoint:
    dataset: str
    ratio: float
    metric: str
    mean: float
    std: float


def read_sweep(path) -> list[SweepPoint]:
    """Read a sweep report CSV, touching only the documented columns."""
    points = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"dataset", "ratio", "metric", "mean", "std"}
        have = set(reader.fieldnames or [])
        if not required <= have:
            missing = ", ".join(sorted(required - have))
            raise ValueError(f"{path}: not a sweep report (missing {missing})")
        for i, row in enumerate(reader, start=2):
            try:
                points.append(SweepPoint(dataset=row["dataset"],
                                         ratio=float(row["ratio"]),
                                         metric=row["metric"],
                                         mean=float(row["mean"]),
                                         std=float(row["std"])))
            except (TypeError, ValueError):
                raise ValueError(f"{path} line {i}: malformed row") from None
    return points
