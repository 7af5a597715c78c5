"""Feature datasets: CSV ingestion, the on-disk dataset format, synthetic data."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .modelio import atomic_write_text

FORMAT = "linstack-dataset"
VERSION = 1


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray  # 0-based class indices
    label_names: tuple  # original label strings, index = class id

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    def histogram(self) -> dict:
        counts = np.bincount(self.y, minlength=self.n_classes)
        return {name: int(c) for name, c in zip(self.label_names, counts)}


def _resolve_label_col(label_col, header, width, line_no):
    if isinstance(label_col, str) and not label_col.lstrip("-").isdigit():
        if header is None:
            raise DataError(f"label column {label_col!r} given by name but the file has no header")
        if label_col not in header:
            raise DataError(f"label column {label_col!r} not in header {header}")
        return header.index(label_col)
    col = int(label_col)
    if not -width <= col < width:
        raise DataError(f"line {line_no}: label column {col} out of range for {width} columns")
    return col % width


def read_csv(path, label_col=-1, header: bool = False) -> Dataset:
    """Parse a rectangular numeric CSV with one categorical label column.

    Labels are numbered by first appearance.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    names = None
    start = 0
    if header:
        if not rows:
            raise DataError(f"{path}: empty file")
        names, start = [c.strip() for c in rows[0]], 1
    feats, labels, mapping = [], [], {}
    width = col = None
    for line_no, row in enumerate(rows[start:], start=start + 1):
        if not row or all(not c.strip() for c in row):
            continue
        if width is None:
            width = len(row)
            if width < 2:
                raise DataError(f"line {line_no}: need at least one feature and a label")
            col = _resolve_label_col(label_col, names, width, line_no)
        elif len(row) != width:
            raise DataError(f"line {line_no}: expected {width} fields, found {len(row)} (ragged row)")
        values = []
        for j, cell in enumerate(row):
            if j == col:
                continue
            try:
                values.append(float(cell))
            except ValueError:
                raise DataError(
                    f"line {line_no}, column {j + 1}: non-numeric feature value {cell!r}"
                ) from None
        label = row[col].strip()
        labels.append(mapping.setdefault(label, len(mapping)))
        feats.append(values)
    if not feats:
        raise DataError(f"{path}: no data rows")
    if len(mapping) < 2:
        raise DataError(f"{path}: only one class ({next(iter(mapping))!r}) present")
    X = np.array(feats, dtype=float)
    if not np.all(np.isfinite(X)):
        raise DataError(f"{path}: non-finite feature values")
    return Dataset(X, np.array(labels, dtype=np.int64), tuple(mapping))


def save_dataset(data: Dataset, path) -> None:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "label_names": list(data.label_names),
        "labels": [int(v) for v in data.y],
        "features": [[float(v) for v in row] for row in data.X],
    }
    atomic_write_text(path, json.dumps(doc) + "\n")


def load_dataset(path) -> Dataset:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a dataset file ({exc})") from None
    if doc.get("format") != FORMAT:
        raise DataError(f"{path}: not a {FORMAT} file")
    if doc.get("version") != VERSION:
        raise DataError(f"{path}: unsupported dataset version {doc.get('version')}")
    X = np.array(doc["features"], dtype=float)
    y = np.array(doc["labels"], dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DataError(f"{path}: features and labels disagree in length")
    return Dataset(X, y, tuple(doc["label_names"]))


def load_any(path, label_col=-1, header=False) -> Dataset:
    path = Path(path)
    if path.suffix.lower() == ".json":
        return load_dataset(path)
    return read_csv(path, label_col, header)


def make_synthetic(
    n_per_class: int = 60,
    n_classes: int = 3,
    n_features: int = 10,
    n_informative: int | None = None,
    separation: float = 2.0,
    seed: int = 0,
) -> Dataset:
    """Gaussian classes with correlated, unevenly scaled features.

    Only ``n_informative`` features (default: half) carry class information.
    Noise features and scale differences hurt distance-based learners far
    more than per-feature models, which makes base-learner quality uneven.
    """
    rng = np.random.default_rng(seed)
    informative = n_informative or max(1, n_features // 2)
    centers = np.zeros((n_classes, n_features))
    centers[:, :informative] = separation * rng.standard_normal((n_classes, informative))
    mix = rng.standard_normal((n_features, n_features)) / np.sqrt(n_features) + np.eye(n_features)
    scales = np.exp(rng.uniform(-1.5, 1.5, n_features))
    X = np.concatenate(
        [centers[c] + rng.standard_normal((n_per_class, n_features)) for c in range(n_classes)]
    )
    X = (X @ mix) * scales
    y = np.repeat(np.arange(n_classes), n_per_class)
    order = rng.permutation(y.size)
    return Dataset(X[order], y[order], tuple(f"c{c}" for c in range(n_classes)))
