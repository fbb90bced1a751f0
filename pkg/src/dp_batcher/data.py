"""CSV dataset loading and synthetic data generation.

File format: one example per row, feature columns first, label column last,
with a mandatory header row.  Labels are stored as floats; classifiers
interpret them as {0, 1}.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n_examples, n_features)
    labels: np.ndarray  # (n_examples,)

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must be one value per example")

    @property
    def n_examples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def _is_float(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def load_csv(path: str) -> Dataset:
    """Read a dataset CSV (header row required, label in the last column)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        if len(header) < 2:
            raise ValueError(f"{path}: need at least one feature column and a label column")
        if all(_is_float(tok) for tok in header):
            raise ValueError(f"{path}: first row looks like data; a header row is required")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            try:
                rows.append([float(tok) for tok in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric value ({exc})") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    return Dataset(features=arr[:, :-1], labels=arr[:, -1])


def save_csv(data: Dataset, path: str, feature_names: list[str] | None = None) -> None:
    """Write a dataset in the same CSV layout that `load_csv` reads."""
    names = feature_names or [f"x{j}" for j in range(data.n_features)]
    if len(names) != data.n_features:
        raise ValueError("feature_names length must match the number of features")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*names, "label"])
        for i in range(data.n_examples):
            writer.writerow(
                [repr(float(v)) for v in data.features[i]] + [repr(float(data.labels[i]))]
            )


def synthetic_classification(
    n_examples: int, n_features: int = 4, seed: int = 0, margin: float = 0.5
) -> Dataset:
    """Linearly separable two-class data with the given margin."""
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=n_features)
    direction /= np.linalg.norm(direction)
    x = rng.normal(size=(n_examples, n_features))
    score = x @ direction
    labels = (score >= 0).astype(float)
    # push every point to at least `margin` from the separating hyperplane
    desired = np.where(labels > 0, np.maximum(score, margin), np.minimum(score, -margin))
    x = x + (desired - score)[:, None] * direction
    return Dataset(features=x, labels=labels)


def synthetic_regression(
    n_examples: int, n_features: int = 4, seed: int = 0, noise_std: float = 0.1
) -> Dataset:
    """Linear targets y = w.x + c + noise."""
    rng = np.random.default_rng(seed)
    w = rng.normal(size=n_features)
    c = rng.normal()
    x = rng.normal(size=(n_examples, n_features))
    y = x @ w + c + noise_std * rng.normal(size=n_examples)
    return Dataset(features=x, labels=y)
