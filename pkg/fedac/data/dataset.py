"""Labeled datasets and the plain-text dataset file format.

File layout: a header line ``d=<int>,C=<int>,N=<int>`` followed by N rows of
``d`` comma-separated feature values and one integer label.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import pandas as pd

from fedac.errors import ConfigurationError, ShapeError


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, integer labels and the class count."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if labels.size == 0:
            raise ShapeError("dataset is empty")
        if features.shape[0] != labels.size:
            raise ShapeError(f"{features.shape[0]} feature rows but {labels.size} labels")
        if labels.min() < 0 or labels.max() >= self.class_count:
            raise ShapeError(f"labels must lie in [0, {self.class_count})")
        if not np.all(np.isfinite(features)):
            raise ShapeError("features contain non-finite values")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.size

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def class_indices(self) -> list:
        """Indices of each class, in dataset order."""
        return [np.flatnonzero(self.labels == c) for c in range(self.class_count)]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[indices], self.labels[indices], self.class_count)


def concatenate(datasets: Sequence[Dataset]) -> Dataset:
    """Stack datasets that share input width and class count."""
    if not datasets:
        raise ShapeError("nothing to concatenate")
    class_count = datasets[0].class_count
    if any(ds.class_count != class_count or ds.input_dim != datasets[0].input_dim for ds in datasets):
        raise ShapeError("datasets disagree on input width or class count")
    return Dataset(
        np.vstack([ds.features for ds in datasets]),
        np.concatenate([ds.labels for ds in datasets]),
        class_count,
    )


def _parse_header(line: str) -> dict:
    try:
        fields = dict(part.split("=", 1) for part in line.strip().split(","))
        return {key.strip(): int(value) for key, value in fields.items()}
    except ValueError as exc:
        raise ConfigurationError(f"malformed dataset header {line.strip()!r}") from exc


def load_dataset(path: Union[str, Path]) -> Dataset:
    """Read a dataset file."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"dataset file not found: {path}")

    with open(path, encoding="utf-8") as f:
        header = _parse_header(f.readline())
        missing = {"d", "C", "N"} - header.keys()
        if missing:
            raise ConfigurationError(f"dataset header is missing {sorted(missing)}")
        table = pd.read_csv(f, header=None, float_precision="round_trip")

    d, class_count, n = header["d"], header["C"], header["N"]
    if table.shape != (n, d + 1):
        raise ConfigurationError(
            f"dataset body has shape {table.shape}, header promises ({n}, {d + 1})"
        )
    values = table.to_numpy()
    return Dataset(values[:, :d].astype(np.float64), values[:, d].astype(np.int64), class_count)


def save_dataset(dataset: Dataset, path: Union[str, Path], float_format: str = "%.17g") -> None:
    """Write a dataset file readable by load_dataset."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table = pd.DataFrame(dataset.features)
    table[dataset.input_dim] = dataset.labels
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"d={dataset.input_dim},C={dataset.class_count},N={len(dataset)}\n")
        table.to_csv(f, header=False, index=False, float_format=float_format, lineterminator="\n")
