from __future__ import annotations
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class LabeledDataset:
    """Features (n x d), integer labels and the sample ids they came from.

    `index` keeps the position of every sample in the source dataset, which is what
    partition disjointness is checked against.
    """

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    index: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1) if len(x) else x.reshape(0, 0)
        y = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(x) != len(y):
            raise ConfigurationError(f"{len(x)} feature rows but {len(y)} labels")
        if self.class_count < 1:
            raise ConfigurationError("class_count must be >= 1")
        if len(y) and (y.min() < 0 or y.max() >= self.class_count):
            raise ConfigurationError(f"labels must lie in [0, {self.class_count})")
        idx = np.arange(len(y)) if self.index is None else np.asarray(self.index, dtype=np.int64)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "index", idx)

    @property
    def size(self) -> int:
        return int(len(self.labels))

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1]) if self.features.ndim == 2 else 0

    def histogram(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def subset(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return LabeledDataset(self.features[rows], self.labels[rows], self.class_count, self.index[rows])

    def split_tail(self, fraction: float) -> tuple["LabeledDataset", "LabeledDataset"]:
        """(head, tail) where tail is the last `fraction` of rows by position."""
        n_tail = int(round(self.size * fraction))
        cut = self.size - n_tail
        rows = np.arange(self.size)
        return self.subset(rows[:cut]), self.subset(rows[cut:])

    def relabel(self, mapping: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.features, mapping[self.labels], self.class_count, self.index)

    def require_nonempty(self) -> None:
        if self.size == 0:
            raise DomainError("dataset is empty")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 0.1
    energy_penalty: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if not self.learning_rate >= 0:
            raise ConfigurationError("learning_rate must be >= 0")
        if not self.energy_penalty >= 0:
            raise ConfigurationError("energy_penalty must be >= 0")
