from __future__ import annotations

import numpy as np
from sklearn.datasets import make_blobs

from ..fl.data import LabeledDataset


def make_synthetic(
    classes: int = 10,
    dim: int = 20,
    per_class: int = 300,
    spread: float = 1.0,
    seed: int = 0,
    test_fraction: float = 0.2,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Gaussian blobs, one per class, shuffled then split by position."""
    x, y = make_blobs(
        n_samples=[per_class] * classes,
        n_features=dim,
        cluster_std=spread,
        center_box=(-5.0, 5.0),
        shuffle=True,
        random_state=seed,
    )
    data = LabeledDataset(x.astype(np.float64), y.astype(np.int64), classes)
    return data.split_tail(test_fraction)
