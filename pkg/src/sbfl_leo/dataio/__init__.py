from __future__ import annotations
import logging

from ..errors import DatasetError
from ..fl.data import LabeledDataset
from .mnist import load_mnist
from .synthetic import make_synthetic

log = logging.getLogger(__name__)


def load_dataset(ds, seed: int = 0) -> tuple[LabeledDataset, LabeledDataset]:
    """(train, test) for a DatasetConfig section; every failure surfaces as DatasetError."""
    try:
        if ds.source == "synthetic":
            train, test = make_synthetic(ds.classes, ds.dim, ds.per_class, ds.spread, seed, ds.test_fraction)
        else:
            train, test = load_mnist(
                ds.path, ds.subset, ds.test_fraction, download=ds.download, base_url=ds.base_url,
            )
    except DatasetError:
        raise
    except (OSError, ValueError) as e:
        raise DatasetError(f"cannot load {ds.source} dataset: {e}") from e
    log.info("dataset %s: %d train / %d test samples", ds.source, train.size, test.size)
    return train, test
