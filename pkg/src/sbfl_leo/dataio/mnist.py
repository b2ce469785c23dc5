"""IDX readers for MNIST images and labels (plain or gzipped)."""
from __future__ import annotations
import gzip
import struct
from pathlib import Path

import numpy as np

from ..errors import DatasetError
from ..fl.data import LabeledDataset
from .fetch import BASE, MNIST_FILES, fetch_mnist

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def _read_bytes(path: str | Path) -> bytes:
    p = Path(path)
    try:
        if p.suffix == ".gz":
            with gzip.open(p, "rb") as f:
                return f.read()
        return p.read_bytes()
    except (OSError, EOFError) as e:
        raise DatasetError(f"cannot read {p}: {e}") from None


def read_idx_images(path: str | Path) -> np.ndarray:
    """(n, rows*cols) float64 in [0, 1]."""
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise DatasetError(f"{path}: truncated IDX header")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGES_MAGIC:
        raise DatasetError(f"{path}: bad image magic 0x{magic:08x}")
    body = raw[16:]
    if len(body) != n * rows * cols:
        raise DatasetError(f"{path}: expected {n * rows * cols} pixel bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(n, rows * cols).astype(np.float64) / 255.0


def read_idx_labels(path: str | Path) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise DatasetError(f"{path}: truncated IDX header")
    magic, n = struct.unpack(">II", raw[:8])
    if magic != LABELS_MAGIC:
        raise DatasetError(f"{path}: bad label magic 0x{magic:08x}")
    body = raw[8:]
    if len(body) != n:
        raise DatasetError(f"{path}: expected {n} labels, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).astype(np.int64)


def _locate(directory: Path, name: str) -> Path:
    for candidate in (directory / name, directory / name.removesuffix(".gz")):
        if candidate.exists():
            return candidate
    raise DatasetError(f"{name} not found in {directory}")


def split_by_index(data: LabeledDataset, test_fraction: float) -> tuple[LabeledDataset, LabeledDataset]:
    return data.split_tail(test_fraction)


def load_mnist(
    directory: str | Path,
    subset: int | None = None,
    test_fraction: float = 0.2,
    *,
    download: bool = False,
    base_url: str | None = None,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Train and test IDX files concatenated in index order, cut to `subset`, split by position."""
    d = Path(directory)
    if download:
        fetch_mnist(d, base_url or BASE)
    tr_img, tr_lab, te_img, te_lab = (_locate(d, name) for name in MNIST_FILES)
    x = np.concatenate([read_idx_images(tr_img), read_idx_images(te_img)])
    y = np.concatenate([read_idx_labels(tr_lab), read_idx_labels(te_lab)])
    if len(x) != len(y):
        raise DatasetError(f"{len(x)} images but {len(y)} labels in {d}")
    if subset is not None:
        x, y = x[:subset], y[:subset]
    return split_by_index(LabeledDataset(x, y, 10), test_fraction)
