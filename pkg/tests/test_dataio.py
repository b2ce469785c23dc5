from __future__ import annotations
import gzip
import struct

import numpy as np
import pytest
import requests

from sbfl_leo.config import DatasetConfig
from sbfl_leo.dataio import fetch, load_dataset
from sbfl_leo.dataio.mnist import load_mnist, read_idx_images, read_idx_labels
from sbfl_leo.dataio.synthetic import make_synthetic
from sbfl_leo.errors import DatasetError


def _images(n, rows=2, cols=3, start=0):
    pixels = (np.arange(n * rows * cols) + start) % 256
    return struct.pack(">IIII", 0x803, n, rows, cols) + pixels.astype(np.uint8).tobytes()


def _labels(values):
    return struct.pack(">II", 0x801, len(values)) + bytes(values)


@pytest.fixture
def idx_dir(tmp_path):
    """Gzipped training files, raw test files: 6 + 4 samples."""
    with gzip.open(tmp_path / "train-images-idx3-ubyte.gz", "wb") as f:
        f.write(_images(6))
    with gzip.open(tmp_path / "train-labels-idx1-ubyte.gz", "wb") as f:
        f.write(_labels([0, 1, 2, 3, 4, 5]))
    (tmp_path / "t10k-images-idx3-ubyte").write_bytes(_images(4, start=7))
    (tmp_path / "t10k-labels-idx1-ubyte").write_bytes(_labels([6, 7, 8, 9]))
    return tmp_path


def test_idx_readers(idx_dir):
    x = read_idx_images(idx_dir / "train-images-idx3-ubyte.gz")
    assert x.shape == (6, 6)
    assert x[0, 1] == pytest.approx(1 / 255)
    assert x.min() >= 0 and x.max() <= 1
    np.testing.assert_array_equal(read_idx_labels(idx_dir / "t10k-labels-idx1-ubyte"), [6, 7, 8, 9])


def test_bad_idx_files(tmp_path):
    (tmp_path / "a").write_bytes(_labels(list(range(20))))
    with pytest.raises(DatasetError, match="magic"):
        read_idx_images(tmp_path / "a")
    (tmp_path / "b").write_bytes(_labels([1, 2])[:-1])
    with pytest.raises(DatasetError):
        read_idx_labels(tmp_path / "b")
    (tmp_path / "c").write_bytes(b"\x00\x00")
    with pytest.raises(DatasetError, match="truncated"):
        read_idx_labels(tmp_path / "c")
    with pytest.raises(DatasetError):
        read_idx_labels(tmp_path / "missing.gz")


def test_load_mnist_keeps_index_order(idx_dir):
    train, test = load_mnist(idx_dir, subset=None, test_fraction=0.2)
    np.testing.assert_array_equal(train.labels, [0, 1, 2, 3, 4, 5, 6, 7])
    np.testing.assert_array_equal(test.labels, [8, 9])
    np.testing.assert_array_equal(test.index, [8, 9])

    train, test = load_mnist(idx_dir, subset=5, test_fraction=0.2)
    assert (train.size, test.size) == (4, 1)
    assert test.labels.tolist() == [4]


def test_load_mnist_missing_file(idx_dir):
    (idx_dir / "t10k-labels-idx1-ubyte").unlink()
    with pytest.raises(DatasetError, match="not found"):
        load_mnist(idx_dir)


class _Response:
    def __init__(self, body: bytes):
        self.body = body

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def raise_for_status(self):
        pass

    def iter_content(self, chunk_size=1):
        for i in range(0, len(self.body), chunk_size):
            yield self.body[i:i + chunk_size]


def test_fetch_downloads_only_missing_files(tmp_path, monkeypatch):
    (tmp_path / fetch.MNIST_FILES[0]).write_bytes(b"kept")
    urls = []

    def fake_get(url, stream, timeout):
        urls.append(url)
        return _Response(url.encode())

    monkeypatch.setattr(fetch.requests, "get", fake_get)
    paths = fetch.fetch_mnist(tmp_path, base_url="https://mirror.example/mnist/")
    assert [p.name for p in paths] == list(fetch.MNIST_FILES)
    assert len(urls) == 3
    assert (tmp_path / fetch.MNIST_FILES[0]).read_bytes() == b"kept"
    assert (tmp_path / fetch.MNIST_FILES[1]).read_bytes() == b"https://mirror.example/mnist/" + fetch.MNIST_FILES[1].encode()


def test_failed_download_leaves_nothing_behind(tmp_path, monkeypatch):
    def fake_get(url, stream, timeout):
        raise requests.ConnectionError("offline")

    monkeypatch.setattr(fetch.requests, "get", fake_get)
    with pytest.raises(DatasetError, match="offline"):
        fetch.fetch_mnist(tmp_path)
    assert list(tmp_path.iterdir()) == []


def test_synthetic_is_seeded():
    a_train, a_test = make_synthetic(classes=4, dim=3, per_class=25, seed=9)
    b_train, _ = make_synthetic(classes=4, dim=3, per_class=25, seed=9)
    c_train, _ = make_synthetic(classes=4, dim=3, per_class=25, seed=10)
    assert (a_train.size, a_test.size) == (80, 20)
    np.testing.assert_array_equal(a_train.features, b_train.features)
    assert not np.array_equal(a_train.features, c_train.features)
    assert set(a_train.labels.tolist()) == {0, 1, 2, 3}


def test_load_dataset_dispatches(idx_dir):
    syn = DatasetConfig(source="synthetic", classes=3, dim=2, per_class=10)
    train, test = load_dataset(syn, seed=1)
    assert train.size + test.size == 30
    train, test = load_dataset(DatasetConfig(path=str(idx_dir), subset=None, download=False))
    assert train.size + test.size == 10
    with pytest.raises(DatasetError):
        load_dataset(DatasetConfig(path=str(idx_dir / "nowhere"), download=False))
