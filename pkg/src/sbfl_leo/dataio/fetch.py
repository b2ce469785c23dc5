import logging
import pathlib

import requests

from ..errors import DatasetError

log = logging.getLogger(__name__)

BASE = "https://storage.googleapis.com/cvdf-datasets/mnist/"
RAW_DIR = pathlib.Path("data/raw")
MNIST_FILES = (
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
)


def _download(url, path, timeout=60):
    tmp = path.with_suffix(path.suffix + ".part")
    try:
        with requests.get(url, stream=True, timeout=timeout) as r:
            r.raise_for_status()
            with open(tmp, "wb") as f:
                for chunk in r.iter_content(chunk_size=1 << 16):
                    f.write(chunk)
    except requests.RequestException as e:
        tmp.unlink(missing_ok=True)
        raise DatasetError(f"download of {url} failed: {e}") from None
    tmp.replace(path)


def fetch_mnist(dest_dir=RAW_DIR, base_url=BASE):
    """Paths of the four MNIST archives, downloading the missing ones. Existing files are left alone."""
    dest = pathlib.Path(dest_dir)
    dest.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in MNIST_FILES:
        path = dest / name
        if not path.exists():
            log.info("downloading %s", name)
            _download(base_url.rstrip("/") + "/" + name, path)
        paths.append(path)
    return paths
