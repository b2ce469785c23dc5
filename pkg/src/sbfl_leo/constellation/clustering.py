from __future__ import annotations
import logging
from typing import Sequence

import numpy as np
from sklearn.cluster import KMeans

from ..errors import ConfigurationError
from .geometry import Satellite

log = logging.getLogger(__name__)

MAX_ITER = 50


def clustering_features(satellites: Sequence[Satellite]) -> np.ndarray:
    """[position / max radius ‖ L1-normalised label histogram], one row per satellite."""
    pos = np.stack([s.position for s in satellites]).astype(np.float64)
    radius = np.linalg.norm(pos, axis=1).max()
    pos = pos / radius if radius > 0 else pos
    hists = []
    for s in satellites:
        if s.data is None or s.data.size == 0:
            hists.append(None)
            continue
        h = s.data.histogram().astype(np.float64)
        hists.append(h / h.sum())
    width = max((len(h) for h in hists if h is not None), default=0)
    hist = np.array([np.zeros(width) if h is None else h for h in hists]).reshape(len(satellites), width)
    return np.hstack([pos, hist])


def cluster_satellites(satellites: Sequence[Satellite], cluster_count: int, seed: int) -> list[list[int]]:
    """DC-side k-means over position and data characteristics.

    Returns `cluster_count` nonempty groups of satellite ids, each sorted, groups ordered by
    their smallest id. sklearn relocates an emptied centroid to the farthest point.
    """
    if cluster_count < 2:
        raise ConfigurationError("cluster count must be >= 2")
    if len(satellites) < 3 * cluster_count:
        raise ConfigurationError(
            f"{len(satellites)} satellites cannot fill {cluster_count} clusters of at least 3"
        )
    x = clustering_features(satellites)
    km = KMeans(n_clusters=cluster_count, n_init=10, max_iter=MAX_ITER, random_state=seed).fit(x)
    groups: dict[int, list[int]] = {}
    for sat, label in zip(satellites, km.labels_):
        groups.setdefault(int(label), []).append(sat.id)
    out = sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])
    if len(out) != cluster_count:
        raise ConfigurationError(f"k-means produced {len(out)} nonempty clusters, wanted {cluster_count}")
    log.debug("cluster sizes: %s", [len(g) for g in out])
    return out
