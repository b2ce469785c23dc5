"""Group local models by their cosine similarity to the previous global model."""
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from sklearn.cluster import DBSCAN, KMeans

from ..errors import ConfigurationError, DegenerateInputError

log = logging.getLogger(__name__)

SimilarityProfile = Mapping[int, float]


@dataclass(frozen=True)
class Grouping:
    groups: tuple[tuple[int, ...], ...]  # learner ids, groups by ascending mean θ
    noise: frozenset[int] = field(default_factory=frozenset)

    def theta_sets(self, profile: SimilarityProfile) -> list[list[float]]:
        return [sorted(profile[i] for i in g) for g in self.groups]


GroupingStrategy = Callable[[SimilarityProfile], Grouping]


def cosine_similarity(w, w_prev) -> float:
    a = np.asarray(w, dtype=np.float64)
    b = np.asarray(w_prev, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigurationError(f"cosine similarity of shapes {a.shape} and {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine similarity is undefined for a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def similarity_profile(models: Mapping[int, np.ndarray], w_prev) -> tuple[dict[int, float], frozenset[int]]:
    """θ per submitter, plus the submitters whose vector made θ undefined."""
    profile, degenerate = {}, set()
    for sid, w in models.items():
        try:
            profile[sid] = cosine_similarity(w, w_prev)
        except DegenerateInputError:
            degenerate.add(sid)
        else:
            if not np.isfinite(profile[sid]):
                degenerate.add(sid)
                del profile[sid]
    return profile, frozenset(degenerate)


def _ordered(profile: SimilarityProfile) -> tuple[list[int], np.ndarray]:
    ids = sorted(profile, key=lambda i: (profile[i], i))
    return ids, np.array([profile[i] for i in ids], dtype=np.float64)


def _finish(clusters: list[list[int]], profile: SimilarityProfile, noise, max_groups: int) -> Grouping:
    clusters = [list(c) for c in clusters]
    while len(clusters) > max_groups:
        means = [float(np.mean([profile[i] for i in c])) for c in clusters]
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                gap = abs(means[a] - means[b])
                if best is None or gap < best[0]:
                    best = (gap, a, b)
        _, a, b = best
        clusters[a] = clusters[a] + clusters[b]
        del clusters[b]
    clusters.sort(key=lambda c: (float(np.mean([profile[i] for i in c])), min(c)))
    return Grouping(tuple(tuple(sorted(c)) for c in clusters), frozenset(noise))


def group_models(profile: SimilarityProfile, eps: float = 0.05, min_pts: int = 2, max_groups: int = 2) -> Grouping:
    """DBSCAN on θ values, capped at `max_groups` groups.

    Points are scanned in ascending θ, so a border point joins the first cluster that reaches
    it. Surplus clusters are merged pairwise by closest θ-mean. Noise belongs to no group.
    """
    if not profile:
        raise ConfigurationError("nothing to group")
    if not eps > 0 or min_pts < 1:
        raise ConfigurationError("DBSCAN needs eps > 0 and min_pts >= 1")
    ids, theta = _ordered(profile)
    dist = np.abs(theta[:, None] - theta[None, :])
    labels = DBSCAN(eps=eps, min_samples=min_pts, metric="precomputed").fit(dist).labels_
    clusters: dict[int, list[int]] = {}
    noise = []
    for sid, lab in zip(ids, labels):
        if lab < 0:
            noise.append(sid)
        else:
            clusters.setdefault(int(lab), []).append(sid)
    ordered = [clusters[k] for k in sorted(clusters)]
    if len(ordered) > max_groups:
        log.debug("DBSCAN found %d clusters, merging down to %d", len(ordered), max_groups)
    return _finish(ordered, profile, noise, max_groups)


def kmeans_groups(profile: SimilarityProfile, k: int = 2, seed: int = 0) -> Grouping:
    """Fixed-k clustering of θ values (ablation of the density grouping)."""
    if not profile:
        raise ConfigurationError("nothing to group")
    ids, theta = _ordered(profile)
    if len(np.unique(theta)) < k:
        return Grouping((tuple(sorted(ids)),))
    labels = KMeans(n_clusters=k, n_init=10, random_state=seed).fit(theta.reshape(-1, 1)).labels_
    clusters: dict[int, list[int]] = {}
    for sid, lab in zip(ids, labels):
        clusters.setdefault(int(lab), []).append(sid)
    return _finish(list(clusters.values()), profile, (), k)


def threshold_filter(profile: SimilarityProfile, theta_min: float = 0.5) -> Grouping:
    """eFL-style filter: models with θ < theta_min are dropped, the rest form one group."""
    kept = tuple(sorted(i for i, t in profile.items() if t >= theta_min))
    dropped = frozenset(i for i, t in profile.items() if t < theta_min)
    return Grouping((kept,) if kept else (), dropped)
