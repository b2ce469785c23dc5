"""Per-method grouping strategies for the miner defense stage."""
from __future__ import annotations
from functools import partial

from ..config import DefenseConfig, Method, ScenarioConfig
from ..defense.grouping import GroupingStrategy, group_models, kmeans_groups, threshold_filter
from ..utils.seeding import CLUSTERING, derive_seed


def dbscan_strategy(defense: DefenseConfig) -> GroupingStrategy:
    return partial(group_models, eps=defense.eps, min_pts=defense.min_pts, max_groups=defense.max_groups)


def kmeans_strategy(defense: DefenseConfig, seed: int) -> GroupingStrategy:
    """k-means ablation: fixed k clustering of θ values in place of DBSCAN."""
    return partial(kmeans_groups, k=defense.kmeans_k, seed=seed)


def efl_strategy(defense: DefenseConfig) -> GroupingStrategy:
    """eFL: keep models with θ >= theta_min as one group."""
    return partial(threshold_filter, theta_min=defense.theta_min)


def keep_all() -> GroupingStrategy:
    return partial(threshold_filter, theta_min=-1.0)


def strategy_for(cfg: ScenarioConfig, round_: int = 1) -> GroupingStrategy | None:
    """None for the FedAvg methods, which have no defense stage.

    θ is measured against w^{r-1}, which is the random initial vector in round 1, so for
    the first `defense.warmup` rounds every method keeps all models in one group.
    """
    if not cfg.method.uses_protocol:
        return None
    if round_ <= cfg.defense.warmup:
        return keep_all()
    if cfg.method is Method.SBFL_LEO:
        return dbscan_strategy(cfg.defense)
    if cfg.method is Method.SBFL_LEO_KMEANS:
        return kmeans_strategy(cfg.defense, derive_seed(cfg.seed, CLUSTERING, 1))
    return efl_strategy(cfg.defense)
