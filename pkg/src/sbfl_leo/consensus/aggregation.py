from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import DomainError, RoundFailure
from ..fl.model import ParamVector
from .voting import HeadBallot

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GlobalRoundResult:
    w_g: ParamVector
    accepted_clusters: tuple[int, ...]
    suspects: frozenset[int]
    global_loss: float
    weights: Mapping[int, float] = field(default_factory=dict)
    failed: bool = False


@dataclass(frozen=True)
class Settlement:
    suspects: frozenset[int]
    deltas: Mapping[int, float]


def aggregate_global(
    accepted: Mapping[int, tuple[ParamVector, float]],
    suspects: Iterable[int] = (),
    heads: Mapping[int, int] | None = None,
) -> ParamVector:
    """w_g = Σ e·w_h / Σ e over accepted clusters whose head is not a suspect.

    `heads` maps cluster id → head id; without it no cluster is excluded.
    """
    suspects = set(suspects)
    keep = sorted(
        cid for cid in accepted if heads is None or heads.get(cid) not in suspects
    )
    if not keep:
        raise RoundFailure("no cluster model survived inter-cluster consensus")
    e = np.array([accepted[cid][1] for cid in keep], dtype=np.float64)
    if np.any(e < 0) or not e.sum() > 0:
        raise DomainError("global aggregation needs positive accuracy weights")
    stack = np.stack([np.asarray(accepted[cid][0], dtype=np.float64) for cid in keep])
    return e @ stack / e.sum()


def cluster_weights(
    ballots: Sequence[HeadBallot],
    claims: Mapping[int, float],
    trusted: Iterable[int],
) -> dict[int, float]:
    """Accuracy weight per cluster: mean score measured by trusted peer heads.

    Falls back to the cluster's own claim when no trusted peer measured it.
    """
    trusted = set(trusted)
    out = {}
    for cid, claim in claims.items():
        seen = [b.scores[cid] for b in ballots if b.head in trusted and cid in b.scores]
        out[cid] = float(np.mean(seen)) if seen else float(claim)
    return out


def global_loss(losses: Sequence[float], weights: Sequence[float] | None = None) -> float:
    """(1/𝒞) Σ w_i L_i with the weights rescaled to sum 𝒞.

    All-zero or missing weights count as uniform.
    """
    L = np.asarray(losses, dtype=np.float64)
    if L.size == 0:
        raise DomainError("global loss needs at least one cluster")
    w = np.ones_like(L) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != L.shape:
        raise DomainError("one weight per cluster loss")
    if not w.sum() > 0:
        w = np.ones_like(L)
    w = w * (L.size / w.sum())
    return float((w * L).sum() / L.size)


def settle_round(
    cluster_suspects: Mapping[int, Iterable[int]],
    heads: Mapping[int, int],
    honest: Iterable[int],
    contributors: Mapping[int, Iterable[int]],
    outcomes: Mapping[int, bool],
    participants: Iterable[int],
    *,
    reward: float = 1.0,
    penalty: float = 3.0,
) -> Settlement:
    """Build 𝓛^r and the reputation deltas of one round.

    𝓛^r = 𝓛_h of honest heads ∪ dishonest heads ∪ contributors of their clusters
    ∪ contributors of rejected cluster models. Every participant gets +reward, or
    -penalty once if it is in 𝓛^r.
    """
    honest = set(honest)
    suspects: set[int] = set()
    for cid, head in heads.items():
        if head in honest:
            suspects.update(cluster_suspects.get(cid, ()))
        else:
            suspects.add(head)
            suspects.update(contributors.get(cid, ()))
        if not outcomes.get(cid, True):
            suspects.update(contributors.get(cid, ()))
    deltas = {sid: (-penalty if sid in suspects else reward) for sid in sorted(set(participants))}
    return Settlement(frozenset(suspects), deltas)
