"""Adversary behaviours for learners, miners and heads."""
from __future__ import annotations
import enum
import logging
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from ..constellation.geometry import Role
from ..consensus.voting import HeadBallot
from ..errors import ConfigurationError
from ..fl.data import LabeledDataset, TrainConfig
from ..fl.model import ModelLayout, ParamVector
from ..fl.training import train_local
from ..utils.seeding import ATTACK, rng_for

log = logging.getLogger(__name__)


class AttackKind(str, enum.Enum):
    LABEL_FLIP = "label_flip"
    SIGN_FLIP = "sign_flip"
    STALE_MODEL = "stale_model"
    DISHONEST_MINER_VOTE = "dishonest_miner_vote"
    DISHONEST_HEAD_VOTE = "dishonest_head_vote"

    @property
    def target_role(self) -> Role:
        if self is AttackKind.DISHONEST_MINER_VOTE:
            return Role.MINER
        if self is AttackKind.DISHONEST_HEAD_VOTE:
            return Role.HEAD
        return Role.LEARNER


def default_windows() -> frozenset[int]:
    return frozenset(range(5, 16)) | frozenset(range(25, 51))


def parse_rounds(value) -> frozenset[int]:
    """Rounds from a list of ints and/or "a-b" ranges, or a comma-separated string of them."""
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    out: set[int] = set()
    for item in value:
        if isinstance(item, str) and re.fullmatch(r"\s*\d+\s*-\s*\d+\s*", item):
            lo, hi = (int(x) for x in item.split("-"))
            if hi < lo:
                raise ConfigurationError(f"empty round range {item!r}")
            out.update(range(lo, hi + 1))
        else:
            try:
                out.add(int(item))
            except (TypeError, ValueError):
                raise ConfigurationError(f"cannot read round {item!r}") from None
    return frozenset(out)


@dataclass(frozen=True)
class AttackSpec:
    kind: AttackKind = AttackKind.LABEL_FLIP
    malicious_fraction: float = 0.2
    active_rounds: frozenset[int] = field(default_factory=default_windows)
    seed: int = 0
    sign_flip_target: str = "model"  # model | delta
    scale: float = 1.0               # poisoned update w - w^{r-1} is multiplied by this

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        object.__setattr__(self, "active_rounds", frozenset(self.active_rounds))
        if not 0.0 <= self.malicious_fraction < 1.0:
            raise ConfigurationError("attack.malicious_fraction must lie in [0, 1)")
        if self.kind.target_role is not Role.LEARNER and self.malicious_fraction >= 0.5:
            raise ConfigurationError(f"{self.kind.value} needs an honest majority (fraction < 0.5)")
        if not self.active_rounds:
            raise ConfigurationError("attack.active_rounds is empty")
        if self.sign_flip_target not in ("model", "delta"):
            raise ConfigurationError("attack.sign_flip_target must be 'model' or 'delta'")
        if not self.scale > 0:
            raise ConfigurationError("attack.scale must be positive")

    def is_active(self, round_: int) -> bool:
        return round_ in self.active_rounds


def select_malicious(satellite_ids: Iterable[int], spec: AttackSpec) -> frozenset[int]:
    """⌊fraction · count⌋ ids drawn uniformly from the attack's own seed stream.

    Callers pass the holders of the role the attack targets.
    """
    ids = np.array(sorted(int(i) for i in satellite_ids), dtype=np.int64)
    count = int(np.floor(spec.malicious_fraction * len(ids) + 1e-9))
    if count == 0:
        return frozenset()
    picked = rng_for(spec.seed, ATTACK).choice(ids, size=count, replace=False)
    return frozenset(int(i) for i in picked)


def flip_labels(data: LabeledDataset) -> LabeledDataset:
    k = data.class_count
    return data.relabel(np.arange(k)[::-1].copy())


@dataclass(frozen=True)
class LearnerContext:
    layout: ModelLayout
    start: ParamVector  # w^{r-1}
    data: LabeledDataset
    cfg: TrainConfig


def corrupt_local_model(honest: ParamVector | None, spec: AttackSpec, ctx: LearnerContext) -> ParamVector:
    """What an active malicious learner submits instead of `honest`.

    `honest` may be None for LABEL_FLIP, which trains its own poisoned model. Label-flip and
    delta sign-flip updates are scaled by `spec.scale`.
    """
    kind = spec.kind
    if kind is AttackKind.LABEL_FLIP:
        flipped = train_local(ctx.layout, ctx.start, flip_labels(ctx.data), ctx.cfg)
        if spec.scale == 1.0:
            return flipped
        return ctx.start + spec.scale * (flipped - ctx.start)
    if kind is AttackKind.STALE_MODEL:
        return np.array(ctx.start, dtype=np.float64, copy=True)
    if kind is AttackKind.SIGN_FLIP:
        if honest is None:
            honest = train_local(ctx.layout, ctx.start, ctx.data, ctx.cfg)
        if spec.sign_flip_target == "delta":
            return ctx.start - spec.scale * (honest - ctx.start)
        return -np.asarray(honest, dtype=np.float64)
    raise ConfigurationError(f"{kind.value} does not target learners")


def corrupt_vote(honest_choice: bytes, scores: Mapping[bytes, float]) -> bytes:
    """Lowest-scoring choice other than the honest one; honest when there is no alternative."""
    others = [c for c in scores if c != honest_choice]
    if not others:
        return honest_choice
    return min(others, key=lambda c: (scores[c], c))


def corrupt_ballot(ballot: HeadBallot) -> HeadBallot:
    """Approve what an honest head would reject and the reverse."""
    return replace(ballot, approvals={cid: not ok for cid, ok in ballot.approvals.items()})
