from __future__ import annotations
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from ..errors import ConfigurationError
from .geometry import Role, Satellite


@dataclass(frozen=True)
class Cluster:
    id: int
    head: int
    miners: tuple[int, ...]
    learners: tuple[int, ...]
    learner_to_miner: Mapping[int, int] = field(default_factory=dict)

    @property
    def members(self) -> tuple[int, ...]:
        return (self.head, *self.miners, *self.learners)

    def role_of(self, sat_id: int) -> Role:
        if sat_id == self.head:
            return Role.HEAD
        if sat_id in self.miners:
            return Role.MINER
        if sat_id in self.learners:
            return Role.LEARNER
        return Role.IDLE


def is_eligible(sat: Satellite, removal_threshold: float = 0.0) -> bool:
    return sat.reputation > removal_threshold


def miner_count(member_count: int, miner_fraction: float) -> int:
    # round() keeps 0.2*15 from ceiling to 4
    return math.ceil(round(miner_fraction * (member_count - 1), 9))


def assign_roles(
    members: Sequence[Satellite],
    miner_fraction: float,
    *,
    cluster_id: int = 0,
    incumbent: int | None = None,
    removal_threshold: float = 0.0,
) -> Cluster:
    """Reputation-ranked role split for one cluster.

    The incumbent head keeps the role while it is still eligible. Otherwise the best-ranked
    member (reputation desc, id asc) becomes head. The next ceil(fraction * (n-1)) members
    become miners and everyone else is a learner. Each learner attaches to its nearest miner.
    """
    if not 0 < miner_fraction < 1:
        raise ConfigurationError("miner_fraction must lie in (0, 1)")
    pool = [s for s in members if is_eligible(s, removal_threshold)]
    if len(pool) < 3:
        raise ConfigurationError(f"cluster {cluster_id} has {len(pool)} eligible satellites, needs 3")
    ranked = sorted(pool, key=lambda s: (-s.reputation, s.id))
    head = next((s for s in ranked if s.id == incumbent), ranked[0])
    rest = [s for s in ranked if s.id != head.id]
    n_miners = miner_count(len(pool), miner_fraction)
    miners, learners = rest[:n_miners], rest[n_miners:]
    if not miners or not learners:
        raise ConfigurationError(
            f"cluster {cluster_id}: split gives {len(miners)} miners and {len(learners)} learners"
        )
    miners_by_id = sorted(miners, key=lambda s: s.id)
    attach = {}
    for l in learners:
        near = min(miners_by_id, key=lambda m: (float(np.linalg.norm(l.position - m.position)), m.id))
        attach[l.id] = near.id
    return Cluster(
        id=cluster_id,
        head=head.id,
        miners=tuple(m.id for m in miners_by_id),
        learners=tuple(sorted(l.id for l in learners)),
        learner_to_miner=attach,
    )


def apply_reputation_delta(sat: Satellite, delta: float) -> Satellite:
    return replace(sat, reputation=max(0.0, sat.reputation + delta))


def with_roles(satellites: Mapping[int, Satellite], clusters: Sequence[Cluster]) -> dict[int, Satellite]:
    """Copy of the satellite table with every role field matching `clusters`."""
    roles = {sid: Role.IDLE for sid in satellites}
    for c in clusters:
        for sid in c.members:
            roles[sid] = c.role_of(sid)
    return {sid: replace(s, role=roles[sid]) for sid, s in satellites.items()}
