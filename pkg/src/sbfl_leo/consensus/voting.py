"""Intra-cluster miner votes and inter-cluster head ballots."""
from __future__ import annotations
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import DomainError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MinerVote:
    miner: int
    choice: bytes                        # digest of the voted aggregate
    score: float
    suspects: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise DomainError(f"vote score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class TallyResult:
    winner: bytes
    counts: Mapping[bytes, int]
    dissenters: tuple[int, ...]
    claimed_score: float  # mean score of the miners who voted for the winner

    def counts_hex(self) -> dict[str, int]:
        return {k.hex(): v for k, v in sorted(self.counts.items())}


def tally_cluster(votes: Sequence[MinerVote]) -> TallyResult:
    """Plurality over vote choices; ties go to the higher mean score, then the lower digest."""
    if not votes:
        raise DomainError("no votes to tally")
    counts = Counter(v.choice for v in votes)
    mean_score = {
        c: float(np.mean([v.score for v in votes if v.choice == c])) for c in counts
    }
    winner = min(counts, key=lambda c: (-counts[c], -mean_score[c], c))
    dissenters = tuple(sorted(v.miner for v in votes if v.choice != winner))
    return TallyResult(winner, dict(counts), dissenters, mean_score[winner])


def agreed_suspects(votes: Sequence[MinerVote], winner: bytes) -> frozenset[int]:
    """Learners named by a strict majority of the votes cast for `winner`."""
    backing = [v for v in votes if v.choice == winner]
    named = Counter(i for v in backing for i in set(v.suspects))
    return frozenset(i for i, n in named.items() if 2 * n > len(backing))


@dataclass(frozen=True)
class HeadBallot:
    head: int
    approvals: Mapping[int, bool]                      # peer cluster id → approve
    scores: Mapping[int, float] = field(default_factory=dict)  # measured e per peer cluster


def head_verify(e_self: float, e_claim: float, sigma: float) -> bool:
    """Approve iff the head's own measurement is strictly within σ of the claim."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    return abs(e_self - e_claim) < sigma


def cast_ballot(
    head: int,
    measured: Mapping[int, float],
    claims: Mapping[int, float],
    sigma: float,
) -> HeadBallot:
    approvals = {cid: head_verify(measured[cid], claims[cid], sigma) for cid in sorted(measured)}
    return HeadBallot(head, approvals, dict(measured))


def cluster_outcomes(ballots: Sequence[HeadBallot], cluster_ids: Iterable[int]) -> dict[int, bool]:
    """Accepted iff a strict majority of the ballots that cover the cluster approve it.

    A cluster no peer voted on (single-cluster rounds) is accepted.
    """
    out = {}
    for cid in cluster_ids:
        marks = [b.approvals[cid] for b in ballots if cid in b.approvals]
        out[cid] = not marks or 2 * sum(marks) > len(marks)
    return out


def honest_heads(ballots: Sequence[HeadBallot], outcomes: Mapping[int, bool]) -> frozenset[int]:
    """Heads whose ballot matches the majority outcome on every cluster they voted on."""
    return frozenset(
        b.head for b in ballots if all(outcomes[cid] == ok for cid, ok in b.approvals.items())
    )
