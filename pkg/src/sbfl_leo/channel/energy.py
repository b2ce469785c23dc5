from __future__ import annotations
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

from .physics import PhysicsConstants, eval_energy, rate, snr_sgl, train_energy, tx_energy


@dataclass(frozen=True)
class Hop:
    sender: int
    receiver: int
    power: float
    rate: float


@dataclass(frozen=True)
class Workload:
    sat: int
    cpu_freq: float
    samples: int


@dataclass
class ClusterTraffic:
    """Everything one cluster transmits and computes in a round."""

    cluster_id: int
    distribution: list[Hop] = field(default_factory=list)
    uploads: list[Hop] = field(default_factory=list)
    trainers: list[Workload] = field(default_factory=list)
    evaluators: list[Workload] = field(default_factory=list)
    head: Workload | None = None


@dataclass(frozen=True)
class EnergyBreakdown:
    distribution: float = 0.0
    training: float = 0.0
    evaluation: float = 0.0
    intra_tx: float = 0.0
    inter_tx: float = 0.0
    head_verify: float = 0.0
    total: float = 0.0

    @classmethod
    def of(cls, **parts: float) -> "EnergyBreakdown":
        return cls(**parts, total=sum(parts.values()))

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    def __add__(self, other: "EnergyBreakdown") -> "EnergyBreakdown":
        parts = {f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self) if f.name != "total"}
        return EnergyBreakdown.of(**parts)

    def with_head_verify(self, head_verify: float) -> "EnergyBreakdown":
        parts = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("head_verify", "total")}
        return EnergyBreakdown.of(**parts, head_verify=head_verify)


def hops_energy(hops: Sequence[Hop], bits: float) -> float:
    return sum(tx_energy(h.power, bits, h.rate) for h in hops)


def round_energy(
    clusters: Sequence[ClusterTraffic],
    inter_hops: Sequence[Hop],
    epochs: int,
    bits: float,
    consts: PhysicsConstants,
    *,
    verify_evaluations: int = 1,
) -> EnergyBreakdown:
    """E^r = Σ_c (E_di + E_c) + E_tc + Σ_heads E_ve.

    E_c covers learner training, miner scoring (half-cost) and intra-cluster uploads.
    Each head is charged `verify_evaluations` half-cost evaluations on its own dataset.
    """
    dist = train = evals = intra = verify = 0.0
    for c in clusters:
        dist += hops_energy(c.distribution, bits)
        intra += hops_energy(c.uploads, bits)
        train += sum(train_energy(w.cpu_freq, epochs, w.samples, consts)[1] for w in c.trainers)
        evals += sum(eval_energy(w.cpu_freq, epochs, w.samples, consts) for w in c.evaluators)
        if c.head is not None:
            verify += verify_evaluations * eval_energy(c.head.cpu_freq, epochs, c.head.samples, consts)
    return EnergyBreakdown.of(
        distribution=dist, training=train, evaluation=evals,
        intra_tx=intra, inter_tx=hops_energy(inter_hops, bits), head_verify=verify,
    )


def setup_energy(dc_position, receivers: Sequence, bits: Sequence[float], consts: PhysicsConstants) -> float:
    """Round-0 SGL broadcast: the DC sends each satellite its clustering result over the ground link."""
    total = 0.0
    for pos, b in zip(receivers, bits):
        r = rate(snr_sgl(dc_position, pos, consts), consts.dc_tx_power, consts)
        total += tx_energy(consts.dc_tx_power, b, r)
    return total
