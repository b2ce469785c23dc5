from __future__ import annotations
import enum
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigurationError
from ..fl.data import LabeledDataset

EARTH_RADIUS_M = 6_371_000.0


class Role(str, enum.Enum):
    HEAD = "head"
    MINER = "miner"
    LEARNER = "learner"
    IDLE = "idle"  # removed or in an unstaffed cluster


@dataclass(frozen=True)
class Satellite:
    id: int
    orbit_index: int
    phase_index: int
    position: np.ndarray  # metres, Earth-centred
    cpu_freq: float       # Hz
    tx_power: float       # W
    reputation: float = 10.0
    role: Role = Role.LEARNER
    data: LabeledDataset | None = None

    @property
    def data_size(self) -> int:
        return 0 if self.data is None else self.data.size

    def with_data(self, data: LabeledDataset) -> "Satellite":
        return replace(self, data=data)


def orbit_position(radius: float, raan: float, inclination: float, anomaly: float) -> np.ndarray:
    """In-plane point rotated by inclination (about x) then RAAN (about z)."""
    px, py = radius * np.cos(anomaly), radius * np.sin(anomaly)
    y_inc, z_inc = py * np.cos(inclination), py * np.sin(inclination)
    return np.array([
        px * np.cos(raan) - y_inc * np.sin(raan),
        px * np.sin(raan) + y_inc * np.cos(raan),
        z_inc,
    ])


def build_constellation(
    orbit_count: int,
    sats_per_orbit: int,
    altitude_m: float = 550_000.0,
    seed: int = 0,
    *,
    inclination_deg: float = 53.0,
    phasing: int = 1,
    cpu_freq_range: tuple[float, float] = (1.0e9, 5.0e9),
    tx_power: float = 5.0,
    initial_reputation: float = 10.0,
) -> list[Satellite]:
    """Walker-delta snapshot: evenly spaced RAANs, evenly phased satellites per plane.

    CPU frequencies are drawn uniformly in `cpu_freq_range` from `seed`. Satellite ids run
    orbit-major: id = orbit * sats_per_orbit + phase.
    """
    if orbit_count < 1 or sats_per_orbit < 1:
        raise ConfigurationError("need at least one orbit and one satellite per orbit")
    lo, hi = cpu_freq_range
    if not 0 < lo <= hi:
        raise ConfigurationError(f"invalid CPU frequency range {cpu_freq_range}")
    if tx_power <= 0:
        raise ConfigurationError("tx_power must be positive")
    radius = EARTH_RADIUS_M + altitude_m
    inc = np.radians(inclination_deg)
    total = orbit_count * sats_per_orbit
    rng = np.random.default_rng(seed)
    freqs = rng.uniform(lo, hi, size=total)

    sats = []
    for o in range(orbit_count):
        raan = 2 * np.pi * o / orbit_count
        for j in range(sats_per_orbit):
            anomaly = 2 * np.pi * j / sats_per_orbit + 2 * np.pi * phasing * o / total
            sid = o * sats_per_orbit + j
            sats.append(Satellite(
                id=sid, orbit_index=o, phase_index=j,
                position=orbit_position(radius, raan, inc, anomaly),
                cpu_freq=float(freqs[sid]), tx_power=float(tx_power),
                reputation=float(initial_reputation),
            ))
    return sats
