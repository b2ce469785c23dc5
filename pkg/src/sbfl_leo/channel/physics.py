"""Link budget and per-stage energy terms."""
from __future__ import annotations
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class PhysicsConstants:
    c: float = 3.0e8                 # m/s
    carrier_hz: float = 2.0e10
    bandwidth_hz: float = 2.0e7
    noise_psd: float = 4.0e-21       # W/Hz
    gain_tx: float = 100.0           # linear
    gain_rx: float = 100.0
    atmospheric_loss: float = 1.0    # L_a, (0, 1]
    epsilon0: float = 1.0e-28
    cycles_per_sample: float = 1.0e5
    snr_mode: str = "fixed"          # fixed | geometric
    fixed_snr: float = 1.0e3
    snr_includes_power: bool = False
    bits_per_param: int = 64
    dc_tx_power: float = 5.0         # W, ground station for the round-0 SGL broadcast

    def __post_init__(self):
        for name in ("c", "carrier_hz", "bandwidth_hz", "noise_psd", "gain_tx", "gain_rx",
                     "epsilon0", "cycles_per_sample", "fixed_snr", "dc_tx_power"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"physics.{name} must be positive")
        if not 0 < self.atmospheric_loss <= 1:
            raise ConfigurationError("physics.atmospheric_loss must lie in (0, 1]")
        if self.snr_mode not in ("fixed", "geometric"):
            raise ConfigurationError(f"unknown snr_mode {self.snr_mode!r}")
        if self.bits_per_param < 1:
            raise ConfigurationError("physics.bits_per_param must be >= 1")


def path_loss(d: float, consts: PhysicsConstants) -> float:
    """Free-space factor (c / (4π d f_c))²."""
    if not d > 0:
        raise DomainError(f"link distance must be positive, got {d}")
    return (consts.c / (4.0 * np.pi * d * consts.carrier_hz)) ** 2


def _distance(u, v) -> float:
    return float(np.linalg.norm(np.asarray(u, dtype=np.float64) - np.asarray(v, dtype=np.float64)))


def snr_isl(u, v, consts: PhysicsConstants) -> float:
    if consts.snr_mode == "fixed":
        return consts.fixed_snr
    return consts.gain_tx * consts.gain_rx * path_loss(_distance(u, v), consts) / consts.noise_psd


def snr_sgl(dc, v, consts: PhysicsConstants) -> float:
    if consts.snr_mode == "fixed":
        return consts.fixed_snr * consts.atmospheric_loss
    loss = path_loss(_distance(dc, v), consts)
    return consts.gain_tx * consts.gain_rx * loss * consts.atmospheric_loss / consts.noise_psd


def rate(snr: float, power: float, consts: PhysicsConstants) -> float:
    """Achievable rate B·log2(1 + γ·P) in bit/s (γ alone when it already folds in P)."""
    if not snr > 0 or not power > 0:
        raise DomainError("rate needs positive SNR and power")
    effective = snr if consts.snr_includes_power else snr * power
    return consts.bandwidth_hz * float(np.log2(1.0 + effective))


def isl_rate(u, v, power: float, consts: PhysicsConstants) -> float:
    return rate(snr_isl(u, v, consts), power, consts)


def tx_energy(power: float, bits: float, rate_bps: float) -> float:
    """Energy of one hop: P·|w| / R."""
    if not rate_bps > 0:
        raise DomainError(f"rate must be positive, got {rate_bps}")
    return power * bits / rate_bps


def train_energy(cpu_freq: float, epochs: int, samples: int, consts: PhysicsConstants) -> tuple[float, float]:
    """(T_cmp seconds, E_cmp joules) for τ epochs over |D| samples at frequency f."""
    if not cpu_freq > 0:
        raise DomainError("cpu frequency must be positive")
    seconds = epochs * consts.cycles_per_sample * samples / cpu_freq
    return seconds, consts.epsilon0 * cpu_freq ** 3 * seconds


def eval_energy(cpu_freq: float, epochs: int, samples: int, consts: PhysicsConstants) -> float:
    """Miner/head scoring: half the training energy of the same workload."""
    if not cpu_freq > 0:
        raise DomainError("cpu frequency must be positive")
    return epochs * consts.epsilon0 * cpu_freq ** 2 * consts.cycles_per_sample * samples / 2.0


def model_bits(dim: int, consts: PhysicsConstants) -> int:
    return int(dim) * consts.bits_per_param
