"""Scenario configuration: YAML files with an optional `base:` chain, read into frozen dataclasses."""
from __future__ import annotations
import dataclasses
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping

import yaml

from .attacks.adversary import AttackKind, AttackSpec, parse_rounds
from .channel.physics import PhysicsConstants
from .constellation.geometry import Role
from .errors import ConfigurationError
from .ledger.codec import ALGORITHMS

MNIST_URL = "https://storage.googleapis.com/cvdf-datasets/mnist/"


class Method(str, enum.Enum):
    SBFL_LEO = "SBFL_LEO"
    SBFL_LEO_KMEANS = "SBFL_LEO_KMEANS"
    EFL = "EFL"
    FEDAVG = "FEDAVG"
    FEDAVG_WITH_M = "FEDAVG_WITH_M"

    @property
    def uses_protocol(self) -> bool:
        """Roles, defense, voting and the ledger; FedAvg variants skip all of them."""
        return self not in (Method.FEDAVG, Method.FEDAVG_WITH_M)


@dataclass(frozen=True)
class ConstellationConfig:
    orbits: int = 10
    sats_per_orbit: int = 5
    altitude_m: float = 550_000.0
    inclination_deg: float = 53.0
    phasing: int = 1
    cpu_freq_min: float = 1.0e9
    cpu_freq_max: float = 5.0e9
    tx_power: float = 5.0

    @property
    def satellites(self) -> int:
        return self.orbits * self.sats_per_orbit


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 0.1
    energy_penalty: float = 0.0


@dataclass(frozen=True)
class ModelConfig:
    hidden: int = 0
    init_scale: float = 0.01


@dataclass(frozen=True)
class ProtocolConfig:
    clusters: int = 5
    miner_fraction: float = 0.2
    sigma: float = 0.05
    holdout_fraction: float = 0.2
    initial_reputation: float = 10.0
    removal_threshold: float = 0.0
    reward: float = 1.0
    penalty: float = 3.0
    head_verify_per_peer: bool = False
    global_loss: str = "weighted"  # weighted | pooled


@dataclass(frozen=True)
class DefenseConfig:
    eps: float = 0.05
    min_pts: int = 2
    max_groups: int = 2
    theta_min: float = 0.5
    warmup: int = 1         # rounds in which every model forms one group
    score_margin: float = 0.05
    kmeans_k: int = 2


@dataclass(frozen=True)
class DatasetConfig:
    source: str = "mnist"  # mnist | synthetic
    path: str = "data/raw"
    subset: int | None = 7500
    test_fraction: float = 0.2
    download: bool = True
    base_url: str = MNIST_URL
    labels_per_orbit: int = 2
    classes: int = 10
    dim: int = 20
    per_class: int = 300
    spread: float = 1.0


@dataclass(frozen=True)
class LedgerConfig:
    enabled: bool = True
    digest: str = "sha256"


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    method: Method = Method.SBFL_LEO
    rounds: int = 60
    target_accuracy: float | None = None
    constellation: ConstellationConfig = field(default_factory=ConstellationConfig)
    physics: PhysicsConstants = field(default_factory=PhysicsConstants)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    defense: DefenseConfig = field(default_factory=DefenseConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    attack: AttackSpec | None = None
    ledger: LedgerConfig = field(default_factory=LedgerConfig)

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        validate(self)

    @property
    def effective_attack(self) -> AttackSpec | None:
        """FEDAVG is the attack-free reference, whatever the file says."""
        return None if self.method is Method.FEDAVG else self.attack

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "seed": self.seed, "method": self.method.value, "rounds": self.rounds,
            "target_accuracy": self.target_accuracy,
        }
        for name in SECTIONS:
            value = getattr(self, name)
            out[name] = None if value is None else _section_dict(value)
        return out

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ScenarioConfig":
        raw = dict(raw or {})
        raw.pop("base", None)
        unknown = set(raw) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigurationError(f"unknown top-level keys: {sorted(unknown)}")
        kwargs: Dict[str, Any] = {k: raw[k] for k in ("seed", "rounds", "target_accuracy") if k in raw}
        if "method" in raw:
            try:
                kwargs["method"] = Method(str(raw["method"]).upper())
            except ValueError:
                raise ConfigurationError(f"unknown method {raw['method']!r}") from None
        for name, section_cls in SECTIONS.items():
            if name not in raw:
                continue
            if name == "attack":
                kwargs[name] = _attack_from(raw[name], int(raw.get("seed", 0)))
            else:
                kwargs[name] = _section_from(section_cls, name, raw[name])
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigurationError):
                raise
            raise ConfigurationError(str(e)) from None


SECTIONS = {
    "constellation": ConstellationConfig,
    "physics": PhysicsConstants,
    "training": TrainingConfig,
    "model": ModelConfig,
    "protocol": ProtocolConfig,
    "defense": DefenseConfig,
    "dataset": DatasetConfig,
    "attack": AttackSpec,
    "ledger": LedgerConfig,
}


def _section_dict(value) -> Dict[str, Any]:
    out = {}
    for f in dataclasses.fields(value):
        v = getattr(value, f.name)
        if isinstance(v, enum.Enum):
            v = v.value
        elif isinstance(v, frozenset):
            v = sorted(v)
        out[f.name] = v
    return out


def _section_from(section_cls, name: str, raw) -> Any:
    if raw is None:
        return section_cls()
    if not isinstance(raw, Mapping):
        raise ConfigurationError(f"section '{name}' must be a mapping")
    allowed = {f.name for f in dataclasses.fields(section_cls)}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigurationError(f"unknown keys in '{name}': {sorted(unknown)}")
    try:
        return section_cls(**raw)
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigurationError):
            raise
        raise ConfigurationError(f"{name}: {e}") from None


def _attack_from(raw, default_seed: int) -> AttackSpec | None:
    if raw is None or raw is False:
        return None
    raw = dict(raw)
    if "kind" in raw:
        try:
            raw["kind"] = AttackKind(str(raw["kind"]).lower())
        except ValueError:
            raise ConfigurationError(f"unknown attack kind {raw['kind']!r}") from None
    if "active_rounds" in raw:
        raw["active_rounds"] = parse_rounds(raw["active_rounds"])
    raw.setdefault("seed", default_seed)
    return _section_from(AttackSpec, "attack", raw)


def validate(cfg: ScenarioConfig) -> None:
    c, t, p, d, ds = cfg.constellation, cfg.training, cfg.protocol, cfg.defense, cfg.dataset
    checks = [
        (c.orbits >= 1 and c.sats_per_orbit >= 1, "constellation needs orbits and satellites"),
        (c.altitude_m > 0, "constellation.altitude_m must be positive"),
        (0 < c.cpu_freq_min <= c.cpu_freq_max, "constellation CPU frequency range is invalid"),
        (c.tx_power > 0, "constellation.tx_power must be positive"),
        (t.epochs >= 1 and t.batch_size >= 1, "training.epochs and batch_size must be >= 1"),
        (t.learning_rate > 0, "training.learning_rate must be positive"),
        (t.energy_penalty >= 0, "training.energy_penalty must be >= 0"),
        (cfg.model.hidden >= 0 and cfg.model.init_scale > 0, "model section is invalid"),
        (p.clusters >= 2, "protocol.clusters must be >= 2"),
        (c.satellites >= 3 * p.clusters, "too few satellites for 3 per cluster"),
        (0 < p.miner_fraction < 1, "protocol.miner_fraction must lie in (0, 1)"),
        (p.sigma > 0, "protocol.sigma must be positive"),
        (0 <= p.holdout_fraction < 1, "protocol.holdout_fraction must lie in [0, 1)"),
        (p.initial_reputation > p.removal_threshold, "initial reputation must exceed the removal threshold"),
        (p.reward >= 0 and p.penalty >= 0, "reward and penalty must be >= 0"),
        (p.global_loss in ("weighted", "pooled"), "protocol.global_loss must be weighted or pooled"),
        (d.eps > 0 and d.min_pts >= 1, "defense needs eps > 0 and min_pts >= 1"),
        (d.max_groups >= 1 and d.kmeans_k >= 2, "defense group counts are invalid"),
        (-1 <= d.theta_min <= 1, "defense.theta_min must lie in [-1, 1]"),
        (d.warmup >= 0, "defense.warmup must be >= 0"),
        (0 <= d.score_margin <= 1, "defense.score_margin must lie in [0, 1]"),
        (ds.source in ("mnist", "synthetic"), "dataset.source must be mnist or synthetic"),
        (0 < ds.test_fraction < 1, "dataset.test_fraction must lie in (0, 1)"),
        (ds.subset is None or ds.subset > 0, "dataset.subset must be positive"),
        (ds.labels_per_orbit >= 1, "dataset.labels_per_orbit must be >= 1"),
        (ds.classes >= 2 and ds.dim >= 1 and ds.per_class >= 1, "synthetic dataset shape is invalid"),
        (cfg.ledger.digest in ALGORITHMS, f"ledger.digest must be one of {ALGORITHMS}"),
        (cfg.rounds >= 0, "rounds must be >= 0"),
        (cfg.target_accuracy is None or 0 < cfg.target_accuracy <= 1, "target_accuracy must lie in (0, 1]"),
        (cfg.method is not Method.FEDAVG_WITH_M or cfg.attack is not None, "FEDAVG_WITH_M needs an attack section"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigurationError(msg)
    if cfg.method is Method.FEDAVG_WITH_M and cfg.attack.kind.target_role is not Role.LEARNER:
        raise ConfigurationError(f"{cfg.attack.kind.value} needs miners or heads, {cfg.method.value} has none")


# ---------- loading ----------

def load_yaml(path: str | Path) -> Dict[str, Any]:
    p = Path(path)
    if not p.exists():
        raise ConfigurationError(f"config file not found: {p.resolve()}")
    with open(p, "r") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigurationError(f"invalid YAML in {p}: {e}") from None
    if not data:
        raise ConfigurationError(f"config file is empty: {p.resolve()}")
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file must hold a mapping: {p}")
    return data


def deep_merge(base: Mapping[str, Any], over: Mapping[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_yaml(path: str | Path, _seen: tuple[Path, ...] = ()) -> Dict[str, Any]:
    """The file merged over its `base:` chain (paths relative to the including file)."""
    p = Path(path).resolve()
    if p in _seen:
        raise ConfigurationError(f"config base cycle through {p}")
    raw = load_yaml(p)
    base = raw.pop("base", None)
    if base is None:
        return raw
    return deep_merge(resolve_yaml(p.parent / base, (*_seen, p)), raw)


def load_scenario(path: str | Path, **overrides: Any) -> ScenarioConfig:
    """Typed scenario from `path`; non-None keyword overrides replace top-level values."""
    cfg = ScenarioConfig.from_dict(resolve_yaml(path))
    return with_overrides(cfg, **overrides)


def with_overrides(cfg: ScenarioConfig, **overrides: Any) -> ScenarioConfig:
    changes = {k: v for k, v in overrides.items() if v is not None}
    if not changes:
        return cfg
    if "seed" in changes and cfg.attack is not None:
        changes["attack"] = dataclasses.replace(cfg.attack, seed=changes["seed"])
    return dataclasses.replace(cfg, **changes)
