"""Multi-run experiments: constellation-size and learning-rate sweeps, paired method comparisons."""
from __future__ import annotations
import dataclasses
import logging
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from ..config import Method, ScenarioConfig, with_overrides
from ..dataio import load_dataset
from ..errors import ConfigurationError
from ..fl.data import LabeledDataset
from ..reporting.metrics import rounds_to_target, seconds_to_target
from .driver import ScenarioResult, run_scenario

log = logging.getLogger(__name__)

Data = tuple[LabeledDataset, LabeledDataset]
TARGET_FRACTION = 0.9


def _resized(cfg: ScenarioConfig, satellites: int) -> ScenarioConfig:
    per_orbit = cfg.constellation.sats_per_orbit
    if satellites % per_orbit:
        raise ConfigurationError(f"{satellites} satellites do not fill orbits of {per_orbit}")
    return dataclasses.replace(
        cfg, constellation=dataclasses.replace(cfg.constellation, orbits=satellites // per_orbit),
    )


def _mean_energy(result: ScenarioResult) -> float:
    return result.manifest["energy"]["mean_round_energy"]


def sweep_sizes(
    cfg: ScenarioConfig,
    sizes: Sequence[int],
    rounds: int = 1,
    data: Data | None = None,
    per_satellite: int | None = None,
) -> pd.DataFrame:
    """Mean E^r of the configured method and of FEDAVG at every constellation size.

    Every size draws `per_satellite` training samples per satellite from the front of the
    training set (default: what the largest size can get), so the per-satellite workload
    stays fixed while the constellation grows.
    """
    train, test = data or load_dataset(cfg.dataset, cfg.seed)
    per_satellite = per_satellite or train.size // max(sizes)
    if per_satellite < 1 or per_satellite * max(sizes) > train.size:
        raise ConfigurationError(
            f"{train.size} training samples cannot give {max(sizes)} satellites {per_satellite} each"
        )
    rows = []
    for n in sizes:
        sized = with_overrides(_resized(cfg, n), rounds=rounds)
        share = (train.subset(np.arange(n * per_satellite)), test)
        mine = run_scenario(sized, data=share, stop_at_target=False)
        ref = run_scenario(dataclasses.replace(sized, method=Method.FEDAVG), data=share, stop_at_target=False)
        e, e_ref = _mean_energy(mine), _mean_energy(ref)
        rows.append({
            "satellites": n, "method": cfg.method.value, "energy": e,
            "fedavg_energy": e_ref, "ratio": e / e_ref if e_ref > 0 else float("nan"),
        })
        log.info("sweep %d satellites: %.3f J vs FedAvg %.3f J", n, e, e_ref)
    return pd.DataFrame(rows)


def sweep_learning_rates(cfg: ScenarioConfig, rates: Sequence[float], data: Data | None = None) -> pd.DataFrame:
    data = data or load_dataset(cfg.dataset, cfg.seed)
    rows = []
    for eta in rates:
        run = dataclasses.replace(cfg, training=dataclasses.replace(cfg.training, learning_rate=eta))
        res = run_scenario(run, data=data, stop_at_target=False)
        for rep in res.reports:
            rows.append({"learning_rate": eta, "round": rep.round, "accuracy": rep.accuracy, "loss": rep.loss})
    return pd.DataFrame(rows)


def attack_rounds(cfgs: Iterable[ScenarioConfig]) -> frozenset[int]:
    """Attack windows of the first config that carries an attack."""
    for c in cfgs:
        if c.attack is not None:
            return c.attack.active_rounds
    return frozenset()


def reference_target(results: dict[str, ScenarioResult], fraction: float = TARGET_FRACTION) -> float | None:
    """`fraction` of the attack-free FEDAVG run's last-round accuracy, if one was run."""
    ref = results.get(Method.FEDAVG.value)
    if ref is None or not ref.reports:
        return None
    return fraction * ref.reports[-1].accuracy


def compare(
    cfgs: Sequence[ScenarioConfig],
    seed: int | None = None,
    rounds: int | None = None,
    target_fraction: float = TARGET_FRACTION,
) -> tuple[pd.DataFrame, dict[str, ScenarioResult]]:
    """Paired runs under one seed; datasets are loaded once per distinct dataset section.

    A config without `target_accuracy` is measured against `target_fraction` of FEDAVG's
    final accuracy when FEDAVG is among the runs.
    """
    cfgs = [with_overrides(c, seed=seed, rounds=rounds) for c in cfgs]
    windows = attack_rounds(cfgs)
    cache: dict[tuple, Data] = {}
    runs, results = [], {}
    for c in cfgs:
        key = (c.dataset, c.seed)
        if key not in cache:
            cache[key] = load_dataset(c.dataset, c.seed)
        res = run_scenario(c, data=cache[key], stop_at_target=False)
        name = c.method.value
        if name in results:
            name = f"{name}#{len(results)}"
        results[name] = res
        runs.append((name, c, res))

    fallback = reference_target(results, target_fraction)
    rows = []
    for name, c, res in runs:
        target = c.target_accuracy if c.target_accuracy is not None else fallback
        during = [r.accuracy for r in res.reports if r.round in windows]
        rows.append({
            "method": name,
            "final_accuracy": res.reports[-1].accuracy if res.reports else None,
            "min_attack_accuracy": min(during) if during else None,
            "target": target,
            "rounds_to_target": rounds_to_target(res.reports, target),
            "seconds_to_target": seconds_to_target(res.reports, target),
            "mean_round_energy": _mean_energy(res),
        })
    return pd.DataFrame(rows), results
