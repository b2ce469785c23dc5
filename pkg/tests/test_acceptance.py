"""Desk-scale runs. Minutes each; run with `pytest -m slow`.

MNIST is used when it can be loaded; otherwise the same scenarios run on synthetic blobs.
"""
from __future__ import annotations
import dataclasses
import math
from pathlib import Path

import numpy as np
import pytest

from sbfl_leo.config import Method, load_scenario, with_overrides
from sbfl_leo.dataio import load_dataset
from sbfl_leo.errors import DatasetError
from sbfl_leo.ledger.chain import LightClient, TxKind, prove_inclusion, verify_dump
from sbfl_leo.sim.driver import run_scenario
from sbfl_leo.sim.experiments import compare, sweep_sizes

pytestmark = pytest.mark.slow

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SIZES = [40, 80, 120, 160, 200]
METHODS = [Method.SBFL_LEO, Method.FEDAVG, Method.FEDAVG_WITH_M, Method.EFL, Method.SBFL_LEO_KMEANS]


def _desk(cfg):
    """`cfg` on MNIST when available, else on 6,000/1,500 synthetic samples of ten overlapping blobs."""
    try:
        return cfg, load_dataset(cfg.dataset, cfg.seed)
    except DatasetError:
        blobs = dataclasses.replace(cfg.dataset, source="synthetic", classes=10, dim=20, per_class=750, spread=4.0)
        cfg = dataclasses.replace(cfg, dataset=blobs)
        return cfg, load_dataset(cfg.dataset, cfg.seed)


@pytest.fixture(scope="module")
def desk():
    return _desk(load_scenario(CONFIGS / "scenario.yaml"))


@pytest.fixture(scope="module")
def comparisons(desk):
    """Sixty paired rounds of every method, for seeds 0, 1 and 2."""
    cfg, _ = desk
    cfgs = [dataclasses.replace(cfg, method=m) for m in METHODS]
    return {seed: compare(cfgs, seed=seed, rounds=60) for seed in (0, 1, 2)}


def _accuracy(result, rounds):
    return [r.accuracy for r in result.reports if r.round in rounds]


def test_protocol_outlasts_poisoned_fedavg(desk, comparisons):
    cfg, _ = desk
    _, results = comparisons[0]
    poisoned, sbfl, clean = results["FEDAVG_WITH_M"], results["SBFL_LEO"], results["FEDAVG"]
    first_window = range(5, 16)

    peak = max(_accuracy(poisoned, range(1, 5)))
    assert min(_accuracy(poisoned, first_window)) <= peak - 0.20

    assert abs(sbfl.reports[19].accuracy - clean.reports[19].accuracy) <= 0.03

    windows = cfg.attack.active_rounds
    assert min(_accuracy(sbfl, windows)) >= min(_accuracy(poisoned, windows)) + 0.20


def test_label_flippers_are_mostly_caught(desk, comparisons):
    cfg, _ = desk
    _, results = comparisons[0]
    active = [r for r in results["SBFL_LEO"].reports if r.round in cfg.attack.active_rounds]
    seen = sum(len(r.attackers) for r in active)
    caught = sum(len(set(r.attackers) & set(r.suspects)) for r in active)
    assert seen > 0
    assert caught >= seen / 2


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_rounds_to_target_ordering(comparisons, seed):
    df, results = comparisons[seed]
    rows = df.set_index("method")
    assert rows.loc["SBFL_LEO", "target"] == pytest.approx(0.9 * results["FEDAVG"].reports[-1].accuracy)

    def rounds(name):
        value = rows.loc[name, "rounds_to_target"]
        return math.inf if value is None or (isinstance(value, float) and math.isnan(value)) else value

    assert rounds("SBFL_LEO") < rounds("EFL") < rounds("SBFL_LEO_KMEANS")
    assert rounds("FEDAVG_WITH_M") == math.inf


def test_protocol_energy_stays_below_fedavg():
    cfg, data = _desk(load_scenario(CONFIGS / "energy.yaml"))
    if cfg.dataset.source == "synthetic":
        cfg = dataclasses.replace(cfg, training=dataclasses.replace(cfg.training, epochs=1))
    df = sweep_sizes(cfg, SIZES, rounds=1, data=data)
    assert list(df["satellites"]) == SIZES
    for column in ("energy", "fedavg_energy"):
        assert df[column].is_monotonic_increasing and df[column].is_unique, df[column].tolist()
    assert df["ratio"].between(0.85, 0.99).all(), df["ratio"].tolist()


def test_twenty_round_ledger(desk, tmp_path):
    scenario, data = desk
    res = run_scenario(with_overrides(scenario, rounds=20), tmp_path, data=data, stop_at_target=False)
    assert verify_dump(tmp_path / "chain") == []
    assert all(r.proofs_verified > 0 for r in res.reports)

    chains = res.state.chains
    light = LightClient(chains.algorithm)
    light.sync(chains.chains())
    rng = np.random.default_rng(0)
    side = [c for c in chains.side_chains.values()]
    for _ in range(100):
        chain = side[int(rng.integers(len(side)))]
        block = chain.blocks[int(rng.integers(len(chain)))]
        learner_txs = [t for t in block.transactions if t.kind is TxKind.LOCAL_MODEL]
        tx = learner_txs[int(rng.integers(len(learner_txs)))]
        height, proof = prove_inclusion(chain, tx)
        assert light.verify(chain.name, height, proof)

    blob = next((tmp_path / "chain" / "blocks").glob("side-*.bin"))
    raw = bytearray(blob.read_bytes())
    raw[int(rng.integers(len(raw)))] ^= 0x5A
    blob.write_bytes(bytes(raw))
    assert verify_dump(tmp_path / "chain") != []


def test_desk_runs_are_byte_identical(desk, tmp_path):
    scenario, data = desk
    cfg = with_overrides(scenario, rounds=3)
    run_scenario(cfg, tmp_path / "a", data=data)
    run_scenario(cfg, tmp_path / "b", data=data)
    for name in ("metrics.csv", "manifest.json", "snapshot.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
