from __future__ import annotations
import dataclasses
import json

import numpy as np
import pytest

from sbfl_leo.attacks.adversary import AttackKind
from sbfl_leo.config import Method, with_overrides
from sbfl_leo.constellation.geometry import Role
from sbfl_leo.dataio import load_dataset
from sbfl_leo.errors import ConfigurationError
from sbfl_leo.fl.model import evaluate
from sbfl_leo.ledger.chain import verify_dump
from sbfl_leo.sim.driver import run_round, run_scenario, setup
from sbfl_leo.sim.experiments import compare, sweep_learning_rates, sweep_sizes
from sbfl_leo.sim.methods import strategy_for


@pytest.fixture
def data(toy_cfg):
    return load_dataset(toy_cfg.dataset, toy_cfg.seed)


def _honest(cfg, method=Method.SBFL_LEO, **kw):
    return with_overrides(dataclasses.replace(cfg, method=method, attack=None), **kw)


def _section(cfg, name, **kw):
    return dataclasses.replace(cfg, **{name: dataclasses.replace(getattr(cfg, name), **kw)})


def _sign_flip(cfg, **kw):
    attack = dataclasses.replace(cfg.attack, kind=AttackKind.SIGN_FLIP, malicious_fraction=0.3)
    return with_overrides(dataclasses.replace(cfg, attack=attack), **kw)


def test_runs_are_reproducible(toy_cfg, data, tmp_path):
    cfg = with_overrides(toy_cfg, rounds=2)
    a = run_scenario(cfg, tmp_path / "a", data=data)
    b = run_scenario(cfg, tmp_path / "b", data=data)
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()
    assert (tmp_path / "a" / "chain" / "index.json").read_text() == (tmp_path / "b" / "chain" / "index.json").read_text()
    np.testing.assert_array_equal(a.model, b.model)
    np.testing.assert_array_equal(np.load(tmp_path / "a" / "model.npy"), a.model)


def test_zero_rounds_returns_the_initial_model(toy_cfg, data, tmp_path):
    cfg = with_overrides(toy_cfg, rounds=0)
    res = run_scenario(cfg, tmp_path, data=data)
    assert res.reports == []
    np.testing.assert_array_equal(res.model, setup(cfg, data).w)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["rounds_run"] == 0 and manifest["final_accuracy"] is None
    assert not (tmp_path / "metrics.csv").exists()
    assert verify_dump(tmp_path / "chain") == []


def test_honest_run_learns(toy_cfg, data):
    cfg = _honest(toy_cfg, rounds=3)
    state = setup(cfg, data)
    acc0, _ = evaluate(state.layout, state.w, state.test)
    res = run_scenario(cfg, data=data)
    assert len(res.reports) == 3
    assert [r.round for r in res.reports] == [1, 2, 3]
    assert all(r.attackers == () for r in res.reports)
    assert res.reports[-1].accuracy > acc0
    assert res.manifest["malicious"] == []


def test_run_round_advances_state(toy_cfg, data):
    state = setup(_honest(toy_cfg), data)
    w0 = state.w.copy()
    state, report = run_round(state)
    assert state.round == 1 and report.round == 1
    assert report.round_failed or not np.array_equal(state.w, w0)
    assert report.energy.total > 0
    assert report.proofs_verified > 0
    assert set(report.tallies) == {str(c) for c in report.defense}


def test_sign_flippers_become_suspects(toy_cfg, data, tmp_path):
    # one epoch leaves nothing to fine-tune, so a flipped model scores as it is
    cfg = _section(_sign_flip(toy_cfg, rounds=3), "training", epochs=1)
    res = run_scenario(cfg, tmp_path, data=data)
    first, *active = res.reports
    assert first.attackers == ()
    assert any(r.attackers for r in active)
    for r in active:
        assert set(r.attackers) <= set(r.suspects)
        assert set(r.attackers) <= set(res.manifest["malicious"])
    assert verify_dump(tmp_path / "chain") == []


def test_fedavg_reference_skips_protocol_costs(toy_cfg, data):
    sbfl = run_scenario(_honest(toy_cfg, rounds=1), data=data).reports[0]
    fedavg = run_scenario(_honest(toy_cfg, Method.FEDAVG, rounds=1), data=data).reports[0]
    assert fedavg.energy.evaluation == 0 and fedavg.energy.head_verify == 0
    assert fedavg.suspects == () and fedavg.proofs_verified == 0
    assert sbfl.energy.evaluation > 0
    assert sbfl.energy.total < fedavg.energy.total


def test_fedavg_ignores_configured_attack(toy_cfg, data):
    res = run_scenario(with_overrides(dataclasses.replace(toy_cfg, method=Method.FEDAVG), rounds=3), data=data)
    assert all(r.attackers == () for r in res.reports)
    assert res.state.chains is None


def test_fedavg_with_malicious_learners(toy_cfg, data):
    cfg = _sign_flip(dataclasses.replace(toy_cfg, method=Method.FEDAVG_WITH_M), rounds=2)
    res = run_scenario(cfg, data=data)
    assert res.reports[1].attackers
    assert all(r.suspects == () for r in res.reports)


@pytest.mark.parametrize("method", [Method.EFL, Method.SBFL_LEO_KMEANS])
def test_alternative_defenses_run(toy_cfg, data, method):
    res = run_scenario(with_overrides(dataclasses.replace(toy_cfg, method=method), rounds=2), data=data)
    assert [r.method for r in res.reports] == [method.value] * 2
    assert all(0 <= r.accuracy <= 1 for r in res.reports)


def test_target_accuracy_stops_early(toy_cfg, data):
    cfg = dataclasses.replace(_honest(toy_cfg, rounds=3), target_accuracy=0.01)
    res = run_scenario(cfg, data=data)
    assert len(res.reports) == 1
    assert res.manifest["rounds_to_target"] == 1


def test_size_sweep(toy_cfg, data):
    df = sweep_sizes(toy_cfg, [15, 20], rounds=1, data=data)
    assert list(df["satellites"]) == [15, 20]
    assert (df["ratio"] < 1).all()
    with pytest.raises(ConfigurationError):
        sweep_sizes(toy_cfg, [17], data=data)


def test_learning_rate_sweep(toy_cfg, data):
    df = sweep_learning_rates(with_overrides(toy_cfg, rounds=2), [0.1, 0.01], data=data)
    assert len(df) == 4
    assert sorted(df["learning_rate"].unique()) == [0.01, 0.1]


def test_compare_pairs_methods(toy_cfg):
    cfgs = [toy_cfg, dataclasses.replace(toy_cfg, method=Method.FEDAVG), toy_cfg]
    df, results = compare(cfgs, seed=3, rounds=2)
    assert list(df["method"]) == ["SBFL_LEO", "FEDAVG", "SBFL_LEO#2"]
    assert set(results) == set(df["method"])
    assert all(res.manifest["seed"] == 3 for res in results.values())
    sbfl = df.set_index("method").loc["SBFL_LEO"]
    assert sbfl["min_attack_accuracy"] == pytest.approx(results["SBFL_LEO"].reports[1].accuracy)


def test_efl_filter_waits_for_warmup(toy_cfg):
    cfg = dataclasses.replace(toy_cfg, method=Method.EFL)
    profile = {1: 0.05, 2: 0.9, 3: -0.2}
    assert strategy_for(cfg, 1)(profile).groups == ((1, 2, 3),)
    late = strategy_for(cfg, 2)(profile)
    assert late.groups == ((2,),)
    assert late.noise == frozenset({1, 3})
    assert strategy_for(dataclasses.replace(cfg, method=Method.FEDAVG), 5) is None


@pytest.mark.parametrize("kind,role", [(AttackKind.DISHONEST_MINER_VOTE, Role.MINER), (AttackKind.LABEL_FLIP, Role.LEARNER)])
def test_malicious_satellites_come_from_the_targeted_role(toy_cfg, data, kind, role):
    attack = dataclasses.replace(toy_cfg.attack, kind=kind, malicious_fraction=0.3)
    state = setup(dataclasses.replace(toy_cfg, attack=attack), data)
    holders = {sid for sid, s in state.satellites.items() if s.role is role}
    assert state.malicious <= holders
    assert len(state.malicious) == int(np.floor(0.3 * len(holders) + 1e-9))


def _comparable(report):
    out = report.to_dict()
    out.pop("seconds")
    return out


def test_attack_outside_its_rounds_changes_nothing(toy_cfg, data):
    idle = dataclasses.replace(toy_cfg.attack, kind=AttackKind.SIGN_FLIP, malicious_fraction=0.3, active_rounds=frozenset({99}))
    scheduled = run_scenario(with_overrides(dataclasses.replace(toy_cfg, attack=idle), rounds=2), data=data)
    clean = run_scenario(_honest(toy_cfg, rounds=2), data=data)
    assert scheduled.manifest["malicious"]
    assert [_comparable(r) for r in scheduled.reports] == [_comparable(r) for r in clean.reports]
    np.testing.assert_array_equal(scheduled.model, clean.model)


def test_honest_run_improves_every_round_without_suspects(toy_cfg):
    cfg = _honest(toy_cfg, rounds=3)
    cfg = _section(cfg, "dataset", labels_per_orbit=4, per_class=600)
    cfg = _section(cfg, "model", init_scale=1.0)
    cfg = _section(cfg, "training", learning_rate=0.01, epochs=5, batch_size=16)
    cfg = _section(cfg, "protocol", sigma=0.75)
    state = setup(cfg, load_dataset(cfg.dataset, cfg.seed))
    accuracy = [evaluate(state.layout, state.w, state.test)[0]]
    reputation = {sid: s.reputation for sid, s in state.satellites.items()}
    for _ in range(cfg.rounds):
        state, report = run_round(state)
        assert report.suspects == ()
        assert not report.round_failed
        accuracy.append(report.accuracy)
        now = {sid: s.reputation for sid, s in state.satellites.items()}
        assert all(now[sid] >= reputation[sid] for sid in reputation)
        reputation = now
    assert all(a < b for a, b in zip(accuracy, accuracy[1:])), accuracy


def test_dbscan_waits_for_warmup(toy_cfg):
    profile = {1: 0.9, 2: 0.91, 3: 0.1}
    assert strategy_for(toy_cfg, 1)(profile).groups == ((1, 2, 3),)
    late = strategy_for(toy_cfg, 2)(profile)
    assert late.groups == ((1, 2),)
    assert late.noise == frozenset({3})
    assert strategy_for(_section(toy_cfg, "defense", warmup=0), 1)(profile).groups == ((1, 2),)


def test_single_cluster_still_pays_for_head_verification(toy_cfg, data):
    one = run_scenario(_section(_honest(toy_cfg, rounds=1), "protocol", clusters=1), data=data).reports[0]
    assert one.energy.head_verify > 0
    assert one.energy.total == pytest.approx(one.total_single_verify)
    assert one.total_per_peer_verify < one.total_single_verify
    two = run_scenario(_honest(toy_cfg, rounds=1), data=data).reports[0]
    assert two.total_per_peer_verify == pytest.approx(two.total_single_verify)


def test_protocol_energy_stays_below_fedavg_as_the_constellation_grows(toy_cfg):
    cfg = _section(toy_cfg, "constellation", cpu_freq_min=5.0e9, cpu_freq_max=5.0e9)
    cfg = _section(cfg, "dataset", classes=10, dim=20, per_class=250, labels_per_orbit=10)
    cfg = _section(cfg, "model", hidden=64)
    cfg = _section(cfg, "training", epochs=2)
    cfg = _section(cfg, "protocol", clusters=5, miner_fraction=0.2)
    cfg = _section(cfg, "ledger", enabled=False)
    cfg = _honest(cfg)
    data = load_dataset(cfg.dataset, cfg.seed)
    df = sweep_sizes(cfg, [40, 80, 120, 160, 200], rounds=1, data=data, per_satellite=10)
    assert df["energy"].is_monotonic_increasing and df["energy"].is_unique
    assert df["fedavg_energy"].is_monotonic_increasing and df["fedavg_energy"].is_unique
    assert df["ratio"].between(0.85, 0.99).all(), df["ratio"].tolist()
