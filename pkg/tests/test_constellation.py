from __future__ import annotations

import numpy as np
import pytest

from sbfl_leo.constellation.clustering import cluster_satellites
from sbfl_leo.constellation.geometry import EARTH_RADIUS_M, Role, Satellite, build_constellation
from sbfl_leo.constellation.roles import apply_reputation_delta, assign_roles, miner_count, with_roles
from sbfl_leo.constellation.snapshot import read_snapshot, to_snapshot, write_snapshot
from sbfl_leo.errors import ConfigurationError


def _sat(sid, pos, rep=10.0):
    return Satellite(sid, 0, sid, np.asarray(pos, dtype=float), 2e9, 5.0, reputation=rep)


def test_positions_lie_on_the_shell():
    sats = build_constellation(4, 6, altitude_m=550_000.0, seed=1)
    r = EARTH_RADIUS_M + 550_000.0
    for s in sats:
        assert np.linalg.norm(s.position) == pytest.approx(r, rel=1e-6)
    assert [s.id for s in sats] == list(range(24))
    assert all(1e9 <= s.cpu_freq <= 5e9 for s in sats)


def test_single_orbit_is_evenly_phased():
    sats = build_constellation(1, 4, seed=0)
    gaps = [np.linalg.norm(sats[i].position - sats[(i + 1) % 4].position) for i in range(4)]
    assert gaps == pytest.approx([gaps[0]] * 4)
    r2 = np.dot(sats[0].position, sats[0].position)
    assert np.dot(sats[0].position, sats[1].position) / r2 == pytest.approx(0.0, abs=1e-9)


def test_full_scale_positions_are_distinct():
    sats = build_constellation(20, 10, seed=0)
    pos = {tuple(np.round(s.position, 3)) for s in sats}
    assert len(pos) == 200


def test_constellation_is_seeded():
    a = build_constellation(3, 3, seed=5)
    b = build_constellation(3, 3, seed=5)
    assert [s.cpu_freq for s in a] == [s.cpu_freq for s in b]


def test_clustering_separates_distant_groups():
    left = [_sat(i, (-7e6 + i * 1e3, 0, 0)) for i in range(4)]
    right = [_sat(i + 4, (7e6 - i * 1e3, 0, 0)) for i in range(4)]
    groups = cluster_satellites(left + right, 2, seed=0)
    assert groups == [[0, 1, 2, 3], [4, 5, 6, 7]]


def test_clustering_is_deterministic_and_nonempty():
    sats = build_constellation(10, 5, seed=2)
    a = cluster_satellites(sats, 5, seed=3)
    b = cluster_satellites(sats, 5, seed=3)
    assert a == b
    assert len(a) == 5 and all(a)
    assert sorted(i for g in a for i in g) == list(range(50))


def test_clustering_needs_three_per_cluster():
    sats = build_constellation(1, 5, seed=0)
    with pytest.raises(ConfigurationError):
        cluster_satellites(sats, 2, seed=0)


def test_role_split_counts():
    members = [_sat(i, (i * 1e5, 7e6, 0)) for i in range(10)]
    c = assign_roles(members, 0.2)
    assert c.head == 0
    assert len(c.miners) == 2 and len(c.learners) == 7
    assert set(c.members) == set(range(10))
    assert set(c.learner_to_miner) == set(c.learners)
    assert set(c.learner_to_miner.values()) <= set(c.miners)


def test_miner_count_uses_ceiling():
    assert miner_count(10, 0.2) == 2
    assert miner_count(16, 0.2) == 3


def test_highest_reputation_becomes_head():
    members = [_sat(0, (0, 7e6, 0), 5.0), _sat(1, (1e5, 7e6, 0), 12.0), _sat(2, (2e5, 7e6, 0)), _sat(3, (3e5, 7e6, 0))]
    c = assign_roles(members, 0.3)
    assert c.head == 1
    assert c.miners == (2,)


def test_incumbent_head_is_kept():
    members = [_sat(i, (i * 1e5, 7e6, 0)) for i in range(5)]
    assert assign_roles(members, 0.3, incumbent=3).head == 3


def test_equidistant_learner_attaches_to_lower_miner():
    head = _sat(0, (0, 0, 7e6), 20.0)
    m1, m2 = _sat(1, (-1e5, 7e6, 0), 15.0), _sat(2, (1e5, 7e6, 0), 15.0)
    learner = _sat(3, (0, 7e6, 0), 1.0)
    c = assign_roles([learner, m2, head, m1], 0.6)
    assert c.miners == (1, 2)
    assert c.learner_to_miner == {3: 1}


def test_split_without_learners_is_rejected():
    members = [_sat(i, (i * 1e5, 7e6, 0)) for i in range(3)]
    with pytest.raises(ConfigurationError):
        assign_roles(members, 0.9)


def test_removed_satellites_are_not_staffed():
    members = [_sat(i, (i * 1e5, 7e6, 0)) for i in range(6)]
    members[1] = apply_reputation_delta(members[1], -50.0)
    assert members[1].reputation == 0.0
    c = assign_roles(members, 0.2)
    assert 1 not in c.members


def test_reputation_delta():
    s = _sat(0, (0, 7e6, 0), 5.0)
    assert apply_reputation_delta(s, -10).reputation == 0.0
    assert apply_reputation_delta(s, 1).reputation == 6.0


def test_with_roles_marks_every_satellite():
    members = [_sat(i, (i * 1e5, 7e6, 0)) for i in range(6)]
    c = assign_roles(members[:5], 0.3)
    table = with_roles({s.id: s for s in members}, [c])
    assert table[c.head].role is Role.HEAD
    assert all(table[m].role is Role.MINER for m in c.miners)
    assert table[5].role is Role.IDLE


def test_snapshot_round_trip(tmp_path):
    sats = build_constellation(2, 4, seed=0)
    groups = [[0, 1, 2, 3], [4, 5, 6, 7]]
    clusters = [assign_roles([sats[i] for i in g], 0.3, cluster_id=k) for k, g in enumerate(groups)]
    path = write_snapshot(tmp_path / "snap.json", to_snapshot(sats, clusters, groups))
    back_sats, back_clusters, back_groups = read_snapshot(path)
    assert back_groups == groups
    assert back_clusters == clusters
    assert [s.id for s in back_sats] == [s.id for s in sats]
    np.testing.assert_allclose(back_sats[3].position, sats[3].position)
