from __future__ import annotations

import numpy as np
import pytest

from sbfl_leo.errors import ConfigurationError, DomainError, PartitionError, TrainingError
from sbfl_leo.fl.data import LabeledDataset, TrainConfig
from sbfl_leo.fl.model import ModelLayout, cross_entropy, evaluate, local_loss, loss_and_grad, predict
from sbfl_leo.fl.partition import orbit_labels, partition_non_iid
from sbfl_leo.fl.training import train_local


def _numeric_grad(layout, w, x, y, h=1e-6):
    g = np.zeros_like(w)
    for i in range(len(w)):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (cross_entropy(layout, w + e, x, y) - cross_entropy(layout, w - e, x, y)) / (2 * h)
    return g


@pytest.mark.parametrize("hidden", [0, 3])
def test_gradient_matches_finite_differences(hidden):
    rng = np.random.default_rng(0)
    for _ in range(25):
        layout = ModelLayout(feature_dim=3, class_count=4, hidden=hidden)
        w = rng.normal(0, 0.5, layout.dim)
        x = rng.normal(size=(5, 3))
        y = rng.integers(0, 4, size=5)
        loss, g = loss_and_grad(layout, w, x, y)
        assert loss == pytest.approx(cross_entropy(layout, w, x, y))
        np.testing.assert_allclose(g, _numeric_grad(layout, w, x, y), rtol=1e-4, atol=1e-7)


def test_predict_is_a_distribution(layout, rng):
    w = layout.initial(rng, 1.0)
    p = predict(layout, w, rng.normal(size=4))
    assert p.shape == (3,)
    assert p.sum() == pytest.approx(1.0)
    assert np.all(p >= 0)


def test_predict_rejects_wrong_feature_dim(layout):
    with pytest.raises(ConfigurationError):
        predict(layout, layout.zeros(), np.ones(5))


def test_layout_dims():
    assert ModelLayout(784, 10).dim == 7850
    assert ModelLayout(4, 3, hidden=2).dim == 4 * 2 + 2 + 2 * 3 + 3


def test_training_improves_accuracy(blobs, layout, train_cfg):
    train, test = blobs
    w0 = layout.zeros()
    acc0, loss0 = evaluate(layout, w0, test)
    w = train_local(layout, w0, train, train_cfg)
    acc, loss = evaluate(layout, w, test)
    assert acc > 0.9
    assert acc > acc0
    assert loss < loss0


def test_training_is_deterministic_and_copies_start(blobs, layout, train_cfg):
    train, _ = blobs
    w0 = layout.zeros()
    a = train_local(layout, w0, train, train_cfg)
    b = train_local(layout, w0, train, train_cfg)
    assert np.array_equal(a, b)
    assert not np.any(w0)


def test_zero_epochs_returns_start(blobs, layout):
    w0 = np.arange(layout.dim, dtype=float)
    w = train_local(layout, w0, blobs[0], TrainConfig(epochs=0))
    assert np.array_equal(w, w0)


def test_empty_dataset_is_a_domain_error(layout, train_cfg):
    empty = LabeledDataset(np.zeros((0, 4)), np.zeros(0, dtype=int), 3)
    with pytest.raises(DomainError):
        train_local(layout, layout.zeros(), empty, train_cfg)
    with pytest.raises(DomainError):
        evaluate(layout, layout.zeros(), empty)


def test_non_finite_gradient_reports_batch(layout, train_cfg):
    x = np.ones((4, 4))
    x[2, 0] = np.inf
    data = LabeledDataset(x, np.array([0, 1, 2, 0]), 3)
    with pytest.raises(TrainingError) as err:
        train_local(layout, layout.zeros(), data, TrainConfig(epochs=1, batch_size=4))
    assert err.value.batch_index == 0


def test_local_loss_adds_energy_penalty(blobs, layout):
    train, _ = blobs
    w = layout.zeros()
    base = local_loss(layout, w, train, e_cmp=2.0, penalty=0.0)
    assert base == pytest.approx(np.log(3))
    assert local_loss(layout, w, train, e_cmp=2.0, penalty=0.5) == pytest.approx(base + 1.0)


def test_split_tail_keeps_order(blobs):
    train, _ = blobs
    head, tail = train.split_tail(0.25)
    assert head.size + tail.size == train.size
    assert tail.size == round(train.size * 0.25)
    assert np.array_equal(tail.index, train.index[head.size:])


def test_labeled_dataset_rejects_bad_labels():
    with pytest.raises(ConfigurationError):
        LabeledDataset(np.zeros((2, 2)), np.array([0, 3]), 3)


def test_orbit_labels_wrap():
    assert orbit_labels(0, 2, 10) == [0, 1]
    assert orbit_labels(9, 2, 10) == [9, 0]
    assert orbit_labels(1, 5, 3) == [1, 2, 0]


def test_partition_respects_orbit_labels(blobs):
    train, _ = blobs
    parts = partition_non_iid(train, satellites=6, orbits=3, labels_per_orbit=1, seed=0)
    assert len(parts) == 6
    sizes = {p.size for p in parts}
    assert len(sizes) == 1 and sizes.pop() > 0
    for sid, p in enumerate(parts):
        orbit = sid // 2
        assert set(np.unique(p.labels)) <= {orbit}
    seen = np.concatenate([p.index for p in parts])
    assert len(seen) == len(set(seen.tolist()))


def test_partition_is_seeded(blobs):
    train, _ = blobs
    a = partition_non_iid(train, 6, 3, 2, seed=3)
    b = partition_non_iid(train, 6, 3, 2, seed=3)
    assert all(np.array_equal(p.index, q.index) for p, q in zip(a, b))


def test_partition_needs_samples_for_every_orbit_label():
    x = np.zeros((20, 2))
    y = np.array([0] * 10 + [1] * 10)
    data = LabeledDataset(x, y, 3)
    with pytest.raises(PartitionError):
        partition_non_iid(data, satellites=3, orbits=3, labels_per_orbit=1, seed=0)


def test_partition_rejects_uneven_orbits(blobs):
    with pytest.raises(ConfigurationError):
        partition_non_iid(blobs[0], satellites=7, orbits=3, labels_per_orbit=1, seed=0)


def test_energy_penalty_does_not_move_the_trained_model(blobs, layout):
    train, _ = blobs
    start = layout.initial(np.random.default_rng(2), 0.1)
    runs = [
        train_local(layout, start, train, TrainConfig(epochs=3, batch_size=16, energy_penalty=lam, seed=4), e_cmp=5.0)
        for lam in (0.0, 1.0)
    ]
    np.testing.assert_array_equal(runs[0], runs[1])


def test_separable_two_class_data_is_learned():
    rng = np.random.default_rng(11)
    y = np.repeat([0, 1], 150)
    x = np.where(y[:, None] == 0, -2.0, 2.0) + rng.normal(0, 0.3, size=(300, 3))
    data = LabeledDataset(x, y, 2)
    layout = ModelLayout(feature_dim=3, class_count=2)
    w = train_local(layout, layout.zeros(), data, TrainConfig(epochs=20, batch_size=16, learning_rate=0.1, seed=0))
    assert evaluate(layout, w, data)[0] >= 0.99


@pytest.mark.parametrize("satellites,orbits,labels_per_orbit", [(6, 3, 3), (9, 3, 2), (8, 4, 1), (5, 1, 3)])
def test_partition_sizes_differ_by_at_most_one(blobs, satellites, orbits, labels_per_orbit):
    train, _ = blobs
    parts = partition_non_iid(train, satellites, orbits, labels_per_orbit, seed=5)
    sizes = [p.size for p in parts]
    assert max(sizes) - min(sizes) <= 1
    assert min(sizes) > 0
    assert sum(sizes) <= train.size
