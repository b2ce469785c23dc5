from __future__ import annotations
import logging

import numpy as np
from ortools.sat.python import cp_model

from ..errors import ConfigurationError, PartitionError
from .data import LabeledDataset

log = logging.getLogger(__name__)


def orbit_labels(orbit: int, labels_per_orbit: int, class_count: int) -> list[int]:
    """Contiguous label shard (mod K) starting at the orbit index."""
    span = min(labels_per_orbit, class_count)
    return [(orbit + j) % class_count for j in range(span)]


def _allocate(capacity: list[int], orbit_sets: list[list[int]], per_orbit: int, target: int):
    """CP-SAT allocation of label samples to orbits.

    Variables n[o,k] = samples of label k given to orbit o, and T = samples per satellite.
    Constraints: every orbit receives per_orbit*T samples, drawn only from its labels, and no
    label is over-drawn. First solve maximises T, second balances labels inside each orbit.
    """

    def build(fixed_t: int | None):
        m = cp_model.CpModel()
        t = m.NewIntVar(0, target, "T") if fixed_t is None else fixed_t
        n = {}
        for o, labels in enumerate(orbit_sets):
            for k in labels:
                n[o, k] = m.NewIntVar(0, capacity[k], f"n_{o}_{k}")
            m.Add(sum(n[o, k] for k in labels) == per_orbit * t)
        for k in range(len(capacity)):
            users = [n[o, k] for o, labels in enumerate(orbit_sets) if k in labels]
            if users:
                m.Add(sum(users) <= capacity[k])
        return m, t, n

    m, t, _ = build(None)
    m.Maximize(t)
    solver = cp_model.CpSolver()
    solver.parameters.max_time_in_seconds = 10.0
    res = solver.Solve(m)
    if res not in (cp_model.OPTIMAL, cp_model.FEASIBLE) or solver.Value(t) == 0:
        return 0, {}
    best_t = int(solver.Value(t))

    m, _, n = build(best_t)
    devs = []
    for (o, k), var in n.items():
        span = len(orbit_sets[o])
        dev = m.NewIntVar(0, per_orbit * best_t * span, f"dev_{o}_{k}")
        m.AddAbsEquality(dev, span * var - per_orbit * best_t)
        devs.append(dev)
    m.Minimize(sum(devs))
    solver = cp_model.CpSolver()
    solver.parameters.max_time_in_seconds = 10.0
    res = solver.Solve(m)
    if res not in (cp_model.OPTIMAL, cp_model.FEASIBLE):
        return 0, {}
    return best_t, {key: int(solver.Value(var)) for key, var in n.items()}


def partition_non_iid(
    full: LabeledDataset,
    satellites: int,
    orbits: int,
    labels_per_orbit: int,
    seed: int,
) -> list[LabeledDataset]:
    """Split `full` into one dataset per satellite (index = satellite id).

    Satellite s sits on orbit s // (satellites / orbits) and only ever holds samples of that
    orbit's labels. Every partition has the same size; samples are never shared.
    """
    if labels_per_orbit < 1:
        raise ConfigurationError("labels_per_orbit must be >= 1")
    if orbits < 1 or satellites < 1 or satellites % orbits:
        raise ConfigurationError(f"{satellites} satellites cannot be spread evenly over {orbits} orbits")
    per_orbit = satellites // orbits
    k_count = full.class_count
    rng = np.random.default_rng(seed)

    label_rows = [rng.permutation(np.flatnonzero(full.labels == k)) for k in range(k_count)]
    capacity = [len(r) for r in label_rows]
    orbit_sets = [orbit_labels(o, labels_per_orbit, k_count) for o in range(orbits)]
    target = full.size // satellites

    size, alloc = _allocate(capacity, orbit_sets, per_orbit, target)
    if size == 0:
        short = sorted({k for labels in orbit_sets for k in labels if capacity[k] == 0})
        raise PartitionError(
            f"insufficient samples to give {satellites} satellites data from their orbit labels"
            + (f"; labels with no samples: {short}" if short else "")
        )
    if size < target:
        log.warning("label supply limits partitions to %d samples each (wanted %d)", size, target)

    taken = [0] * k_count
    parts: list[LabeledDataset] = []
    for o, labels in enumerate(orbit_sets):
        pool = []
        for k in labels:
            cnt = alloc[o, k]
            pool.append(label_rows[k][taken[k]:taken[k] + cnt])
            taken[k] += cnt
        pool = rng.permutation(np.concatenate(pool))
        for j in range(per_orbit):
            parts.append(full.subset(pool[j * size:(j + 1) * size]))
    return parts
