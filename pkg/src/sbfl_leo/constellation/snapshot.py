from __future__ import annotations
import json
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd

from .geometry import Role, Satellite
from .roles import Cluster


def satellites_frame(satellites: Sequence[Satellite]) -> pd.DataFrame:
    rows = []
    for s in satellites:
        rows.append({
            "id": s.id, "orbit": s.orbit_index, "phase": s.phase_index,
            "x": float(s.position[0]), "y": float(s.position[1]), "z": float(s.position[2]),
            "cpu_freq": s.cpu_freq, "tx_power": s.tx_power, "reputation": s.reputation,
            "role": s.role.value, "data_size": s.data_size,
            "labels": [] if s.data is None else [int(k) for k in np.flatnonzero(s.data.histogram())],
        })
    return pd.DataFrame(rows)


def to_snapshot(satellites: Sequence[Satellite], clusters: Sequence[Cluster], groups: Sequence[Sequence[int]]) -> dict[str, Any]:
    return {
        "satellites": satellites_frame(satellites).to_dict(orient="records"),
        "groups": [list(map(int, g)) for g in groups],
        "clusters": [
            {
                "id": c.id, "head": c.head, "miners": list(c.miners), "learners": list(c.learners),
                "learner_to_miner": {str(k): v for k, v in sorted(c.learner_to_miner.items())},
            }
            for c in clusters
        ],
    }


def write_snapshot(path: str | Path, snapshot: Mapping[str, Any]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(snapshot, indent=2))
    return p


def read_snapshot(path: str | Path) -> tuple[list[Satellite], list[Cluster], list[list[int]]]:
    """Satellites (without datasets) and clusters back from a snapshot file."""
    blob = json.loads(Path(path).read_text())
    sats = [
        Satellite(
            id=int(r["id"]), orbit_index=int(r["orbit"]), phase_index=int(r["phase"]),
            position=np.array([r["x"], r["y"], r["z"]], dtype=np.float64),
            cpu_freq=float(r["cpu_freq"]), tx_power=float(r["tx_power"]),
            reputation=float(r["reputation"]), role=Role(r["role"]),
        )
        for r in blob["satellites"]
    ]
    clusters = [
        Cluster(
            id=int(c["id"]), head=int(c["head"]),
            miners=tuple(c["miners"]), learners=tuple(c["learners"]),
            learner_to_miner={int(k): int(v) for k, v in c["learner_to_miner"].items()},
        )
        for c in blob["clusters"]
    ]
    return sats, clusters, [list(g) for g in blob["groups"]]
