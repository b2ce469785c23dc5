"""Per-round reports and the files they are written to."""
from __future__ import annotations
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence

import pandas as pd

from ..channel.energy import EnergyBreakdown
from ..errors import DomainError

METRICS_CSV = "metrics.csv"
TIMINGS_CSV = "timings.csv"
REPORTS_JSON = "reports.json"


@dataclass(frozen=True)
class RoundReport:
    round: int
    method: str
    accuracy: float                   # w_g on the test set
    loss: float                       # global loss across cluster heads
    test_loss: float
    local_loss: float                 # mean energy-penalised learner loss
    energy: EnergyBreakdown
    suspects: tuple[int, ...] = ()
    attackers: tuple[int, ...] = ()
    accepted_clusters: tuple[int, ...] = ()
    round_failed: bool = False
    seconds: float = 0.0
    tallies: Dict[str, Dict[str, int]] = field(default_factory=dict)     # cluster → choice hex → votes
    ballots: Dict[str, Dict[str, bool]] = field(default_factory=dict)    # head → cluster → approve
    defense: Dict[str, Dict[str, Any]] = field(default_factory=dict)     # cluster → θ, groups, scores
    proofs_verified: int = 0
    # E^r with one head evaluation per head, and with one per peer cluster; None where no head verifies
    total_single_verify: float | None = None
    total_per_peer_verify: float | None = None

    def to_dict(self) -> Dict[str, Any]:
        out = dataclasses.asdict(self)
        for k in ("suspects", "attackers", "accepted_clusters"):
            out[k] = list(out[k])
        return out

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "RoundReport":
        raw = dict(raw)
        raw["energy"] = EnergyBreakdown(**raw["energy"])
        for k in ("suspects", "attackers", "accepted_clusters"):
            raw[k] = tuple(int(i) for i in raw.get(k, ()))
        return cls(**raw)


COLUMNS = [
    "round", "accuracy", "loss", "test_loss", "local_loss",
    "energy_distribution", "energy_training", "energy_evaluation", "energy_intra_tx",
    "energy_inter_tx", "energy_head_verify", "energy_total", "energy_total_single", "energy_total_per_peer",
    "suspect_count", "attackers", "accepted_clusters", "round_failed",
]


def reports_frame(reports: Sequence[RoundReport]) -> pd.DataFrame:
    rows = []
    for r in reports:
        row = {"round": r.round, "accuracy": r.accuracy, "loss": r.loss,
               "test_loss": r.test_loss, "local_loss": r.local_loss}
        row.update({f"energy_{k}": v for k, v in r.energy.to_dict().items()})
        row["energy_total_single"] = r.energy.total if r.total_single_verify is None else r.total_single_verify
        row["energy_total_per_peer"] = r.energy.total if r.total_per_peer_verify is None else r.total_per_peer_verify
        row.update({
            "suspect_count": len(r.suspects), "attackers": len(r.attackers),
            "accepted_clusters": len(r.accepted_clusters), "round_failed": bool(r.round_failed),
        })
        rows.append(row)
    return pd.DataFrame(rows, columns=COLUMNS)


def emit_metrics(reports: Sequence[RoundReport], out_dir: str | Path, formats: Iterable[str] = ("csv", "json")) -> list[Path]:
    """metrics.csv (hardware-independent), timings.csv and reports.json under `out_dir`."""
    if not reports:
        raise DomainError("no reports to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    formats = set(formats)
    if "csv" in formats:
        reports_frame(reports).to_csv(out / METRICS_CSV, index=False)
        pd.DataFrame({"round": [r.round for r in reports], "seconds": [r.seconds for r in reports]}) \
            .to_csv(out / TIMINGS_CSV, index=False)
        written += [out / METRICS_CSV, out / TIMINGS_CSV]
    if "json" in formats:
        (out / REPORTS_JSON).write_text(json.dumps([r.to_dict() for r in reports], indent=2))
        written.append(out / REPORTS_JSON)
    return written


def load_reports(path: str | Path) -> list[RoundReport]:
    p = Path(path)
    if p.is_dir():
        p = p / REPORTS_JSON
    return [RoundReport.from_dict(r) for r in json.loads(p.read_text())]


# ---------- run-level summaries ----------

def rounds_to_target(reports: Sequence[RoundReport], target: float | None) -> int | None:
    if target is None:
        return None
    return next((r.round for r in reports if r.accuracy >= target), None)


def seconds_to_target(reports: Sequence[RoundReport], target: float | None) -> float | None:
    hit = rounds_to_target(reports, target)
    if hit is None:
        return None
    return float(sum(r.seconds for r in reports if r.round <= hit))


def energy_summary(reports: Sequence[RoundReport], setup_energy: float = 0.0) -> Dict[str, float]:
    totals = [r.energy.total for r in reports]
    return {
        "mean_round_energy": float(sum(totals) / len(totals)) if totals else 0.0,
        "cumulative_energy": float(sum(totals)),
        "setup_energy": float(setup_energy),
    }
