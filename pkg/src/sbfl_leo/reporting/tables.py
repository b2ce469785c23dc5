from __future__ import annotations
from typing import Sequence

import pandas as pd
from rich.table import Table

from .metrics import RoundReport, reports_frame


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and pd.isna(v)):
        return "-"
    if isinstance(v, float):
        return f"{v:.4f}" if abs(v) < 1e4 else f"{v:.4g}"
    return str(v)


def frame_table(df: pd.DataFrame, title: str, columns: Sequence[str] | None = None) -> Table:
    t = Table(title=title)
    cols = list(columns or df.columns)
    for col in cols:
        t.add_column(col)
    for _, r in df.iterrows():
        t.add_row(*[_fmt(r[c]) for c in cols])
    return t


def summary_table(reports: Sequence[RoundReport], title: str) -> Table:
    df = reports_frame(reports)
    return frame_table(
        df, title,
        ["round", "accuracy", "loss", "energy_total", "suspect_count", "attackers", "accepted_clusters"],
    )


def compare_frame(rows: Sequence[dict]) -> pd.DataFrame:
    keep = ["method", "final_accuracy", "min_attack_accuracy", "target", "rounds_to_target",
            "seconds_to_target", "mean_round_energy"]
    return pd.DataFrame(list(rows))[keep].sort_values("method", kind="stable").reset_index(drop=True)
