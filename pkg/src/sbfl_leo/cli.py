from __future__ import annotations
import argparse
import sys
from pathlib import Path
from typing import List, Sequence

import pandas as pd
from rich.table import Table

from .config import load_scenario
from .errors import SbflError
from .ledger.chain import verify_dump
from .log import console, setup_logging
from .reporting.tables import compare_frame, frame_table, summary_table
from .sim.driver import run_scenario
from .sim.experiments import compare, sweep_learning_rates, sweep_sizes

# ---------- utilities ----------

def _int_list(s: str) -> List[int]:
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise SystemExit(f"Expected comma-separated integers, got '{s}'")


def _float_list(s: str) -> List[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise SystemExit(f"Expected comma-separated numbers, got '{s}'")


def _energy_table(df: pd.DataFrame) -> Table:
    return frame_table(df, "Mean round energy vs constellation size (J)",
                       ["satellites", "method", "energy", "fedavg_energy", "ratio"])


def _save_frame(df: pd.DataFrame, out: str | None, name: str) -> None:
    if not out:
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    df.to_csv(d / name, index=False)
    console.print(f"[bold green]Saved[/bold green] {d / name}")

# ---------- main ops ----------

def cmd_run(args) -> int:
    cfg = load_scenario(args.config, seed=args.seed, rounds=args.rounds)
    console.rule(f"[bold green]SBFL-LEO · {cfg.method.value} · seed {cfg.seed}")
    res = run_scenario(cfg, out_dir=args.out)
    if res.reports:
        console.print(summary_table(res.reports, f"{cfg.method.value}: per-round results"))
    e = res.manifest["energy"]
    console.print(f"[bold]Rounds run:[/bold] {res.manifest['rounds_run']}  "
                  f"[bold]rounds to target:[/bold] {res.manifest['rounds_to_target'] or '-'}")
    console.print(f"[bold]Mean E^r:[/bold] {e['mean_round_energy']:.3f} J  "
                  f"[bold]setup:[/bold] {e['setup_energy']:.3f} J")
    if args.out:
        console.print(f"[bold green]Outputs written to:[/bold green] {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_scenario(args.config, seed=args.seed)
    if not args.satellites and not args.learning_rates:
        raise SystemExit("sweep needs --satellites and/or --learning-rates")
    if args.satellites:
        df = sweep_sizes(cfg, _int_list(args.satellites), rounds=args.rounds, per_satellite=args.per_satellite)
        console.print(_energy_table(df))
        _save_frame(df, args.out, "energy_sweep.csv")
    if args.learning_rates:
        df = sweep_learning_rates(cfg, _float_list(args.learning_rates))
        last = df.sort_values("round").groupby("learning_rate", as_index=False).last()
        console.print(frame_table(last, "Final accuracy per learning rate", ["learning_rate", "round", "accuracy", "loss"]))
        _save_frame(df, args.out, "learning_rate_sweep.csv")
    return 0


def cmd_verify_chain(args) -> int:
    problems = verify_dump(args.dump)
    if problems:
        for p in problems:
            console.print(f"[red]✗[/red] {p}")
        console.print(f"[bold red]{len(problems)} problem(s) in {args.dump}")
        return 1
    console.print(f"[bold green]✓ chain dump verified:[/bold green] {args.dump}")
    return 0


def cmd_compare(args) -> int:
    paths = [p.strip() for p in args.configs.split(",") if p.strip()]
    if len(paths) < 2:
        raise SystemExit("--configs needs at least two scenario files")
    cfgs = [load_scenario(p) for p in paths]
    df, _ = compare(cfgs, seed=args.seed, rounds=args.rounds, target_fraction=args.target_fraction)
    df = compare_frame(df.to_dict("records"))
    console.print(frame_table(df, "Paired comparison"))
    _save_frame(df, args.out, "compare.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sbfl-leo", description="Sharded-blockchain federated learning over LEO constellations")
    p.add_argument("--log-level", default="INFO", help="DEBUG, INFO, WARNING, ...")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="Run one scenario")
    r.add_argument("--config", required=True, help="Scenario YAML")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--rounds", type=int, default=None)
    r.add_argument("--out", type=str, default=None, help="Directory for metrics, manifest, model and chain dump")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="Energy vs constellation size, or accuracy vs learning rate")
    s.add_argument("--config", required=True)
    s.add_argument("--satellites", type=str, default=None, help="e.g. 40,80,120,160,200")
    s.add_argument("--learning-rates", type=str, default=None, help="e.g. 0.3,0.1,0.01,0.001")
    s.add_argument("--rounds", type=int, default=1, help="Rounds per size (energy sweep)")
    s.add_argument("--per-satellite", type=int, default=None, help="Training samples per satellite at every size")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", type=str, default=None)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify-chain", help="Check a chain dump written by 'run --out'")
    v.add_argument("--dump", required=True)
    v.set_defaults(func=cmd_verify_chain)

    c = sub.add_parser("compare", help="Paired runs under one seed")
    c.add_argument("--configs", required=True, help="Comma-separated scenario YAMLs")
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--rounds", type=int, default=None)
    c.add_argument("--target-fraction", type=float, default=0.9,
                   help="Target accuracy as a fraction of FEDAVG's final accuracy, where no target is set")
    c.add_argument("--out", type=str, default=None)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.func(args)
    except SbflError as e:
        raise SystemExit(f"{type(e).__name__}: {e}")


if __name__ == "__main__":
    sys.exit(main())
