from __future__ import annotations
import sys
from pathlib import Path

from sbfl_leo.config import load_scenario
from sbfl_leo.constellation.snapshot import to_snapshot, write_snapshot
from sbfl_leo.sim.driver import setup


def build_snapshot(config_path: str | Path) -> dict:
    """Constellation, partitions, DC clustering and round-0 roles for one scenario."""
    state = setup(load_scenario(config_path))
    sats = [state.satellites[s] for s in sorted(state.satellites)]
    return to_snapshot(sats, state.clusters, state.groups)


def main():
    if len(sys.argv) < 3:
        print("Usage: python -m sbfl_leo.tools.snapshot <scenario.yaml> <out.json>")
        sys.exit(1)
    out = Path(sys.argv[2])
    snap = build_snapshot(sys.argv[1])
    write_snapshot(out, snap)
    heads = [c["head"] for c in snap["clusters"]]
    print(f"Wrote {out} with {len(snap['satellites'])} satellites, {len(snap['clusters'])} clusters, heads {heads}")

if __name__ == "__main__":
    main()
