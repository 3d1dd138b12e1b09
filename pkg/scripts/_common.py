"""Shared plumbing for the figure scripts."""
from __future__ import annotations

import argparse
from pathlib import Path

from coopsense.cli import _load, _write
from coopsense.experiments import COMMANDS, ENGINES, resolve_workers

ROOT = Path(__file__).resolve().parents[1]


def run(command, default_config, summarize, description):
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--config", default=str(ROOT / "configs" / default_config))
    ap.add_argument("--engine", default="analytic", choices=ENGINES)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default=str(ROOT / "results" / Path(default_config).stem))
    args = ap.parse_args()
    cfg = _load(args.config, args.seed)
    table = COMMANDS[command](resolve_workers(cfg), args.engine)
    path = _write(args.out, command, table, command, args.engine, cfg)
    summarize(table)
    print(f"wrote {path}")


def pivot(table, row_key, col_key, value, engine=None):
    """Print ``value`` as a grid of ``row_key`` by ``col_key``."""
    rows = [dict(zip(table.columns, r)) for r in table.rows]
    engines = sorted({r["engine"] for r in rows}) if engine is None else [engine]
    for eng in engines:
        sub = [r for r in rows if r["engine"] == eng]
        cols = sorted({r[col_key] for r in sub}, key=float)
        keys = sorted({r[row_key] for r in sub}, key=lambda k: float(k) if k != "" else -1)
        print(f"\n[{eng}] {value} by {row_key} (rows) and {col_key} (columns)")
        print(f"{row_key:>10} " + " ".join(f"{float(c):>9.3g}" for c in cols))
        for k in keys:
            cells = {r[col_key]: float(r[value]) for r in sub if r[row_key] == k}
            print(f"{str(k) or 'comm':>10} " + " ".join(f"{cells.get(c, float('nan')):>9.4f}" for c in cols))
