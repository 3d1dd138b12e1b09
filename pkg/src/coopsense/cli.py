"""``coopsense`` command line: figure sweeps to CSV plus a JSON sidecar.

Exit codes: 0 success, 1 acceptance failure, 2 config error, 3 numerical
non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import COMMANDS, ENGINES, config_digest, resolve_workers, with_seed
from .params import ConfigError, load_config
from .quadrature import QuadratureError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def render_csv(table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    w.writerows(table.rows)
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, frozenset):
        return sorted(obj)
    return obj


def sidecar(command, engine, cfg, table) -> str:
    # the worker count never changes results, so it stays out of the record
    doc = {
        "command": command,
        "engine": engine,
        "version": __version__,
        "seed": cfg.simulation.seed,
        "config_digest": config_digest(cfg),
        "config": _jsonable(dataclasses.asdict(cfg)),
        "columns": list(table.columns),
        "numerics": _jsonable(table.metadata),
    }
    doc["config"]["simulation"].pop("workers", None)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _load(path, seed):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return with_seed(load_config(text), seed)


def _write(out_dir, name, table, command, engine, cfg):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.csv").write_text(render_csv(table), encoding="utf-8")
    (out / f"{name}.json").write_text(sidecar(command, engine, cfg, table), encoding="utf-8")
    return out / f"{name}.csv"


def _validate(args, cfg):
    from .acceptance import AcceptanceContext, Scale, run_all
    from .experiments import Table

    scale = Scale.full() if args.full_scale else Scale()
    scale = dataclasses.replace(scale, seed=cfg.simulation.seed, workers=resolve_workers(cfg).simulation.workers)
    ctx = AcceptanceContext(params=cfg.system, scale=scale, spec=cfg.quadrature or AcceptanceContext().spec)
    results = run_all(ctx, echo=print)
    table = Table(("criterion", "name", "passed", "measured", "tolerance", "detail", "seed", "config_digest"),
                  [(r.key, r.name, "true" if r.passed else "false", repr(float(r.measured)),
                    repr(float(r.tolerance)), r.detail, cfg.simulation.seed, config_digest(cfg)) for r in results],
                  {"scale": dataclasses.asdict(scale)})
    return table, all(r.passed for r in results)


def build_parser():
    ap = argparse.ArgumentParser(prog="coopsense", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS) + ["validate"])
    ap.add_argument("--config", required=True, help="TOML config file")
    ap.add_argument("--engine", default="analytic", choices=ENGINES)
    ap.add_argument("--seed", type=int, default=None, help="override simulation.seed")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--full-scale", action="store_true",
                    help="validate: use 2e5 realizations for the simulation cross-check")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args.config, args.seed)
        if args.command == "validate":
            table, ok = _validate(args, cfg)
            path = _write(args.out, "validate", table, "validate", args.engine, cfg)
            print(path)
            return EXIT_OK if ok else EXIT_FAIL
        table = COMMANDS[args.command](resolve_workers(cfg), args.engine)
        path = _write(args.out, args.command, table, args.command, args.engine, cfg)
        print(path)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QuadratureError as exc:
        print(f"numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
