"""Figure-level sweeps producing plain tables (rows of primitives).

Each function takes a resolved Config and an engine selection and returns a
Table whose rows carry the engine, the seed and the config digest. Floats are
rendered with ``repr`` so that identical inputs give identical bytes.
"""
from __future__ import annotations

import dataclasses
import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from .comm import CommModel
from .meta import MetaModel
from .params import Config, ConfigError, derive, serialize_config
from .quadrature import QuadratureSpec
from .sensing import COMPONENTS, SensingModel
from .simulator import run_meta, run_simulation

ENGINES = ("analytic", "simulate", "both")
WORKERS_ENV = "COOPSENSE_WORKERS"


@dataclass
class Table:
    columns: tuple
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def config_digest(cfg: Config) -> str:
    """Short hash of the resolved config; the worker count is excluded."""
    cfg = dataclasses.replace(cfg, simulation=cfg.simulation.replace(workers=None))
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:12]


def with_seed(cfg: Config, seed=None) -> Config:
    if seed is None:
        return cfg
    return dataclasses.replace(cfg, simulation=cfg.simulation.replace(seed=int(seed)))


def resolve_workers(cfg: Config) -> Config:
    """Fill an unset worker count from the environment (default: all CPUs)."""
    if cfg.simulation.workers is not None:
        return cfg
    env = os.environ.get(WORKERS_ENV)
    try:
        n = int(env) if env else (os.cpu_count() or 1)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV}: expected an integer, got {env!r}") from None
    return dataclasses.replace(cfg, simulation=cfg.simulation.replace(workers=max(1, n)))


def _engines(engine):
    if engine not in ENGINES:
        raise ConfigError(f"engine must be one of {ENGINES}, got {engine!r}")
    return [e for e in ("analytic", "simulate") if engine in (e, "both")]


def _spec(cfg):
    return cfg.quadrature or QuadratureSpec()


def _f(x):
    return repr(float(x))


def analytic_sensing_rate(dp, n_c, cfg):
    """Sensing rate with the degenerate no-power ends handled explicitly."""
    if dp.p_s <= 0:
        return 0.0, 0.0, {}
    comps = COMPONENTS if dp.p_c > 0 else COMPONENTS - {"cochannel"}
    m = SensingModel(dp, n_c, _spec(cfg), components=comps)
    est = m.sensing_rate(n_geom=cfg.numerics.geometry_samples, seed=cfg.simulation.seed,
                         replicates=cfg.numerics.replicates)
    return float(est.value), float(est.stderr), dict(est.info, **m.last_info)


def analytic_comm_rate(dp, cfg):
    if dp.p_c <= 0:
        return 0.0, {}
    m = CommModel(dp, _spec(cfg))
    est = m.rate()
    return float(est.value), dict(est.info)


def coverage_table(cfg: Config, engine="analytic") -> Table:
    dp = derive(cfg.system)
    seed, digest = cfg.simulation.seed, config_digest(cfg)
    tau_db = list(cfg.sweep.tau_db)
    tau = 10 ** (np.asarray(tau_db, dtype=float) / 10)
    nc_list = [int(k) for k in cfg.sweep.nc]
    results, meta = {}, {}
    for eng in _engines(engine):
        if eng == "analytic":
            for nc in nc_list:
                m = SensingModel(dp, nc, _spec(cfg))
                est = m.average_coverage(tau, cfg.numerics.geometry_samples, seed, cfg.numerics.replicates)
                results[eng, nc] = (est.value, est.stderr)
                meta[f"analytic_nc{nc}"] = est.info
        else:
            res = run_simulation(dp, cfg.simulation, nc_list, comm=False)
            cov, se = res.sensing_coverage(tau)
            for j, nc in enumerate(nc_list):
                results[eng, nc] = (cov[j], se[j])
            meta["simulate"] = {"realizations": res.realizations, "redraws": res.redraws, "digest": res.digest}
    both = engine == "both"
    cols = ("engine", "n_c", "tau_db", "coverage", "stderr", "abs_diff", "seed", "config_digest")
    rows = []
    for eng in _engines(engine):
        for nc in nc_list:
            val, se = results[eng, nc]
            for i, t in enumerate(tau_db):
                diff = _f(abs(results["analytic", nc][0][i] - results["simulate", nc][0][i])) if both else ""
                rows.append((eng, nc, _f(t), _f(val[i]), _f(se[i]), diff, seed, digest))
    return Table(cols, rows, meta)


def meta_table(cfg: Config, engine="analytic") -> Table:
    dp = derive(cfg.system)
    seed, digest = cfg.simulation.seed, config_digest(cfg)
    t_grid = np.asarray(cfg.sweep.t_grid, dtype=float)
    nc_list = [int(k) for k in cfg.sweep.nc]
    curves, meta = {}, {}
    for eng in _engines(engine):
        for tdb in cfg.sweep.tau_db:
            tau = 10 ** (tdb / 10)
            for nc in nc_list:
                if eng == "analytic":
                    mm = MetaModel(SensingModel(dp, nc, _spec(cfg)), tau, cfg.numerics.meta_samples, seed,
                                   cfg.numerics.replicates)
                    curve = mm.meta_curve(t_grid)
                else:
                    curve, _ = run_meta(dp, cfg.simulation, tau, nc, t_grid)
                curves[eng, tdb, nc] = curve
                meta[f"{eng}_tau{tdb}_nc{nc}"] = dict(curve.info, m1=curve.m1, m2=curve.m2)
    cols = ("engine", "n_c", "tau_db", "t", "meta_ccdf", "err", "dominates_mono", "seed", "config_digest")
    rows = []
    for (eng, tdb, nc), c in curves.items():
        mono = curves.get((eng, tdb, 1))
        for i, t in enumerate(t_grid):
            flag = ""
            if mono is not None and nc != 1:
                slack = 2 * np.hypot(c.error[i], mono.error[i])
                flag = "true" if c.values[i] >= mono.values[i] - slack else "false"
            rows.append((eng, nc, _f(tdb), _f(t), _f(c.values[i]), _f(c.error[i]), flag, seed, digest))
    return Table(cols, rows, meta)


def rates_table(cfg: Config, engine="analytic") -> Table:
    seed, digest = cfg.simulation.seed, config_digest(cfg)
    nc_list = [int(k) for k in cfg.sweep.nc]
    cols = ("engine", "quantity", "n_c", "density_per_km2", "rate_nats", "stderr", "seed", "config_digest")
    rows, meta = [], {}
    for eng in _engines(engine):
        for lam in cfg.sweep.density_per_km2:
            dp = derive(cfg.system.replace(bs_density_per_km2=float(lam)))
            if eng == "analytic":
                c, info = analytic_comm_rate(dp, cfg)
                rows.append((eng, "comm", "", _f(lam), _f(c), _f(0.0), seed, digest))
                for nc in nc_list:
                    v, se, info = analytic_sensing_rate(dp, nc, cfg)
                    rows.append((eng, "sensing", nc, _f(lam), _f(v), _f(se), seed, digest))
                    meta[f"analytic_lam{lam}_nc{nc}"] = info
            else:
                res = run_simulation(dp, cfg.simulation, nc_list, comm=True)
                cr, cse = res.comm_rate(dp)
                rows.append((eng, "comm", "", _f(lam), _f(cr), _f(cse), seed, digest))
                sr, sse = res.sensing_rate(dp)
                for j, nc in enumerate(nc_list):
                    rows.append((eng, "sensing", nc, _f(lam), _f(sr[j]), _f(sse[j]), seed, digest))
                meta[f"simulate_lam{lam}"] = {"digest": res.digest, "redraws": res.redraws}
    return Table(cols, rows, meta)


def gamma_table(cfg: Config, engine="analytic") -> Table:
    seed, digest = cfg.simulation.seed, config_digest(cfg)
    nc_list = [int(k) for k in cfg.sweep.nc]
    cols = ("engine", "n_c", "gamma", "comm_rate", "sensing_rate", "total_rate", "seed", "config_digest")
    rows, meta = [], {}
    for eng in _engines(engine):
        for g in cfg.sweep.gamma:
            dp = derive(cfg.system.replace(energy_split=float(g)))
            if eng == "analytic":
                c, _ = analytic_comm_rate(dp, cfg)
                sens = [analytic_sensing_rate(dp, nc, cfg)[0] for nc in nc_list]
            else:
                res = run_simulation(dp, cfg.simulation, nc_list, comm=True)
                c = res.comm_rate(dp)[0]
                sens = list(res.sensing_rate(dp)[0])
            for nc, s in zip(nc_list, sens):
                rows.append((eng, nc, _f(g), _f(c), _f(s), _f(c + s), seed, digest))
    return Table(cols, rows, meta)


COMMANDS = {"coverage": coverage_table, "meta": meta_table, "rates": rates_table, "gamma": gamma_table}
