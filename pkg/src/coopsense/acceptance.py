"""Acceptance suite: reference values, criterion evaluators and a runner.

Each evaluator returns a CriterionResult with the measured worst-case
statistic next to its tolerance. Long-running pieces share intermediate
results through an AcceptanceContext cache.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfcx

from .comm import CommModel
from .meta import InversionSpec, MetaModel, PointMassMoments, gil_pelaez
from .params import SimulationConfig, SystemParams, derive
from .quadrature import QuadratureSpec, laguerre_expectation
from .sensing import CochannelLT, LobeCochannelLT, SensingModel, TargetLT, echo_moments, gamma_match
from .simulator import run_meta, run_simulation

TAU_DB = (-5.0, 0.0, 5.0, 10.0)
NC_GRID = (1, 2, 4, 6)

# analytic coverage at the reference parameters (rows: N_c, columns: TAU_DB)
GOLDEN_COVERAGE = {
    1: (0.953058, 0.905782, 0.825562, 0.728004),
    2: (0.965253, 0.934335, 0.876398, 0.794712),
    4: (0.973607, 0.956229, 0.921681, 0.864895),
    6: (0.976074, 0.963878, 0.940170, 0.898854),
}
GOLDEN_SENSING_RATE = {1: 46.3985, 2: 51.3976, 4: 57.5550, 6: 61.2822, 8: 63.6469}
GOLDEN_COMM_RATE = (69.583, 38.976)
ARGMAX_DENSITIES = (10.0, 15.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 100.0, 120.0)
META_TAU_DB = 5.0
META_T = tuple(np.round(np.arange(0.05, 0.951, 0.05), 2))


@dataclass(frozen=True)
class Scale:
    """Sample sizes for the statistical criteria."""

    n_geom: int = 8192
    argmax_geom: int = 2048
    realizations: int = 20_000
    noise_trials: int = 100_000
    meta_outer: int = 4000
    meta_inner: int = 2000
    seed: int = 2024
    workers: int = 1

    @classmethod
    def full(cls):
        return cls(realizations=200_000)


@dataclass
class CriterionResult:
    key: str
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.key} {self.name}: measured {self.measured:.6g} vs tolerance {self.tolerance:.6g}" + (
            f" ({self.detail})" if self.detail else "")


@dataclass
class AcceptanceContext:
    params: SystemParams = field(default_factory=SystemParams)
    scale: Scale = field(default_factory=Scale)
    spec: QuadratureSpec = field(default_factory=QuadratureSpec)
    cache: dict = field(default_factory=dict)

    @property
    def dp(self):
        return derive(self.params)

    def memo(self, key, fn):
        if key not in self.cache:
            self.cache[key] = fn()
        return self.cache[key]

    def sim_config(self, **kw):
        base = dict(realizations=self.scale.realizations, seed=self.scale.seed, workers=self.scale.workers,
                    meta_outer=self.scale.meta_outer, meta_inner=self.scale.meta_inner)
        base.update(kw)
        return SimulationConfig(**base)

    # shared computations -------------------------------------------------
    def analytic_coverage(self, spec=None):
        spec = spec or self.spec
        tau = 10 ** (np.asarray(TAU_DB) / 10)

        def run():
            return {nc: SensingModel(self.dp, nc, spec).average_coverage(
                tau, self.scale.n_geom, self.scale.seed) for nc in NC_GRID}
        return self.memo(("coverage", spec), run)

    def sensing_rates(self, spec=None, ncs=tuple(GOLDEN_SENSING_RATE)):
        spec = spec or self.spec

        def run():
            return {nc: float(SensingModel(self.dp, nc, spec).sensing_rate(self.scale.n_geom, self.scale.seed).value)
                    for nc in ncs}
        return self.memo(("rates", spec, ncs), run)

    def comm_rate(self, spec=None):
        spec = spec or self.spec
        dp = derive(self.params.replace(bs_density_per_km2=GOLDEN_COMM_RATE[0]))
        return self.memo(("comm", spec), lambda: float(CommModel(dp, spec).rate().value))

    def simulation(self, area_km2=25.0):
        tau = 10 ** (np.asarray(TAU_DB) / 10)

        def run():
            res = run_simulation(self.dp, self.sim_config(area_km2=area_km2), NC_GRID, comm=False)
            return res.sensing_coverage(tau)
        return self.memo(("sim", area_km2), run)

    def analytic_meta(self, nc, spec=None, inversion=InversionSpec()):
        spec = spec or self.spec
        tau = 10 ** (META_TAU_DB / 10)
        key = ("meta_model", nc, spec)
        mm = self.memo(key, lambda: MetaModel(SensingModel(self.dp, nc, spec), tau, self.scale.n_geom,
                                                self.scale.seed))
        return self.memo(("meta", nc, spec, inversion), lambda: mm.meta_curve(META_T, inversion))

    def empirical_meta(self, nc):
        tau = 10 ** (META_TAU_DB / 10)
        return self.memo(("meta_sim", nc), lambda: run_meta(
            self.dp, self.sim_config(conditioning="distances"), tau, nc, META_T)[0])


# ---------------------------------------------------------------------------
# criteria

def golden_coverage(ctx: AcceptanceContext):
    cov = ctx.analytic_coverage()
    worst, where = 0.0, ""
    for nc, ref in GOLDEN_COVERAGE.items():
        dev = np.abs(cov[nc].value - np.asarray(ref))
        i = int(np.argmax(dev))
        if dev[i] > worst:
            worst, where = float(dev[i]), f"N_c={nc} at {TAU_DB[i]:g} dB"
    return CriterionResult("1", "golden analytic coverage", worst <= 0.005, worst, 0.005, f"worst {where}")


def golden_sensing_rates(ctx: AcceptanceContext):
    rates = ctx.sensing_rates()
    rel = {nc: rates[nc] / ref - 1 for nc, ref in GOLDEN_SENSING_RATE.items()}
    worst = max(abs(v) for v in rel.values())
    detail = ", ".join(f"N_c={nc}: {rates[nc]:.4f} ({100 * rel[nc]:+.2f}%)" for nc in rel)
    return CriterionResult("2a", "golden sensing rates at 70/km^2", worst <= 0.015, worst, 0.015, detail)


def golden_comm_rate(ctx: AcceptanceContext):
    val = ctx.comm_rate()
    rel = val / GOLDEN_COMM_RATE[1] - 1
    return CriterionResult("2b", "golden comm rate at 69.583/km^2", abs(rel) <= 0.02, abs(rel), 0.02,
                           f"{val:.4f} vs {GOLDEN_COMM_RATE[1]}")


def rate_argmax_order(ctx: AcceptanceContext):
    def run():
        comm, sens = [], {1: [], 4: []}
        for lam in ARGMAX_DENSITIES:
            dp = derive(ctx.params.replace(bs_density_per_km2=lam))
            comm.append(float(CommModel(dp, ctx.spec).rate().value))
            for nc in sens:
                sens[nc].append(float(SensingModel(dp, nc, ctx.spec).sensing_rate(ctx.scale.argmax_geom,
                                                                                  ctx.scale.seed).value))
        return comm, sens
    comm, sens = ctx.memo("argmax", run)
    lam = np.asarray(ARGMAX_DENSITIES)
    c_star = lam[int(np.argmax(comm))]
    s_star = {nc: lam[int(np.argmax(v))] for nc, v in sens.items()}
    margin = min(s_star.values()) - c_star
    detail = f"comm optimum {c_star:g}/km^2, sensing optima " + ", ".join(
        f"N_c={nc}: {v:g}/km^2" for nc, v in s_star.items())
    return CriterionResult("2c", "sensing optimum density above comm optimum", margin > 0, margin, 0.0, detail)


def analytic_vs_simulation(ctx: AcceptanceContext):
    cov = ctx.analytic_coverage()
    emp, se = ctx.simulation()
    worst_excess, worst_diff, where = -np.inf, 0.0, ""
    for j, nc in enumerate(NC_GRID):
        diff = np.abs(cov[nc].value - emp[j])
        allow = np.maximum(0.015, 3 * se[j])
        i = int(np.argmax(diff - allow))
        if diff[i] - allow[i] > worst_excess:
            worst_excess, worst_diff = float(diff[i] - allow[i]), float(diff[i])
            where = f"N_c={nc} at {TAU_DB[i]:g} dB, allowance {allow[i]:.4f}"
    return CriterionResult("3", f"analytic vs simulation ({ctx.scale.realizations} realizations)",
                           worst_excess <= 0, worst_diff, 0.015, where)


def meta_mean_identity(ctx: AcceptanceContext):
    worst = 0.0
    t = np.linspace(0.002, 0.998, 499)
    for nc in (1, 4):
        ctx.analytic_meta(nc)
        mm = ctx.cache[("meta_model", nc, ctx.spec)]
        vals, _ = mm.meta_ccdf(t)
        tt = np.concatenate([[0.0], t, [1.0]])
        vv = np.concatenate([[1.0], vals, [0.0]])
        integral = float(np.sum((vv[1:] + vv[:-1]) * np.diff(tt)) / 2)
        worst = max(worst, abs(integral - mm.coverage_moment(1)))
    return CriterionResult("4a", "meta CCDF integrates to M_1", worst <= 0.005, worst, 0.005, "N_c in {1, 4}")


def meta_vs_empirical(ctx: AcceptanceContext):
    worst, detail = 0.0, []
    for nc in (1, 4):
        a = ctx.analytic_meta(nc)
        e = ctx.empirical_meta(nc)
        sup = float(np.max(np.abs(a.values - e.values)))
        detail.append(f"N_c={nc}: sup {sup:.4f}, M_1 analytic {a.m1:.4f} vs empirical {e.m1:.4f}")
        worst = max(worst, sup)
    return CriterionResult("4b", "Gil-Pelaez vs distance-conditioned simulation", worst <= 0.03, worst, 0.03,
                           "; ".join(detail))


def meta_dominance(ctx: AcceptanceContext):
    mono = ctx.analytic_meta(1)
    coop = ctx.analytic_meta(4)
    slack = 2 * np.hypot(mono.error, coop.error)
    shortfall = float(np.max(mono.values - coop.values - slack))
    return CriterionResult("4c", "N_c=4 meta curve dominates monostatic", shortfall <= 0, max(shortfall, 0.0), 0.0,
                           "largest shortfall beyond 2 sigma")


def meta_point_mass(ctx: AcceptanceContext):
    worst = 0.0
    for p0 in (0.3, 0.6, 0.9):
        t = np.round(np.arange(0.05, 0.951, 0.05), 2)
        t = t[np.abs(t - p0) >= 0.05]
        vals, _ = gil_pelaez(PointMassMoments(p0), t)
        worst = max(worst, float(np.max(np.abs(vals - (t < p0)))))
    return CriterionResult("4d", "point-mass inversion", worst <= 0.01, worst, 0.01, "p0 in {0.3, 0.6, 0.9}")


def noise_only_closed_form(dp, tau):
    """Monostatic noise-only coverage averaged over the nearest distance."""
    # P = E[exp(-a V^2)], V ~ Exp(1), a = tau N (pi lambda)^-2 / (echo constant * sigma)
    a = np.asarray(tau, dtype=float) * dp.noise_power / (dp.echo_const * dp.params.rcs_mono * (np.pi * dp.lambda_bs) ** 2)
    return np.sqrt(np.pi / (4 * a)) * erfcx(1 / (2 * np.sqrt(a)))


def exactness_analytic(ctx: AcceptanceContext):
    dp = ctx.dp
    tau = 10 ** (np.asarray(TAU_DB) / 10)
    m = SensingModel(dp, 1, ctx.spec, components={"noise"})
    # conditional coverage against exp(-tau N / mu) and the Laguerre-averaged closed form
    v, w = laguerre_expectation(64, 1.0)
    r = np.sqrt(v / (np.pi * dp.lambda_bs))[:, None]
    cond = m.conditional_coverage(r, tau)
    mu = dp.echo_const * dp.params.rcs_mono / r**4
    err_cond = float(np.max(np.abs(cond - np.exp(-tau * dp.noise_power / mu))))
    err_avg = float(np.max(np.abs(w @ cond - noise_only_closed_form(dp, tau))))
    worst = max(err_cond, err_avg)
    return CriterionResult("5a", "noise-only monostatic closed form (analytic)", worst <= 1e-9, worst, 1e-9,
                           f"conditional {err_cond:.2e}, averaged {err_avg:.2e}")


def exactness_simulated(ctx: AcceptanceContext):
    dp = ctx.dp
    tau = 10 ** (np.asarray(TAU_DB) / 10)
    cfg = ctx.sim_config(realizations=ctx.scale.noise_trials, area_km2=1.0)
    res = ctx.memo("noise_sim", lambda: run_simulation(dp, cfg, (1,), components={"noise"}, comm=False))
    emp, se = res.sensing_coverage(tau)
    z = float(np.max(np.abs(emp[0] - noise_only_closed_form(dp, tau)) / se[0]))
    return CriterionResult("5b", f"noise-only monostatic closed form (simulated, {res.realizations} trials)",
                           z <= 3, z, 3.0, "max |z| over thresholds")


def laplace_at_zero(ctx: AcceptanceContext):
    dp = ctx.dp
    cochannel = CochannelLT(dp, ctx.spec)
    vals = [float(cochannel(np.array([0.0]))[0]),
            float(cochannel.exact(np.array([0.0]))[0]),
            float(LobeCochannelLT(cochannel)(np.array(0.0), np.array([50.0, 80.0]))),
            float(TargetLT(dp, ctx.spec)(np.array([0.0]), 50.0, 80.0)[0]),
            float(TargetLT(dp, ctx.spec).exact(np.array([0.0]), 50.0, 80.0)[0])]
    cm = CommModel(dp, ctx.spec)
    vals.append(float(np.exp(-cm.interference_exponent(np.array([40.0]), np.array([0.0])))[0]))
    worst = max(abs(v - 1) for v in vals)
    return CriterionResult("5c", "Laplace transforms equal 1 at s=0", worst <= 1e-12, worst, 1e-12)


def unit_shape_monostatic(ctx: AcceptanceContext):
    r = SensingModel(ctx.dp, 1).geometry(1024, ctx.scale.seed).reshape(-1, 1)
    k = gamma_match(*echo_moments(r, ctx.dp)).k_eff
    worst = float(np.max(np.abs(k - 1.0)))
    return CriterionResult("5d", "k_eff = 1 for N_c = 1", worst == 0.0, worst, 0.0)


def quadrature_robustness(ctx: AcceptanceContext):
    fine = ctx.spec.refined()
    base_cov, fine_cov = ctx.analytic_coverage(), ctx.analytic_coverage(fine)
    d_cov = max(float(np.max(np.abs(base_cov[nc].value - fine_cov[nc].value))) for nc in NC_GRID)
    ncs = (1, 4)
    base_r = ctx.sensing_rates()
    fine_r = ctx.sensing_rates(fine, ncs)
    d_rate = max(abs(base_r[nc] - fine_r[nc]) for nc in ncs)
    d_comm = abs(ctx.comm_rate() - ctx.comm_rate(fine))
    d_meta = max(float(np.max(np.abs(ctx.analytic_meta(nc).values
                                     - ctx.analytic_meta(nc, fine, InversionSpec().refined()).values)))
                 for nc in (1, 4))
    worst = max(d_cov, d_rate, d_comm, d_meta)
    return CriterionResult("6a", "refined tolerances and doubled caps", worst < 1e-4, worst, 1e-4,
                           f"coverage {d_cov:.1e}, sensing rate {d_rate:.1e}, comm rate {d_comm:.1e}, meta {d_meta:.1e}")


def area_robustness(ctx: AcceptanceContext):
    a, _ = ctx.simulation(25.0)
    b, _ = ctx.simulation(50.0)
    worst = float(np.max(np.abs(a - b)))
    return CriterionResult("6b", "doubling the simulated area", worst < 0.003, worst, 0.003, "25 vs 50 km^2")


def determinism(ctx: AcceptanceContext):
    from .cli import render_csv
    from .experiments import coverage_table
    from .params import Config, SweepConfig

    outs = []
    for workers in (1, 2, 1):
        cfg = Config(system=ctx.params, sweep=SweepConfig(nc=(1, 4)),
                     simulation=ctx.sim_config(realizations=600, workers=workers))
        outs.append(render_csv(coverage_table(cfg, "simulate")))
    same = all(o == outs[0] for o in outs)
    return CriterionResult("7", "byte-identical CSV across runs and worker counts", same, float(not same), 0.0,
                           "workers 1, 2, 1")


CRITERIA = (golden_coverage, golden_sensing_rates, golden_comm_rate, rate_argmax_order, analytic_vs_simulation,
            meta_mean_identity, meta_vs_empirical, meta_dominance, meta_point_mass, exactness_analytic,
            exactness_simulated, laplace_at_zero, unit_shape_monostatic, quadrature_robustness, area_robustness,
            determinism)


def run_all(ctx: AcceptanceContext | None = None, criteria=CRITERIA, echo=None):
    ctx = ctx or AcceptanceContext()
    out = []
    for fn in criteria:
        res = fn(ctx)
        out.append(res)
        if echo is not None:
            echo(res.line())
    return out


def with_scale(ctx: AcceptanceContext, **kw) -> AcceptanceContext:
    return dataclasses.replace(ctx, scale=dataclasses.replace(ctx.scale, **kw), cache={})
