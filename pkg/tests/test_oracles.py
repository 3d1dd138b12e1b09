"""Worked examples and Monte Carlo oracles for individual operations."""
import dataclasses

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import cumulative_trapezoid

from coopsense.comm import CommModel
from coopsense.experiments import gamma_table
from coopsense.geometry import (beam_hit_probability, exclusion_radius_logpdf,
                                sample_ordered_distances)
from coopsense.meta import MetaModel, PointMassMoments, gil_pelaez
from coopsense.params import Config, ConfigError, SimulationConfig, SweepConfig, derive
from coopsense.propagation import echo_mean_bi, echo_mean_mono
from coopsense.quadrature import QuadratureSpec
from coopsense.sensing import (SensingModel, TargetLT, echo_moments, gamma_match, rate_integral,
                               rounded_surrogate)
from coopsense.simulator import _distances_batch, run_meta, sensing_kernel, substreams

SPEC = QuadratureSpec()


def _conditioned_outcomes(dp, radii, trials, seed, components=frozenset({"target", "cochannel", "noise", "si"}),
                          batch=10_000):
    """Distance-conditioned simulator trials, concatenated over batches."""
    out = []
    for b in range(0, trials, batch):
        st = substreams(seed, b // batch)
        xy, ph, los_t, valid, cc = _distances_batch(dp, np.asarray(radii, dtype=float), batch, st, 1000.0)
        out.append(sensing_kernel(dp, xy, ph, los_t, valid, st, (len(radii),), components, cc))
    return out


# ---------------------------------------------------------------------------
# geometry

def test_beam_hit_probability_example(dp):
    assert dp.beam_fraction == pytest.approx(0.4)
    assert beam_hit_probability(50.0, dp) == pytest.approx(0.18988, rel=1e-4)


def test_nearest_distance_mean_and_law(dp, rng):
    r1 = sample_ordered_distances(dp.lambda_bs, 1, rng, size=1_000_000)[:, 0]
    assert 1 / (2 * np.sqrt(dp.lambda_bs)) == pytest.approx(59.76, abs=0.01)
    assert r1.mean() == pytest.approx(59.76, rel=0.01)
    v = np.pi * dp.lambda_bs * r1[:5000] ** 2
    assert stats.kstest(v, "expon").pvalue > 0.01


@pytest.mark.parametrize("n_c", [1, 4])
def test_exclusion_radius_law_matches_order_statistic(dp, rng, n_c):
    # R_{N_c+1} given R_1 depends on R_1 only through R_{N_c+1}^2 - R_1^2
    r = sample_ordered_distances(dp.lambda_bs, n_c + 1, rng, size=4000)
    r1 = 50.0
    shifted = np.sqrt(r1**2 + r[:, -1] ** 2 - r[:, 0] ** 2)
    grid = np.linspace(r1, r1 + 2000.0, 200_001)
    cdf = cumulative_trapezoid(np.exp(exclusion_radius_logpdf(grid, r1, dp.lambda_bs, n_c)), grid, initial=0.0)
    assert cdf[-1] == pytest.approx(1.0, abs=1e-6)
    assert stats.kstest(shifted, lambda x: np.interp(x, grid, cdf)).pvalue > 0.01


# ---------------------------------------------------------------------------
# echo moments and surrogate

def test_echo_moments_single_bs(dp):
    mean, var = echo_moments(np.array([70.0]), dp)
    assert mean == pytest.approx(echo_mean_mono(70.0, dp))
    assert var == pytest.approx(mean**2)


def test_echo_moments_without_bistatic_gating(params):
    dp = derive(params.replace(blockage_eta=50.0))
    r = np.array([50.0, 80.0, 120.0])
    mean, var = echo_moments(r, dp)
    mu0 = echo_mean_mono(50.0, dp)
    assert mean == pytest.approx(mu0, rel=1e-12)
    assert var == pytest.approx(mu0**2, rel=1e-12)


def test_echo_moments_brute_force(dp):
    rng = np.random.default_rng(3)
    r = np.array([50.0, 80.0, 120.0])
    mu = np.concatenate([[echo_mean_mono(r[0], dp)], echo_mean_bi(r[0], r[1:], dp)])
    p = np.concatenate([[1.0], beam_hit_probability(r[1:], dp)])
    draws = []
    for _ in range(10):
        n = 1_000_000
        gate = rng.random((n, 3)) < p
        draws.append(np.sum(gate * rng.exponential(mu, (n, 3)), axis=1))
    x = np.concatenate(draws)
    mean, var = echo_moments(r, dp)
    assert x.mean() == pytest.approx(mean, rel=2e-3)
    assert x.var() == pytest.approx(var, rel=1e-2)


def test_gamma_match_exponential_and_pair():
    g = gamma_match(2.0, 4.0)
    assert g.k_eff == 1.0 and g.eta == pytest.approx(1.0)
    # two always-on exponentials: mean mu1 + mu2, variance mu1^2 + mu2^2
    assert gamma_match(2.0, 2.0).k_eff == pytest.approx(2.0)
    for mu2 in (0.1, 0.5, 0.9):
        k = gamma_match(1 + mu2, 1 + mu2**2).k_eff
        assert 1 < k <= 2
    assert rounded_surrogate(2.0, 2.0).k_eff == 2.0


# ---------------------------------------------------------------------------
# Laplace transforms and conditional coverage

def test_target_lt_vanishes_for_large_clusters(dp):
    lt = TargetLT(dp, SPEC)
    v = lt.order_statistic(np.array([1e12]), 60.0, 400, exact=True)
    assert v == pytest.approx(1.0, abs=1e-3)


def test_target_lt_order_statistic_against_monte_carlo(dp):
    rng = np.random.default_rng(21)
    p = dp.params
    r1, n_c, s, f = 60.0, 4, 1e12, 40_000
    # R_{N_c+1}^2 - R_1^2 is Gamma(N_c) / (pi lambda)
    rho = np.sqrt(r1**2 + rng.gamma(n_c, 1.0, f) / (np.pi * dp.lambda_bs))
    # LoS reflectors illuminating the target: intensity lambda * frac * e^{-eta r} beyond rho
    eta, frac = p.blockage_eta, dp.beam_fraction
    k = rng.poisson(2 * np.pi * dp.lambda_bs * frac * np.exp(-eta * rho) * (1 + eta * rho) / eta**2)
    owner = np.repeat(np.arange(f), k)
    ro = rho[owner]
    first = rng.random(owner.size) < ro * eta / (ro * eta + 1)
    r = ro + np.where(first, rng.exponential(1 / eta, owner.size), rng.gamma(2.0, 1 / eta, owner.size))
    pw = dp.echo_const * rng.exponential(p.rcs_bi, r.size) / (r1**p.alpha_los * r**p.alpha_los)
    z = np.exp(-s * np.bincount(owner, pw, minlength=f))
    expect = TargetLT(dp, SPEC).order_statistic(np.array([s]), r1, n_c, exact=True)
    assert abs(z.mean() - float(np.squeeze(expect))) < 3 * z.std() / np.sqrt(f) + 1e-4


def test_threshold_limit(dp):
    m = SensingModel(dp, 4, SPEC)
    r = np.array([50.0, 80.0, 120.0, 160.0])
    assert m.conditional_coverage(r, [1e-9])[0] == pytest.approx(1.0, abs=1e-6)


def test_noise_only_cluster_is_finite_binomial(dp):
    m = SensingModel(dp, 4, SPEC, components={"noise"})
    r = np.array([[50.0, 80.0, 120.0, 160.0], [90.0, 95.0, 130.0, 200.0]])
    tau = np.array([0.5, 3.0])
    g = m.surrogate(r)
    b = g.eta[:, None] * tau / g.theta_eff[:, None]
    expect = 1 - (1 - np.exp(-b * dp.noise_power)) ** g.k_eff[:, None]
    np.testing.assert_allclose(m.conditional_coverage(r, tau), expect, rtol=1e-10)


R_ORACLE = np.array([50.0, 80.0, 120.0, 160.0])
VOID_REASON = ("the specified co-channel model draws the interferer exclusion radius independently of the "
               "target, but the receive lobe points at the target, whose nearest-BS disc is empty")


@pytest.fixture(scope="module")
def conditioned_hits(dp):
    return np.concatenate([oc.sinr[:, 0] > 1.0 for oc in _conditioned_outcomes(dp, R_ORACLE, 100_000, 31)])


@pytest.fixture(scope="module")
def lobe_model(dp):
    return SensingModel(dp, 4, SPEC, cochannel="lobe")


@pytest.mark.xfail(strict=True, reason=VOID_REASON + " (analytic 0.965 vs simulated 0.981)")
def test_conditional_coverage_against_conditioned_simulation(dp, conditioned_hits):
    analytic = SensingModel(dp, 4, SPEC).conditional_coverage(R_ORACLE, [1.0])[0]
    assert abs(conditioned_hits.mean() - analytic) < 0.01


def test_lobe_conditional_coverage_against_conditioned_simulation(lobe_model, conditioned_hits):
    analytic = lobe_model.conditional_coverage(R_ORACLE, [1.0])[0]
    se = conditioned_hits.std() / np.sqrt(conditioned_hits.size)
    assert abs(conditioned_hits.mean() - analytic) < max(0.01, 3 * se)


@pytest.mark.xfail(strict=True, reason=VOID_REASON + " (0.897 vs 0.939 at s = 1/noise)")
def test_cochannel_lt_at_noise_scale_against_simulator(dp):
    rng = np.random.default_rng(4)
    s = 1.0 / dp.noise_power
    z = []
    for j, rad in enumerate(np.sqrt(rng.exponential(size=1000) / (np.pi * dp.lambda_bs))):
        oc = _conditioned_outcomes(dp, [rad], 100, 100 + j, frozenset({"cochannel"}), batch=100)[0]
        z.append(np.exp(-s * (oc.i_los + oc.i_nlos)))
    z = np.concatenate(z)
    expect = float(np.squeeze(SensingModel(dp, 1, SPEC).cochannel_lt.exact(np.array([s]))))
    assert abs(z.mean() - expect) < 3 * z.std() / np.sqrt(z.size)


@pytest.mark.parametrize("r1", [30.0, 60.0, 120.0])
def test_lobe_cochannel_lt_against_simulator(dp, lobe_model, r1):
    s = 1.0 / dp.noise_power
    oc = _conditioned_outcomes(dp, [r1], 20_000, int(r1), frozenset({"cochannel"}), batch=20_000)[0]
    z = np.exp(-s * (oc.i_los + oc.i_nlos))
    expect = float(lobe_model.lobe_lt(np.array(s), np.array([r1])))
    assert abs(z.mean() - expect) < 3 * z.std() / np.sqrt(z.size)


def test_lobe_model_reduces_to_void_geometry(dp, lobe_model):
    # for N_c = 1 the lobe transform is a plain angular average of the radial integral
    r1, s = 70.0, 1.0 / dp.noise_power
    x, w = np.polynomial.legendre.leggauss(64)
    phi = dp.beamwidth / 2 * x
    j = lobe_model.lobe_lt.base.j_integrals(2 * r1 * np.cos(phi), np.full(phi.size, s))
    expect = np.exp(-dp.lambda_bs * dp.beam_fraction * dp.beamwidth / 2 * (w @ j))
    assert float(lobe_model.lobe_lt(np.array(s), np.array([r1]))) == pytest.approx(expect, rel=1e-6)


def test_lobe_model_raises_average_coverage(dp, lobe_model):
    # pointwise either model can be larger: cluster members inside the lobe may be close
    geo = lobe_model.geometry(1024, seed=3, replicates=1)[0]
    base = SensingModel(dp, 4, SPEC).conditional_coverage(geo, [1.0, 10.0]).mean(axis=0)
    lobe = lobe_model.conditional_coverage(geo, [1.0, 10.0]).mean(axis=0)
    assert np.all(lobe > base + 0.005)


# ---------------------------------------------------------------------------
# rates

def test_rate_rectangle_stub(dp):
    t0 = 6.0
    val, _ = rate_integral(lambda t: (t < t0).astype(float))
    assert dp.params.n_beams * float(val) == pytest.approx(dp.params.n_beams * t0, rel=1e-12)


def test_comm_duty_factor_stub(dp):
    half = dataclasses.replace(dp, t_s=dp.t_t / 2)
    m = CommModel(half, SPEC)
    t0 = 4.0
    m.coverage = lambda tau: (np.log1p(np.atleast_1d(tau)) < t0).astype(float)
    assert float(m.rate().value) == pytest.approx(dp.params.n_beams * t0 / 2, rel=1e-12)


def test_comm_limits(dp):
    clean = CommModel(dp, SPEC, interference=False, noise=False)
    np.testing.assert_allclose(clean.coverage([0.1, 10.0, 1e6]), 1.0, atol=1e-12)
    assert CommModel(dp, SPEC).coverage([1e12])[0] < 1e-6


def test_comm_ignores_self_interference(params):
    a = CommModel(derive(params), SPEC).coverage([1.0])
    b = CommModel(derive(params.replace(si_residual=params.si_residual * 100)), SPEC).coverage([1.0])
    assert a[0] == b[0]


def test_comm_rate_falls_beyond_optimum(params):
    r70 = float(CommModel(derive(params), SPEC).rate().value)
    r120 = float(CommModel(derive(params.replace(bs_density_per_km2=120.0)), SPEC).rate().value)
    assert r120 < r70


def test_comm_rate_decreases_with_energy_split(params):
    rates = [float(CommModel(derive(params.replace(energy_split=g)), SPEC).rate().value)
             for g in (0.1, 0.4, 0.7, 0.9)]
    assert np.all(np.diff(rates) < 0)


# ---------------------------------------------------------------------------
# meta distribution

def test_zeroth_and_second_moment(dp):
    model = SensingModel(dp, 4, SPEC)
    tau = 10**0.5
    mm = MetaModel(model, tau, n_geom=2048, seed=5)
    assert mm.coverage_moment(0) == 1.0
    geo = model.geometry(4096, seed=77, replicates=1)[0]
    sq = model.conditional_coverage(geo, [tau])[:, 0] ** 2
    assert abs(mm.coverage_moment(2) - sq.mean()) < 2 * sq.std() / np.sqrt(sq.size)


def test_imaginary_moments_bounded(dp):
    mm = MetaModel(SensingModel(dp, 2, SPEC), 10**0.5, n_geom=1024, seed=1)
    u = np.linspace(-500, 500, 2001)
    assert np.all(np.abs(mm.moments(u)) <= 1 + 1e-12)


def test_point_mass_grid():
    ccdf, _ = gil_pelaez(PointMassMoments(0.6), [0.25, 0.5, 0.75], raise_on_fail=False)
    np.testing.assert_allclose(ccdf, [1, 1, 0], atol=0.01)


def test_degenerate_meta_simulation_is_one(dp):
    cfg = SimulationConfig(meta_outer=20, meta_inner=50, seed=3, workers=1)
    curve, cond = run_meta(dp, cfg, 10.0, 1, [0.1, 0.5, 0.9], components=frozenset())
    np.testing.assert_array_equal(cond, 1.0)
    np.testing.assert_array_equal(curve.values, 1.0)


def test_simulated_sinr_matches_breakdown(dp):
    oc = _conditioned_outcomes(dp, [50.0, 80.0, 120.0], 2000, 8, batch=2000)[0]
    den = oc.i_target + (oc.i_los + oc.i_nlos)[:, None] + oc.noise + oc.si
    np.testing.assert_allclose(oc.sinr, oc.p_tot / den, rtol=1e-12)
    empty = _conditioned_outcomes(dp, [50.0], 10, 8, frozenset(), batch=10)[0]
    assert np.all(np.isinf(empty.sinr))


# ---------------------------------------------------------------------------
# sweep tables and config validation

def test_gamma_table_edges_and_total(params):
    cfg = Config(system=params, simulation=SimulationConfig(workers=1),
                 sweep=SweepConfig(nc=(1,), gamma=(0.0, 0.7, 1.0)))
    cfg = dataclasses.replace(cfg, numerics=dataclasses.replace(cfg.numerics, geometry_samples=512, replicates=4))
    t = gamma_table(cfg)
    rows = {float(r[2]): [float(x) for x in r[3:6]] for r in t.rows}
    assert rows[0.0][1] == 0.0
    assert rows[1.0][0] == 0.0
    comm, sens, total = rows[0.7]
    assert total > comm > 0 and total > sens > 0


@pytest.mark.parametrize("sweep", [{"nc": ()}, {"t_grid": (0.0, 0.5)}, {"t_grid": (0.5, 1.2)}])
def test_sweep_validation(sweep):
    with pytest.raises(ConfigError):
        SweepConfig(**sweep)
