import numpy as np
import pytest
from scipy.special import gammaincc

from coopsense.comm import CommModel, comm_rate
from coopsense.params import SimulationConfig, SystemParams, derive
from coopsense.quadrature import QuadratureSpec
from coopsense.simulator import run_simulation

SPEC = QuadratureSpec()


@pytest.fixture(scope="module")
def model(dp):
    return CommModel(dp, SPEC)


def test_noise_only_is_alzer_form(dp):
    m = CommModel(dp, SPEC, interference=False)
    r0 = np.array([20.0, 80.0, 300.0])
    tau = np.array([1.0, 10.0, 100.0])
    x = tau[None, :] * dp.noise_power / m.signal_mean(r0)[:, None]
    expect = 1 - (1 - np.exp(-m.eta * 3 * x)) ** 3
    np.testing.assert_allclose(m.conditional_coverage(r0, tau), expect, rtol=1e-12)
    # and close to the exact Gamma(3) CCDF
    np.testing.assert_allclose(expect, gammaincc(3, 3 * x), atol=0.03)


def test_interference_exponent_against_monte_carlo(dp, model):
    p = dp.params
    rng = np.random.default_rng(3)
    r0, y, f, r_out = 40.0, 2.0, 20_000, 2500.0
    s = y / model.signal_mean(r0)
    n = rng.poisson(model.intensity * np.pi * (r_out**2 - r0**2), f)
    owner = np.repeat(np.arange(f), n)
    r = np.sqrt(r0**2 + rng.random(owner.size) * (r_out**2 - r0**2))
    los = rng.random(r.size) < np.exp(-p.blockage_eta * r)
    g = np.where(los, rng.gamma(3.0, 1 / 3, r.size), rng.gamma(2.0, 1 / 2, r.size))
    pw = dp.p_c * dp.beam_gain * np.where(los, dp.c_los * r**-2.0, dp.c_nlos * r**-4.0) * g
    z = np.exp(-s * np.bincount(owner, pw, minlength=f))
    analytic = np.exp(-model.interference_exponent(np.array([r0]), np.array([y]))[0])
    assert abs(z.mean() - analytic) < 3 * z.std() / np.sqrt(f) + 1e-4


def test_coverage_decreasing_and_bounded(model):
    c = model.coverage(10 ** (np.array([-10.0, 0.0, 10.0, 20.0]) / 10))
    assert np.all(np.diff(c) < 0) and np.all((0 <= c) & (c <= 1))


def test_duty_factor(dp, model):
    assert model.duty_factor() == pytest.approx(1 - dp.t_s / dp.t_t)


def test_rate_finite_and_positive(dp):
    est = comm_rate(dp, SPEC)
    assert 0 < float(est.value) < 200 and not est.info["truncated"]


def test_non_integer_nakagami_rejected():
    with pytest.raises(ValueError):
        CommModel(derive(SystemParams(nakagami_m_los=2.5)), SPEC)


def test_coverage_against_simulator(dp, model):
    res = run_simulation(dp, SimulationConfig(realizations=1500, seed=21, workers=1), (1,), comm=True)
    tau = 10 ** (np.array([0.0, 10.0, 20.0]) / 10)
    sim, se = res.comm_coverage(tau)
    assert np.all(np.abs(sim - model.coverage(tau)) <= np.maximum(0.015, 3 * se))
