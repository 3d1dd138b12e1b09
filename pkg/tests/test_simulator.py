import numpy as np
import pytest

from coopsense.acceptance import noise_only_closed_form
from coopsense.params import SimulationConfig
from coopsense.simulator import (_distances_batch, fan_offset, realize, run_meta, run_simulation,
                                 sensing_sinr, sorted_network, substreams)


def test_substreams_are_reproducible_and_distinct():
    a = substreams(1, 5)["rcs"].random(3)
    b = substreams(1, 5)["rcs"].random(3)
    c = substreams(1, 6)["rcs"].random(3)
    d = substreams(1, 5)["fade_los"].random(3)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)


def test_fan_offset_range():
    ang = np.linspace(-10, 10, 1001)
    off = fan_offset(ang, 0.3, 8)
    assert np.all(off >= 0) and np.all(off <= np.pi / 8 + 1e-12)
    assert fan_offset(0.3 + 2 * np.pi / 8, 0.3, 8) == pytest.approx(0.0, abs=1e-12)


def test_smaller_region_is_prefix(dp):
    small = sorted_network(dp.lambda_bs, 1000.0, *(np.random.default_rng(s) for s in (1, 2))).xy
    big = sorted_network(dp.lambda_bs, 2000.0, *(np.random.default_rng(s) for s in (1, 2))).xy
    inside = big[np.all(np.abs(big) <= 500.0, axis=1)]
    np.testing.assert_array_equal(small, inside)
    assert np.all(np.diff(np.hypot(*big.T)) >= 0)


def test_realization_invariants(dp):
    nr = realize(dp, 4e6, substreams(3, 0))
    to_t = np.arctan2(-nr.points.xy[0, 1], -nr.points.xy[0, 0])
    assert fan_offset(to_t, nr.phases[0], dp.params.n_beams) == pytest.approx(0.0, abs=1e-12)
    assert nr.los_target[0]
    assert np.all(np.diff(nr.distances) >= 0)
    assert nr.digest() == realize(dp, 4e6, substreams(3, 0)).digest()


def test_illumination_fraction(dp):
    hits, total = 0, 0
    half = dp.beamwidth / 2
    for i in range(40):
        nr = realize(dp, 4e6, substreams(8, i))
        to_t = np.arctan2(-nr.points.xy[1:, 1], -nr.points.xy[1:, 0])
        hits += int(np.sum(fan_offset(to_t, nr.phases[1:], dp.params.n_beams) <= half))
        total += nr.distances.size - 1
    frac = hits / total
    assert abs(frac - dp.beam_fraction) < 4 * np.sqrt(dp.beam_fraction * (1 - dp.beam_fraction) / total)


def test_power_accounting(dp):
    st = substreams(4, 1)
    nr = realize(dp, 4e6, st)
    oc = sensing_sinr(nr, dp, st, (1, 2, 4, 8))
    total = oc.p_tot + oc.i_target
    np.testing.assert_allclose(total, total[:, :1] * np.ones_like(total), rtol=1e-12)
    assert np.all(np.diff(oc.p_tot[0]) >= 0)


def test_worker_count_does_not_change_results(dp):
    cfg = SimulationConfig(realizations=40, seed=9, area_km2=4.0)
    a = run_simulation(dp, cfg.replace(workers=1), (1, 4), chunk=10)
    b = run_simulation(dp, cfg.replace(workers=2), (1, 4), chunk=10)
    assert a.digest == b.digest
    np.testing.assert_array_equal(a.sensing_sinr, b.sensing_sinr)


def test_noise_only_against_closed_form(dp):
    tau = np.array([1.0, 10.0])
    res = run_simulation(dp, SimulationConfig(realizations=3000, seed=5, area_km2=1.0, workers=1), (1,),
                         components={"noise"}, comm=False)
    cov, se = res.sensing_coverage(tau)
    exact = noise_only_closed_form(dp, tau)
    assert np.all(np.abs(cov[0] - exact) <= 3 * se[0])


def test_distances_batch_places_cluster(dp):
    radii = np.array([20.0, 35.0, 60.0])
    xy, ph, los_t, valid, cc = _distances_batch(dp, radii, 16, substreams(2, 0), 1000.0)
    np.testing.assert_allclose(np.hypot(xy[:, :3, 0], xy[:, :3, 1]), np.broadcast_to(radii, (16, 3)))
    d = np.hypot(xy[..., 0], xy[..., 1])
    assert np.all(d[:, 3:][valid[:, 3:]] > radii[-1])
    assert np.all(los_t[:, 0])


@pytest.mark.parametrize("mode", ["distances", "full_geometry"])
def test_run_meta_reproducible(dp, mode):
    cfg = SimulationConfig(meta_outer=6, meta_inner=50, seed=3, conditioning=mode, area_km2=4.0, workers=1)
    c1, cond1 = run_meta(dp, cfg, 10 ** 0.5, 2, [0.5])
    c2, cond2 = run_meta(dp, cfg, 10 ** 0.5, 2, [0.5])
    np.testing.assert_array_equal(cond1, cond2)
    assert np.all((0 <= cond1) & (cond1 <= 1))
    assert c1.info["digest"] == c2.info["digest"]
