import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.special import gamma as gamma_fn

from coopsense.geometry import (ClusterDistances, PointSet, antenna_gain, exclusion_radius_logpdf,
                                los_probability, ordered_distance_logpdf, qmc_ordered_distances,
                                sample_network, sample_ordered_distances, wrap_angle)

LAM = 7e-5


def mean_kth_distance(k, lam):
    # E[R_k] = Gamma(k + 1/2) / (Gamma(k) sqrt(pi lam))
    return gamma_fn(k + 0.5) / (gamma_fn(k) * np.sqrt(np.pi * lam))


def test_sampled_ordered_distance_means(rng):
    r = sample_ordered_distances(LAM, 4, rng, size=200_000)
    expect = [mean_kth_distance(k, LAM) for k in range(1, 5)]
    np.testing.assert_allclose(r.mean(axis=0), expect, rtol=5e-3)
    assert np.all(np.diff(r, axis=1) >= 0)


def test_qmc_distances_shape_and_means():
    r = qmc_ordered_distances(LAM, 3, 4096, seed=1, replicates=4)
    assert r.shape == (4, 4096, 3)
    expect = [mean_kth_distance(k, LAM) for k in range(1, 4)]
    np.testing.assert_allclose(r.reshape(-1, 3).mean(axis=0), expect, rtol=2e-3)


def test_qmc_is_seeded():
    a = qmc_ordered_distances(LAM, 2, 256, seed=5, replicates=2)
    b = qmc_ordered_distances(LAM, 2, 256, seed=5, replicates=2)
    c = qmc_ordered_distances(LAM, 2, 256, seed=6, replicates=2)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_nearest_distance_density_normalised():
    f = lambda r: np.exp(ordered_distance_logpdf(np.array([r]), LAM))
    val, _ = integrate.quad(f, 0, np.inf)
    assert val == pytest.approx(1.0, rel=1e-8)


def test_two_point_density_normalised():
    f = lambda r2, r1: np.exp(ordered_distance_logpdf(np.array([r1, r2]), LAM))
    val, _ = integrate.dblquad(f, 0, 2000, lambda r1: r1, lambda r1: 2000)
    assert val == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("n_c", [1, 2, 4])
def test_exclusion_radius_density_normalised(n_c):
    r1 = 40.0
    f = lambda r: np.exp(exclusion_radius_logpdf(r, r1, LAM, n_c))
    val, _ = integrate.quad(f, r1, np.inf, limit=200)
    assert val == pytest.approx(1.0, rel=1e-7)


def test_los_probability():
    assert los_probability(0.0, 0.0149) == 1.0
    assert los_probability(100.0, 0.0149) == pytest.approx(np.exp(-1.49))


def test_antenna_patterns():
    g = antenna_gain(np.array([0.0, 0.1, 0.2]), "flat_top", 100.0, beamwidth=np.radians(18))
    np.testing.assert_array_equal(g, [100.0, 100.0, 0.0])
    q = 10.0
    g = antenna_gain(np.array([0.0, np.pi / q, np.pi / (2 * q)]), "cosine", 100.0, q=q)
    np.testing.assert_allclose(g, [100.0, 0.0, 50.0], atol=1e-12)
    with pytest.raises(ValueError):
        antenna_gain(0.0, "horn", 1.0)


def test_cluster_distances_validation():
    assert ClusterDistances([1.0, 2.0]).n_c == 2
    with pytest.raises(ValueError):
        ClusterDistances([2.0, 1.0])
    with pytest.raises(ValueError):
        ClusterDistances([])


def test_sample_network_counts(rng):
    counts = [len(sample_network(LAM, 1e6, rng)) for _ in range(400)]
    assert np.mean(counts) == pytest.approx(70.0, rel=0.03)
    ps = sample_network(LAM, 1e6, rng)
    assert isinstance(ps, PointSet) and np.all(np.abs(ps.xy) <= 500.0)
    with pytest.raises(ValueError):
        sample_network(LAM, 0.0, rng)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e3, 1e3, allow_nan=False))
def test_wrap_angle_range(theta):
    w = float(wrap_angle(theta))
    assert -np.pi < w <= np.pi + 1e-12
    assert np.cos(w) == pytest.approx(np.cos(theta), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(n_c=st.integers(1, 8), seed=st.integers(0, 2**31))
def test_ordered_distances_sorted(n_c, seed):
    r = sample_ordered_distances(LAM, n_c, np.random.default_rng(seed), size=50)
    assert np.all(r > 0) and np.all(np.diff(r, axis=1) >= 0)
