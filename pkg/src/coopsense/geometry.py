"""Point-process sampling, ordered distances, blockage and beam alignment."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


@dataclass(frozen=True)
class ClusterDistances:
    """Ordered target-to-BS distances ``R_1 <= ... <= R_Nc`` (m)."""

    r: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if r.ndim != 1 or r.size < 1:
            raise ValueError("cluster distances must be a non-empty vector")
        if np.any(r <= 0) or np.any(np.diff(r) < 0):
            raise ValueError("cluster distances must be positive and nondecreasing")
        object.__setattr__(self, "r", r)

    @property
    def n_c(self) -> int:
        return self.r.size


@dataclass(frozen=True)
class PointSet:
    """BS coordinates (m) in a square of side ``side`` centred on the target."""

    xy: np.ndarray
    side: float

    def __post_init__(self):
        half = self.side / 2
        if self.xy.size and np.any(np.abs(self.xy) > half + 1e-9):
            raise ValueError("points outside the region")

    def __len__(self):
        return len(self.xy)

    @property
    def distances(self) -> np.ndarray:
        return np.hypot(self.xy[:, 0], self.xy[:, 1])


def los_probability(r, eta_b):
    return np.exp(-eta_b * np.asarray(r, dtype=float))


def wrap_angle(theta):
    """Map angles to (-pi, pi]."""
    return -((-np.asarray(theta) + np.pi) % (2 * np.pi) - np.pi)


def antenna_gain(theta, model, g_m, q=None, beamwidth=None):
    """Linear gain at angular offset ``theta`` (rad) from boresight.

    ``cosine`` uses ``G_m cos^2(q theta / 2)`` inside ``|theta| <= pi/q``;
    ``flat_top`` uses ``G_m`` inside ``|theta| <= beamwidth/2``.
    """
    theta = np.abs(wrap_angle(theta))
    if model == "cosine":
        return np.where(theta <= np.pi / q, g_m * np.cos(q * theta / 2) ** 2, 0.0)
    if model == "flat_top":
        return np.where(theta <= beamwidth / 2, g_m, 0.0)
    raise ValueError(f"unknown antenna model {model!r}")


def beam_hit_probability(r, dp):
    """Probability that a BS at distance ``r`` has LoS to the target and one
    of its beams covers it."""
    return los_probability(r, dp.params.blockage_eta) * dp.beam_fraction


def ordered_from_exponentials(e, lambda_bs):
    """Map unit-rate exponential increments (..., n) to ordered distances.

    Uses the fact that ``pi lambda R_k^2`` is the k-th arrival of a unit
    Poisson process.
    """
    return np.sqrt(np.cumsum(e, axis=-1) / (np.pi * lambda_bs))


def sample_ordered_distances(lambda_bs, n_c, rng, size=None):
    shape = (n_c,) if size is None else (size, n_c)
    return ordered_from_exponentials(rng.exponential(size=shape), lambda_bs)


def qmc_ordered_distances(lambda_bs, n_c, n, seed, replicates=1):
    """Scrambled-Sobol ordered distances, shape ``(replicates, n, n_c)``."""
    from scipy.stats import qmc

    ss = np.random.SeedSequence(seed)
    out = np.empty((replicates, n, n_c))
    m = int(np.ceil(np.log2(max(n, 2))))
    for i, child in enumerate(ss.spawn(replicates)):
        sob = qmc.Sobol(d=n_c, scramble=True, seed=np.random.default_rng(child))
        u = sob.random_base2(m)[:n]
        u = np.clip(u, 1e-16, 1 - 1e-16)
        out[i] = ordered_from_exponentials(-np.log1p(-u), lambda_bs)
    return out


def ordered_distance_logpdf(r, lambda_bs):
    """Log joint density of the ``N_c`` nearest PPP distances."""
    r = np.asarray(r, dtype=float)
    n_c = r.shape[-1]
    ok = np.all(r > 0, axis=-1) & np.all(np.diff(r, axis=-1) > 0, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (n_c * np.log(2 * np.pi * lambda_bs) + np.sum(np.log(r), axis=-1)
               - np.pi * lambda_bs * r[..., -1] ** 2)
    return np.where(ok, val, -np.inf)


def exclusion_radius_logpdf(r_next, r1, lambda_bs, n_c):
    """Log density of the (N_c+1)-th nearest distance given the nearest, ``R_1``."""
    r_next = np.asarray(r_next, dtype=float)
    d = r_next**2 - r1**2
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (np.log(2.0) + n_c * np.log(np.pi * lambda_bs) - gammaln(n_c)
               + (n_c - 1) * np.log(d) + np.log(r_next) - np.pi * lambda_bs * d)
    if n_c == 1:
        val = np.where(d == 0, np.log(2 * np.pi * lambda_bs * r_next), val)
    return np.where(d >= 0, val, -np.inf)


def sample_network(lambda_bs, area, rng):
    """Homogeneous PPP on a square of ``area`` m^2 centred on the origin."""
    if not area > 0:
        raise ValueError("region area must be positive")
    side = float(np.sqrt(area))
    n = rng.poisson(lambda_bs * area)
    return PointSet(xy=(rng.random((n, 2)) - 0.5) * side, side=side)
