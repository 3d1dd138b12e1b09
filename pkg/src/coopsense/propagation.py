"""Path loss, radar-equation echo means, fading and RCS draws."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOS, NLOS = "los", "nlos"


@dataclass(frozen=True)
class EchoMeans:
    mu_mono: float
    mu_bi: np.ndarray


def pathloss(r, link_class, dp):
    """Linear attenuation ``C r^-alpha`` of a LoS or NLoS link."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("path loss undefined at r <= 0")
    p = dp.params
    if link_class == LOS:
        return dp.c_los * r ** (-p.alpha_los)
    if link_class == NLOS:
        return dp.c_nlos * r ** (-p.alpha_nlos)
    raise ValueError(f"unknown link class {link_class!r}")


def echo_mean_mono(r1, dp):
    p = dp.params
    return dp.echo_const * p.rcs_mono / np.asarray(r1, dtype=float) ** (2 * p.alpha_los)


def echo_mean_bi(r1, rn, dp):
    p = dp.params
    r1 = np.asarray(r1, dtype=float)
    rn = np.asarray(rn, dtype=float)
    return dp.echo_const * p.rcs_bi / (r1**p.alpha_los * rn**p.alpha_los)


def echo_means(r, dp) -> EchoMeans:
    r = np.asarray(r, dtype=float)
    return EchoMeans(float(echo_mean_mono(r[0], dp)), echo_mean_bi(r[0], r[1:], dp))


def sample_fading(link_class, dp, rng, size=None):
    """Unit-mean Nakagami power gains (Gamma with shape m)."""
    m = dp.params.nakagami_m_los if link_class == LOS else dp.params.nakagami_m_nlos
    return rng.gamma(m, 1.0 / m, size)


def sample_rcs(kind, dp, rng, size=None):
    """Swerling-I RCS: exponential with the mono- or bistatic mean (m^2)."""
    mean = dp.params.rcs_mono if kind == "mono" else dp.params.rcs_bi
    return rng.exponential(mean, size)
