"""Downlink coverage and ergodic rate of the typical mobile user.

The user is served over LoS by its nearest BS (distance ``R_0``, Rayleigh).
Interferers are the BSs beyond ``R_0`` with a transmit beam covering the
user, a PPP of intensity ``lambda_BS N_b theta_b / 2 pi`` split into LoS and
NLoS by the blockage law. The omnidirectional user applies no receive-beam
thinning, and residual self-interference does not enter the downlink SINR.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .quadrature import QuadratureSpec, gauss_kronrod, log_exponential_rule
from .sensing import CoverageEstimate, _one_minus_nakagami_mgf, rate_integral, series_coefficients


@dataclass
class CommModel:
    """Analytic downlink engine. ``interference`` and ``noise`` toggle terms."""

    dp: object
    spec: QuadratureSpec = QuadratureSpec()
    interference: bool = True
    noise: bool = True
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.dp.params
        m = p.nakagami_m_los
        if abs(m - round(m)) > 1e-12:
            raise ValueError("the desired-link series needs an integer LoS Nakagami parameter")
        self.m = int(round(m))
        self.eta = float(np.exp(-gammaln(1 + self.m) / self.m))
        self.coef = series_coefficients(np.asarray(float(self.m)), self.m)
        self.intensity = self.dp.lambda_bs * self.dp.beam_fraction
        # at high thresholds the coverage lives at tiny serving distances, so
        # the average runs over log(pi lambda R_0^2)
        v, self._w = log_exponential_rule(self.spec.log_panels)
        self._r0 = np.sqrt(v / (np.pi * self.dp.lambda_bs))

    def signal_mean(self, r0):
        dp = self.dp
        return dp.p_c * dp.beam_gain * dp.c_los * np.asarray(r0, dtype=float) ** (-dp.params.alpha_los)

    def interference_exponent(self, r0, y):
        """``2 pi lambda int_{R_0}^inf E[1 - exp(-s I(r))] r dr`` with
        ``y = s * signal_mean(R_0)`` (paired arrays)."""
        p = self.dp.params
        r0 = np.asarray(r0, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        eta = p.blockage_eta
        # per-interferer mean received power relative to the serving mean
        yl = y * r0**p.alpha_los
        yn = y * (self.dp.c_nlos / self.dp.c_los) * r0**p.alpha_los

        def f_los(r, o):
            return np.exp(-eta * r) * _one_minus_nakagami_mgf(
                yl[o][:, None] * r ** (-p.alpha_los), p.nakagami_m_los) * r

        def f_nlos(r, o):
            return -np.expm1(-eta * r) * _one_minus_nakagami_mgf(
                yn[o][:, None] * r ** (-p.alpha_nlos), p.nakagami_m_nlos) * r

        sc_l = np.maximum(r0, np.minimum(np.maximum(yl ** (1 / p.alpha_los), 1.0), 1 / eta))
        sc_n = np.maximum(np.maximum(r0, yn ** (1 / p.alpha_nlos)), 1 / eta)
        jl, _ = gauss_kronrod(f_los, r0, scale=sc_l, spec=self.spec)
        jn, _ = gauss_kronrod(f_nlos, r0, scale=sc_n, spec=self.spec)
        return 2 * np.pi * self.intensity * (jl + jn)

    def conditional_coverage(self, r0, tau):
        """Coverage given the serving distance; returns ``(len(r0), len(tau))``."""
        r0 = np.atleast_1d(np.asarray(r0, dtype=float))
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        z = np.arange(1, self.m + 1, dtype=float)
        # s = z eta m tau / S(R_0), so y = s S(R_0) is distance free
        y = (z[None, None, :] * self.eta * self.m) * tau[None, :, None]
        y = np.broadcast_to(y, (r0.size, tau.size, z.size))
        rr = np.broadcast_to(r0[:, None, None], y.shape)
        log_lt = np.zeros(y.shape)
        if self.noise:
            log_lt -= y * self.dp.noise_power / self.signal_mean(rr)
        if self.interference:
            log_lt -= self.interference_exponent(rr, y).reshape(y.shape)
        out = np.exp(log_lt) @ self.coef
        return np.clip(out, 0.0, 1.0)

    def coverage(self, tau):
        """Average over the Rayleigh serving distance."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        return self._w @ self.conditional_coverage(self._r0, tau)

    def duty_factor(self):
        return (self.dp.t_t - self.dp.t_s) / self.dp.t_t

    def rate(self, eps=1e-7):
        """``N_b (T_t - T_s)/T_t int_0^inf P_C(e^t - 1) dt`` in nats/s/Hz."""
        val, info = rate_integral(lambda t: self.coverage(np.expm1(t)), eps=eps)
        self.info = info
        factor = self.dp.params.n_beams * self.duty_factor()
        return CoverageEstimate(np.asarray(factor * val), np.asarray(0.0), dict(info))


def comm_coverage(tau, dp, spec=QuadratureSpec(), **kw):
    return CommModel(dp, spec, **kw).coverage(tau)


def comm_rate(dp, spec=QuadratureSpec(), **kw):
    return CommModel(dp, spec, **kw).rate()
