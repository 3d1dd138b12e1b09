"""Analytic cooperative sensing: echo moments, Gamma surrogate, interference
Laplace transforms, conditional/average coverage and the ergodic sensing rate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline
from scipy.special import gammaln, rgamma, roots_laguerre, roots_legendre

from .geometry import beam_hit_probability, qmc_ordered_distances
from .propagation import echo_mean_bi, echo_mean_mono
from .quadrature import QuadratureSpec, gauss_kronrod, laguerre_expectation

COMPONENTS = frozenset({"target", "cochannel", "noise", "si"})
EXCLUSION_RULES = ("cluster_edge", "order_statistic")
COCHANNEL_MODELS = ("independent", "lobe")
SHAPE_RULES = ("generalized", "rounded")


# ---------------------------------------------------------------------------
# moment matching

@dataclass(frozen=True)
class GammaSurrogate:
    k_eff: np.ndarray
    theta_eff: np.ndarray
    eta: np.ndarray


def echo_moments(r, dp):
    """Mean and variance of the combined echo power for distances ``r``.

    ``r`` has shape ``(..., N_c)``; the first column is the sensing BS.
    """
    r = np.asarray(r, dtype=float)
    mu0 = echo_mean_mono(r[..., 0], dp)
    if r.shape[-1] == 1:
        return mu0, mu0**2
    mu = echo_mean_bi(r[..., :1], r[..., 1:], dp)
    p = beam_hit_probability(r[..., 1:], dp)
    mean = mu0 + np.sum(p * mu, axis=-1)
    var = mu0**2 + np.sum(p * (2 - p) * mu**2, axis=-1)
    return mean, var


def gamma_match(mean, var) -> GammaSurrogate:
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    if np.any(mean <= 0) or np.any(var <= 0):
        raise ValueError("moment matching needs positive mean and variance")
    k = mean**2 / var
    # exact-exponential inputs should land on k = 1, not 1 +/- ulp
    k = np.where(np.abs(k - 1) < 1e-12, 1.0, k)
    eta = np.exp(-gammaln(1 + k) / k)
    return GammaSurrogate(k_eff=k, theta_eff=var / mean, eta=eta)


def rounded_surrogate(mean, var) -> GammaSurrogate:
    """Integer-shape surrogate ``k = max(1, round(E^2/Var))``, ``theta = E/k``."""
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    if np.any(mean <= 0) or np.any(var <= 0):
        raise ValueError("moment matching needs positive mean and variance")
    k = np.maximum(1.0, np.round(mean**2 / var))
    eta = np.exp(-gammaln(1 + k) / k)
    return GammaSurrogate(k_eff=k, theta_eff=mean / k, eta=eta)


# ---------------------------------------------------------------------------
# Gamma-tail series

def series_coefficients(k, n):
    """``(-1)^(z+1) binom(k, z)`` for ``z = 1..n``; shape ``k.shape + (n,)``."""
    k = np.asarray(k, dtype=float)
    out = np.empty(k.shape + (n,))
    b = k.copy()
    out[..., 0] = b
    for z in range(2, n + 1):
        b = b * (k - z + 1) / z
        out[..., z - 1] = b if z % 2 else -b
    return out


def _tail_rule(k, x0, n_nodes):
    """Nodes ``x`` and weights ``w`` with ``sum_{z > x0 - 1/2} c_z f(z) ~ sum w f(x)``.

    Uses the integral (midpoint Euler-Maclaurin) form of the series tail with
    ``c(x) = -Gamma(x - k) / (Gamma(-k) Gamma(x + 1))`` and the substitution
    ``x = x0 exp(t / k)`` against a Gauss-Laguerre rule in ``t``.
    """
    t, w = roots_laguerre(n_nodes)
    kk = np.maximum(np.asarray(k, dtype=float), 0.25)[..., None]
    x = x0 * np.exp(t / kk)
    log_mag = gammaln(x - kk) - gammaln(x + 1) + np.log(x)
    weights = -rgamma(-kk) * np.exp(np.log(w) + t + log_mag) / kk
    return x, weights


def gamma_tail_series(k, b, laplace, spec: QuadratureSpec, n_explicit=None, n_tail=24):
    """``E[1 - (1 - exp(-b I))^k]`` from the Laplace transform of ``I``.

    ``k`` and ``b`` broadcast against each other; ``laplace(s)`` must accept
    arrays of the broadcast shape with one trailing axis. Returns the series
    value and a dict of diagnostics.
    """
    k = np.asarray(k, dtype=float)
    b = np.asarray(b, dtype=float)
    kb, bb = np.broadcast_arrays(k, b)
    kmax = float(np.max(kb)) if kb.size else 1.0
    integer = bool(np.all(np.abs(kb - np.round(kb)) < 1e-12))
    if n_explicit is None:
        if integer:
            n_explicit = max(1, int(round(kmax)))
        else:
            n_explicit = int(min(spec.z_max, max(24, 2 * np.ceil(kmax) + 8)))
    z = np.arange(1, n_explicit + 1, dtype=float)
    coef = series_coefficients(kb, n_explicit)
    explicit = coef * laplace(bb[..., None] * z)
    total = np.sum(explicit, axis=-1)
    integer = integer and kmax <= n_explicit
    tail = np.zeros_like(total)
    if not integer:
        x, w = _tail_rule(kb, n_explicit + 0.5, n_tail)
        tail = np.sum(w * laplace(bb[..., None] * x), axis=-1)
        total = total + tail
    info = {
        "n_explicit": n_explicit,
        "tail_max": float(np.max(np.abs(tail))) if tail.size else 0.0,
        "last_term_max": float(np.max(np.abs(explicit[..., -1]))) if explicit.size else 0.0,
        "k_below_one": int(np.sum(kb < 1 - 1e-9)),
    }
    return total, info


# ---------------------------------------------------------------------------
# interference Laplace transforms

def _one_minus_nakagami_mgf(y, m):
    # 1 - (1 + y/m)^-m, accurate for small y
    return -np.expm1(-m * np.log1p(y / m))


class CochannelLT:
    """Laplace transform of the aggregate LoS+NLoS co-channel interference.

    Beyond an exclusion radius ``R_I`` (distributed as the nearest-BS
    distance) the aligned interferers form a PPP of intensity ``lambda_I``,
    split into LoS/NLoS by the blockage law. Values are tabulated on a log-s
    grid; ``exact`` evaluates the nested integrals directly.
    """

    def __init__(self, dp, spec: QuadratureSpec = QuadratureSpec()):
        self.dp = dp
        self.spec = spec
        p = dp.params
        self.a_los = dp.p_c * dp.beam_gain**2 * dp.c_los
        self.a_nlos = dp.p_c * dp.beam_gain**2 * dp.c_nlos
        v, self._w = laguerre_expectation(spec.laguerre_nodes, 1.0)
        self._r_i = np.sqrt(v / (np.pi * dp.lambda_bs))
        # s range: from "interference negligible" to "beyond any noise floor"
        self.s_lo = 1e-8 / self.a_los
        self.s_hi = max(1e3 / max(dp.floor_power, 1e-300), 1e12 / self.a_los)
        self.s_hi = min(self.s_hi, 1e40 / self.a_los)
        decades = np.log10(self.s_hi / self.s_lo)
        n = int(np.ceil(decades * spec.table_per_decade)) + 1
        self._log_s = np.linspace(np.log(self.s_lo), np.log(self.s_hi), n)
        neg_log = -np.log(self.exact(np.exp(self._log_s)))
        self._spline = CubicSpline(self._log_s, np.log(np.maximum(neg_log, 1e-300)))

    def j_integrals(self, r_i, s):
        """``J_L + J_N`` for paired arrays ``r_i`` and ``s``."""
        p = self.dp.params
        eta = p.blockage_eta
        r_i = np.asarray(r_i, dtype=float).ravel()
        s = np.asarray(s, dtype=float).ravel()
        yl = s * self.a_los
        yn = s * self.a_nlos

        def f_los(r, o):
            return np.exp(-eta * r) * _one_minus_nakagami_mgf(
                yl[o][:, None] * r ** (-p.alpha_los), p.nakagami_m_los) * r

        def f_nlos(r, o):
            return -np.expm1(-eta * r) * _one_minus_nakagami_mgf(
                yn[o][:, None] * r ** (-p.alpha_nlos), p.nakagami_m_nlos) * r

        r_star_l = (yl / p.nakagami_m_los) ** (1 / p.alpha_los)
        r_star_n = (yn / p.nakagami_m_nlos) ** (1 / p.alpha_nlos)
        sc_l = np.maximum(r_i, np.minimum(np.maximum(r_star_l, 1.0), 1 / eta))
        sc_n = np.maximum(np.maximum(r_i, r_star_n), 1 / eta)
        jl, _ = gauss_kronrod(f_los, r_i, scale=sc_l, spec=self.spec)
        jn, _ = gauss_kronrod(f_nlos, r_i, scale=sc_n, spec=self.spec)
        return jl + jn

    def exact(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        flat = s.ravel()
        rr, ss = np.meshgrid(self._r_i, flat, indexing="ij")
        j = self.j_integrals(rr, ss).reshape(rr.shape)
        out = self._w @ np.exp(-self.dp.xi * j)
        return out.reshape(s.shape)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.ones_like(s)
        pos = s > 0
        if not np.any(pos):
            return out
        ls = np.log(s[pos])
        lo, hi = self._log_s[0], self._log_s[-1]
        inside = np.clip(ls, lo, hi)
        val = self._spline(inside)
        # slope-matched linear extrapolation outside the table
        d_lo = self._spline(lo, 1)
        d_hi = self._spline(hi, 1)
        val = np.where(ls < lo, val + d_lo * (ls - lo), val)
        val = np.where(ls > hi, val + d_hi * (ls - hi), val)
        out[pos] = np.exp(-np.exp(val))
        return out


class LobeCochannelLT:
    """Co-channel LT with the receive-lobe geometry conditioned on the cluster.

    The sensing BS's receive lobe points at the target, and given the cluster
    no other BS lies closer to the target than ``R_Nc``. Along lobe direction
    ``phi`` the aligned PPP therefore starts at
    ``R_1 cos(phi) + sqrt(R_Nc^2 - R_1^2 sin^2(phi))``. Cluster members 2..N_c
    interfere when they fall inside the lobe; each is averaged over its
    uniform angle around the target. The radial integrals reuse
    ``CochannelLT.j_integrals`` through a (log r, log s) table.
    """

    def __init__(self, base: CochannelLT, phi_nodes=16, psi_nodes=24):
        self.base = base
        dp = self.dp = base.dp
        p = dp.params
        self.half = dp.beamwidth / 2
        x, w = roots_legendre(phi_nodes)
        self._phi, self._wphi = self.half * x, self.half * w
        self._x_psi, self._w_psi = roots_legendre(psi_nodes)
        self.r_lo, self.r_hi = 0.1, 2e4
        per = base.spec.table_per_decade
        n_r = int(np.ceil(np.log10(self.r_hi / self.r_lo) * per)) + 1
        self._lr = np.linspace(np.log(self.r_lo), np.log(self.r_hi), n_r)
        self._ls = base._log_s
        rr, ss = np.meshgrid(np.exp(self._lr), np.exp(self._ls), indexing="ij")
        j = base.j_integrals(rr, ss).reshape(rr.shape)
        self._spline = RectBivariateSpline(self._lr, self._ls, np.log(np.maximum(j, 1e-300)))
        self.alpha = (p.alpha_los, p.alpha_nlos)
        self.m = (p.nakagami_m_los, p.nakagami_m_nlos)

    def j_table(self, r0, s):
        lr = np.log(np.clip(r0, self.r_lo, self.r_hi))
        ls = np.log(np.maximum(s, 1e-300))
        lo, hi = self._ls[0], self._ls[-1]
        val = np.exp(self._spline.ev(lr, np.clip(ls, lo, hi)))
        # J is linear in s below the table; beyond r_hi only the NLoS r^-2 tail is left
        val = np.where(ls < lo, val * np.exp(ls - lo), val)
        return np.where(r0 > self.r_hi, val * (self.r_hi / np.maximum(r0, self.r_hi)) ** 2, val)

    def _link(self, d, s):
        """``E[1 - exp(-s I)]`` for one aligned interferer at distance ``d``."""
        p_los = np.exp(-self.dp.params.blockage_eta * d)
        a = self.base.a_los, self.base.a_nlos
        los = _one_minus_nakagami_mgf(s * a[0] * d ** (-self.alpha[0]), self.m[0])
        nlos = _one_minus_nakagami_mgf(s * a[1] * d ** (-self.alpha[1]), self.m[1])
        return p_los * los + (1 - p_los) * nlos

    def __call__(self, s, r):
        """Transform at ``s`` given ordered distances ``r`` (last axis ``N_c``,
        broadcasting against ``s``)."""
        s = np.asarray(s, dtype=float)
        r = np.asarray(r, dtype=float)
        r1, re = r[..., :1], r[..., -1:]
        beta = self.dp.beam_fraction
        sin, cos = np.sin(self._phi), np.cos(self._phi)
        r_void = r1 * cos + np.sqrt(np.maximum(re**2 - (r1 * sin) ** 2, 0.0))
        j = self.j_table(r_void, s[..., None])
        log_out = -self.dp.lambda_bs * beta * (j @ self._wphi)
        hw = self.half
        for n in range(1, r.shape[-1]):
            rn = r[..., n:n + 1]
            # the lobe meets the circle of radius r_n in an arc centred opposite the sensing BS
            d_w = r1 * np.cos(hw) + np.sqrt(rn**2 - (r1 * np.sin(hw)) ** 2)
            arc = np.pi - np.arctan2(d_w * np.sin(hw), r1 - d_w * np.cos(hw))
            psi = np.pi + arc * self._x_psi
            d = np.sqrt(r1**2 + rn**2 - 2 * r1 * rn * np.cos(psi))
            hit = (self._link(d, s[..., None]) @ self._w_psi) * arc[..., 0] / (2 * np.pi)
            log_out = log_out + np.log1p(-beta * hit)
        return np.exp(log_out)


class TargetLT:
    """Laplace transform of target-reflected interference.

    Reflectors are BSs beyond an exclusion radius around the target whose
    beams illuminate it over LoS (intensity ``lambda_BS p_LOS(r) N_b theta_b /
    2 pi``), each producing an exponentially distributed bistatic echo. The
    inner radial integral

        J(rho, x) = int_rho^inf p_LOS(r) x r^-a / (1 + x r^-a) r dr,
        x = s P_s G^2 lambda^2 sigma_bi / ((4 pi)^3 R_1^a)

    is tabulated on a (log rho, log x) grid.
    """

    def __init__(self, dp, spec: QuadratureSpec = QuadratureSpec()):
        self.dp = dp
        self.spec = spec
        p = dp.params
        self.alpha = p.alpha_los
        self.eta = p.blockage_eta
        self.intensity = dp.lambda_bs * p.n_beams * dp.beamwidth  # 2 pi x PPP intensity
        self.x_const = dp.echo_const * p.rcs_bi
        per = spec.table_per_decade
        eta = self.eta
        # beyond rho_hi the whole reflector field is negligible
        rho_hi = 10.0 / eta
        while self.intensity * np.exp(-eta * rho_hi) * (1 + eta * rho_hi) / eta**2 > 1e-14:
            rho_hi *= 1.25
        self.rho_lo = min(1e-2, 1e-3 / eta)
        self.rho_hi = rho_hi
        sat = np.exp(gammaln(2 + self.alpha)) / eta ** (2 + self.alpha)
        self.x_lo = 1e-16 * self.rho_lo**self.alpha
        self.x_hi = 1e12 * sat
        n_rho = int(np.ceil(np.log10(self.rho_hi / self.rho_lo) * per)) + 1
        n_x = int(np.ceil(np.log10(self.x_hi / self.x_lo) * per)) + 1
        self._lr = np.linspace(np.log(self.rho_lo), np.log(self.rho_hi), n_rho)
        self._lx = np.linspace(np.log(self.x_lo), np.log(self.x_hi), n_x)
        rr, xx = np.meshgrid(np.exp(self._lr), np.exp(self._lx), indexing="ij")
        j = self.j_integral(rr, xx).reshape(rr.shape)
        self._spline = RectBivariateSpline(self._lr, self._lx, np.log(np.maximum(j, 1e-300)))

    def j_saturated(self, rho):
        eta = self.eta
        return np.exp(-eta * rho) * (1 + eta * rho) / eta**2

    def j_integral(self, rho, x):
        """Direct quadrature of ``J(rho, x)`` for paired arrays."""
        rho = np.asarray(rho, dtype=float).ravel()
        x = np.asarray(x, dtype=float).ravel()
        a, eta = self.alpha, self.eta

        def f(r, o):
            y = x[o][:, None] * r ** (-a)
            return np.exp(-eta * r) * (y / (1 + y)) * r

        r_star = x ** (1 / a)
        scale = np.maximum(rho, np.clip(r_star, 1.0, 1 / eta))
        val, _ = gauss_kronrod(f, rho, scale=scale, spec=self.spec)
        return val

    def j_table(self, rho, x):
        rho = np.asarray(rho, dtype=float)
        x = np.asarray(x, dtype=float)
        lr = np.log(np.clip(rho, self.rho_lo, self.rho_hi))
        lx = np.log(np.maximum(x, 1e-300))
        val = np.exp(self._spline.ev(lr, np.clip(lx, self._lx[0], self._lx[-1])))
        # J is linear in x below the table
        val = np.where(lx < self._lx[0], val * np.exp(lx - self._lx[0]), val)
        val = np.where(lx > self._lx[-1], self.j_saturated(np.exp(lr)), val)
        return np.where(rho > self.rho_hi, 0.0, val)

    def __call__(self, s, r1, r_edge):
        """Transform given the sensing distance and the exclusion radius."""
        s = np.asarray(s, dtype=float)
        x = s * self.x_const / np.asarray(r1, dtype=float) ** self.alpha
        return np.exp(-self.intensity * self.j_table(r_edge, x))

    def exact(self, s, r1, r_edge):
        s, r1, r_edge = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s, r1, r_edge)))
        x = s * self.x_const / r1**self.alpha
        j = self.j_integral(r_edge, x).reshape(s.shape)
        return np.exp(-self.intensity * j)

    def order_statistic(self, s, r1, n_c, exact=False):
        """Transform averaged over the (N_c+1)-th distance given ``R_1`` only."""
        u, w = laguerre_expectation(self.spec.laguerre_nodes, float(n_c))
        s = np.asarray(s, dtype=float)[..., None]
        r1 = np.asarray(r1, dtype=float)[..., None]
        rho = np.sqrt(r1**2 + u / (np.pi * self.dp.lambda_bs))
        fn = self.exact if exact else self.__call__
        return np.sum(w * fn(s, r1, rho), axis=-1)


def lt_cochannel(s, dp, spec=QuadratureSpec()):
    """Co-channel interference LT evaluated by direct nested quadrature."""
    return CochannelLT(dp, spec).exact(s)


def lt_target_reflected(s, r1, n_c, dp, spec=QuadratureSpec(), r_edge=None):
    """Target-reflected interference LT.

    With ``r_edge`` (the cluster edge distance ``R_Nc``) the reflector field is
    the PPP outside that disc; without it the exclusion radius is averaged
    over the (N_c+1)-th order-statistic law given ``R_1``.
    """
    lt = TargetLT(dp, spec)
    if r_edge is not None:
        return lt.exact(s, r1, r_edge)
    return lt.order_statistic(s, r1, n_c, exact=True)


# ---------------------------------------------------------------------------
# coverage

@dataclass
class CoverageEstimate:
    value: np.ndarray
    stderr: np.ndarray
    info: dict = field(default_factory=dict)


class SensingModel:
    """Analytic sensing engine for one parameter set and cluster size.

    ``components`` selects which impairments enter the SINR denominator
    (``target``, ``cochannel``, ``noise``, ``si``). ``exclusion`` chooses the
    reflector exclusion radius: ``cluster_edge`` uses the conditioned
    ``R_Nc``; ``order_statistic`` averages over the (N_c+1)-th distance law
    given ``R_1``. ``shape_rule`` is ``rounded`` (integer Gamma shape, finite
    binomial sum) or ``generalized`` (real shape, generalized binomial series).
    """

    def __init__(self, dp, n_c=None, spec: QuadratureSpec = QuadratureSpec(),
                 components=COMPONENTS, exclusion="cluster_edge", shape_rule="rounded",
                 cochannel="independent"):
        if exclusion not in EXCLUSION_RULES:
            raise ValueError(f"unknown exclusion rule {exclusion!r}")
        if shape_rule not in SHAPE_RULES:
            raise ValueError(f"unknown shape rule {shape_rule!r}")
        if cochannel not in COCHANNEL_MODELS:
            raise ValueError(f"unknown co-channel model {cochannel!r}")
        self.cochannel = cochannel
        self.shape_rule = shape_rule
        self.dp = dp
        self.n_c = dp.params.cluster_size if n_c is None else int(n_c)
        self.spec = spec
        self.components = frozenset(components)
        unknown = self.components - COMPONENTS
        if unknown:
            raise ValueError(f"unknown components {sorted(unknown)}")
        self.exclusion = exclusion
        self.target_lt = TargetLT(dp, spec) if "target" in self.components else None
        self.cochannel_lt = CochannelLT(dp, spec) if "cochannel" in self.components else None
        self.lobe_lt = None
        if self.cochannel_lt is not None and cochannel == "lobe":
            self.lobe_lt = LobeCochannelLT(self.cochannel_lt)
        floor = 0.0
        if "noise" in self.components:
            floor += dp.noise_power
        if "si" in self.components:
            floor += dp.residual_si
        self.floor = floor
        self.last_info = {}

    def laplace(self, s, r1, r_edge, r=None):
        """Total LT of the SINR denominator at ``s`` (broadcasting). The
        ``lobe`` co-channel model also needs the full distance vector ``r``."""
        out = np.exp(-s * self.floor)
        if self.lobe_lt is not None:
            out = out * self.lobe_lt(s, r)
        elif self.cochannel_lt is not None:
            out = out * self.cochannel_lt(s)
        if self.target_lt is not None:
            if self.exclusion == "cluster_edge":
                out = out * self.target_lt(s, r1, r_edge)
            else:
                out = out * self.target_lt.order_statistic(s, r1, self.n_c)
        return out

    def surrogate(self, r):
        match = rounded_surrogate if self.shape_rule == "rounded" else gamma_match
        return match(*echo_moments(r, self.dp))

    def conditional_coverage(self, r, tau, chunk=2048):
        """Coverage given ordered distances ``r`` (shape ``(N, N_c)`` or
        ``(N_c,)``) at thresholds ``tau`` (shape ``(T,)``); returns ``(N, T)``.
        """
        r = np.asarray(r, dtype=float)
        single = r.ndim == 1
        r = np.atleast_2d(r)
        if r.shape[-1] != self.n_c:
            raise ValueError(f"expected {self.n_c} distances per row, got {r.shape[-1]}")
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        g = self.surrogate(r)
        out = np.empty((r.shape[0], tau.size))
        info = {"k_below_one": int(np.sum(g.k_eff < 1 - 1e-9))}
        for lo in range(0, r.shape[0], chunk):
            sl = slice(lo, lo + chunk)
            b = (g.eta[sl, None] * tau[None, :]) / g.theta_eff[sl, None]
            r1 = r[sl, 0][:, None, None]
            re = r[sl, -1][:, None, None]
            rc = r[sl][:, None, None, :]
            val, inf = gamma_tail_series(
                g.k_eff[sl, None], b, lambda s: self.laplace(s, r1, re, rc), self.spec)
            out[sl] = val
            info["tail_max"] = max(info.get("tail_max", 0.0), inf["tail_max"])
            info["last_term_max"] = max(info.get("last_term_max", 0.0), inf["last_term_max"])
            info["n_explicit"] = inf["n_explicit"]
        self.last_info = info
        out = np.clip(out, 0.0, 1.0)
        return out[0] if single else out

    def geometry(self, n_geom=8192, seed=0, replicates=8):
        """Shared scrambled-Sobol geometry sample, ``(replicates, n, N_c)``."""
        n = max(1, n_geom // replicates)
        return qmc_ordered_distances(self.dp.lambda_bs, self.n_c, n, seed, replicates)

    def average_coverage(self, tau, n_geom=8192, seed=0, replicates=8, geometry=None):
        """Mean of the conditional coverage over the ordered-distance law.

        The outer integral is a randomised quasi-Monte Carlo average; the
        reported standard error is the spread across independent scrambles.
        """
        geo = self.geometry(n_geom, seed, replicates) if geometry is None else geometry
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        rep = np.stack([self.conditional_coverage(g, tau).mean(axis=0) for g in geo])
        value = rep.mean(axis=0)
        se = rep.std(axis=0, ddof=1) / np.sqrt(len(rep)) if len(rep) > 1 else np.zeros_like(value)
        return CoverageEstimate(value, se, dict(self.last_info))

    def sensing_rate(self, n_geom=8192, seed=0, replicates=8, eps=1e-7, geometry=None):
        """Per-BS ergodic sensing rate ``N_b * int_0^inf P(e^t - 1) dt`` (nats/s/Hz)."""
        geo = self.geometry(n_geom, seed, replicates) if geometry is None else geometry
        flat = geo.reshape(-1, self.n_c)

        def cov(t):
            return self.conditional_coverage(flat, np.expm1(t)).reshape(
                geo.shape[0], geo.shape[1], -1).mean(axis=1)

        per_rep, info = rate_integral(cov, eps=eps)
        nb = self.dp.params.n_beams
        value = nb * per_rep.mean()
        se = nb * per_rep.std(ddof=1) / np.sqrt(per_rep.size) if per_rep.size > 1 else 0.0
        return CoverageEstimate(np.asarray(value), np.asarray(se), info)


def rate_integral(coverage, eps=1e-7, panel=2.0, nodes=12, t_cap=400.0):
    """``int_0^inf coverage(t) dt`` by composite Gauss-Legendre panels.

    ``coverage(t)`` maps a 1-D array of ``t`` to an array whose last axis
    matches ``t``. Panels are added until the whole panel sits below ``eps``.
    """
    x, w = roots_legendre(nodes)
    total = None
    t0 = 0.0
    last = np.inf
    while t0 < t_cap:
        t = t0 + panel * (x + 1) / 2
        c = coverage(t)
        part = (panel / 2) * (c @ w)
        total = part if total is None else total + part
        last = float(np.max(c))
        t0 += panel
        if last < eps:
            break
    info = {"t_max": t0, "tail_coverage": last, "truncated": last >= eps}
    return np.asarray(total), info


def conditional_coverage(r, tau, dp, spec=QuadratureSpec(), **kw):
    return SensingModel(dp, len(np.atleast_1d(r)) if np.ndim(r) == 1 else np.shape(r)[-1],
                        spec, **kw).conditional_coverage(r, tau)


def average_coverage(tau, dp, n_c=None, spec=QuadratureSpec(), n_geom=8192, seed=0, **kw):
    return SensingModel(dp, n_c, spec, **kw).average_coverage(tau, n_geom=n_geom, seed=seed)


def sensing_rate(dp, n_c=None, spec=QuadratureSpec(), n_geom=8192, seed=0, **kw):
    return SensingModel(dp, n_c, spec, **kw).sensing_rate(n_geom=n_geom, seed=seed)
