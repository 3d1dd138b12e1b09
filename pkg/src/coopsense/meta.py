"""Meta-distribution of the conditional sensing coverage.

Moments ``M_b = E[P^b]`` of the conditional coverage ``P`` are computed over a
fixed geometry sample; the CCDF ``P(P > t)`` follows from Gil-Pelaez
inversion of the imaginary moments ``M_{ju}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, digamma, loggamma, ndtr, roots_legendre

from .quadrature import QuadratureError


class MomentFunction:
    """Imaginary-order moments ``u -> E[P^{ju}]`` of a [0, 1] variable.

    Subclasses provide ``__call__`` for real ``u >= 0`` and ``mean_log``
    (``E[log P]``, the small-``u`` limit of the inversion integrand).
    """

    mean_log: float
    max_frequency: float = 1.0

    def __call__(self, u):
        raise NotImplementedError

    def real_moment(self, b):
        raise NotImplementedError

    def tail_bound(self, u):
        """Bound on ``(1/pi) int_u^inf |M|/v dv`` if one is known, else None."""
        return None

    def conjugate_check(self, u, tol=1e-12):
        """Assert ``M_{-ju} = conj(M_{ju})`` for the supplied ``u``."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        pos = self._raw(u)
        neg = self._raw(-u)
        if not np.allclose(neg, np.conj(pos), atol=tol, rtol=0):
            raise AssertionError("moment function violates Hermitian symmetry")
        return True

    def _raw(self, u):
        return self(u)


class SampleMoments(MomentFunction):
    """Moments of an empirical sample ``p`` (one value per geometry draw).

    Zero samples contribute nothing to real moments with ``Re(b) > 0``; they
    are counted, and imaginary moments need a ``floor``. ``floor`` folds
    samples below it up to it; pick it below every reliability level of interest so
    the CCDF there is unchanged while the integrand frequency stays bounded.

    ``bandwidth`` (in units of ``log P``) replaces each sample by a Gaussian
    kernel in ``log P``. The moments then decay like ``exp(-h^2 u^2 / 2)``, so
    the inversion converges absolutely to the kernel estimate's CCDF instead
    of ringing around the sample's step function.
    """

    def __init__(self, p, floor=None, chunk=1 << 22, bandwidth=None):
        p = np.asarray(p, dtype=float).ravel()
        if p.size == 0:
            raise ValueError("no samples")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("conditional coverage samples must lie in [0, 1]")
        self.p = p
        self.n_zero = int(np.sum(p == 0))
        pos = p[p > 0]
        self.n_pos = pos.size
        if floor is not None:
            # zeros and tiny values alike sit below every admissible level
            logp = np.log(np.maximum(p, floor))
        else:
            logp = np.log(pos) if pos.size else np.zeros(0)
        self._logp = logp
        self._chunk = chunk
        if bandwidth is not None and not bandwidth > 0:
            raise ValueError("kernel bandwidth must be positive")
        self.bandwidth = bandwidth
        self.floor = floor
        self.mean_log = float(logp.mean()) if logp.size else -np.inf
        self.max_frequency = float(max(1.0, -logp.min())) if logp.size else 1.0

    def __call__(self, u):
        return self._raw(np.asarray(u, dtype=float))

    def _raw(self, u):
        u = np.asarray(u, dtype=float)
        flat = u.ravel()
        out = np.empty(flat.size, dtype=complex)
        if self.n_zero and self.floor is None:
            raise ValueError("imaginary moments of a sample with zeros need a floor")
        step = max(1, self._chunk // max(1, self._logp.size))
        for lo in range(0, flat.size, step):
            ph = np.multiply.outer(flat[lo:lo + step], self._logp)
            out[lo:lo + step] = np.cos(ph).mean(axis=1) + 1j * np.sin(ph).mean(axis=1)
        if self.bandwidth is not None:
            out *= np.exp(-0.5 * (self.bandwidth * flat) ** 2)
        return out.reshape(u.shape)

    def tail_bound(self, u):
        if self.bandwidth is None:
            return None
        # |M| <= exp(-h^2 v^2 / 2) and int_u^inf exp(-h^2 v^2/2)/v dv <= exp(-x/2)/x, x = h^2 u^2
        x = (self.bandwidth * u) ** 2
        return float(np.exp(-0.5 * x) / (np.pi * x))

    def kernel_ccdf(self, t):
        """Direct CCDF of the (possibly smoothed) sample at levels ``t``."""
        log_t = np.log(np.atleast_1d(np.asarray(t, dtype=float)))
        d = self._logp[None, :] - log_t[:, None]
        if self.bandwidth is None:
            return (d > 0).sum(axis=1) / self.p.size
        return ndtr(d / self.bandwidth).sum(axis=1) / self.p.size

    def real_moment(self, b):
        b = complex(b)
        if b == 0:
            return 1.0
        if b.real <= 0 and self.n_zero:
            raise ValueError("zero samples make non-positive moments undefined")
        val = np.mean(np.where(self.p > 0, np.exp(b * np.log(np.where(self.p > 0, self.p, 1.0))), 0.0))
        return val.real if b.imag == 0 else val


class BetaMoments(MomentFunction):
    """Exact moments of a Beta(a, b) variable (inversion sanity stub)."""

    def __init__(self, a, b):
        if a <= 0 or b <= 0:
            raise ValueError("Beta parameters must be positive")
        self.a, self.b = float(a), float(b)
        self.mean_log = float(digamma(a) - digamma(a + b))
        self.max_frequency = 1.0

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        ju = 1j * u
        a, b = self.a, self.b
        return np.exp(loggamma(a + ju) - loggamma(a) + loggamma(a + b) - loggamma(a + b + ju))

    def real_moment(self, order):
        a, b = self.a, self.b
        return float(np.exp(loggamma(a + order) - loggamma(a) + loggamma(a + b) - loggamma(a + b + order)).real)

    def ccdf(self, t):
        return 1.0 - betainc(self.a, self.b, np.asarray(t, dtype=float))


class PointMassMoments(MomentFunction):
    """Degenerate ``P = p0`` almost surely."""

    def __init__(self, p0):
        if not 0 < p0 <= 1:
            raise ValueError("p0 must lie in (0, 1]")
        self.p0 = float(p0)
        self.mean_log = float(np.log(p0))
        self.max_frequency = max(1.0, -np.log(p0))

    def __call__(self, u):
        return np.exp(1j * np.asarray(u, dtype=float) * np.log(self.p0))

    def real_moment(self, b):
        return self.p0**b


@dataclass(frozen=True)
class InversionSpec:
    """Knobs for the oscillatory u-integral."""

    u_max: float = 200.0
    u_cap: float = 2.0e4
    tail_tol: float = 1e-4
    nodes: int = 12
    periods_per_panel: float = 1.0

    def refined(self):
        return InversionSpec(u_max=2 * self.u_max, u_cap=2 * self.u_cap, tail_tol=self.tail_tol / 2,
                             nodes=2 * self.nodes, periods_per_panel=self.periods_per_panel / 2)


def gil_pelaez(moments: MomentFunction, t, spec: InversionSpec = InversionSpec(), raise_on_fail=True):
    """``P(P > t) = 1/2 + (1/pi) int_0^inf Im[exp(-ju log t) M_{ju}] / u du``.

    Returns ``(ccdf, info)``; ``info`` carries the final ``U`` and the tail
    bound: the moment function's own rigorous bound when it has one, else
    ``max |M| / U`` over the last panels. The integrand's removable
    singularity at ``u = 0`` is replaced by its limit ``E[log P] - log t``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0) or np.any(t >= 1):
        raise ValueError("reliability levels must lie in (0, 1)")
    log_t = np.log(t)
    omega = moments.max_frequency + float(np.max(-log_t))
    width = spec.periods_per_panel * 2 * np.pi / omega
    x, w = roots_legendre(spec.nodes)
    total = np.zeros_like(t)
    u0 = 0.0
    target = spec.u_max
    tail = np.inf
    while True:
        n_pan = max(1, int(np.ceil((target - u0) / width)))
        h = (target - u0) / n_pan
        left = u0 + h * np.arange(n_pan)
        u = (left[:, None] + h * (x + 1) / 2).ravel()
        m = moments(u)
        integrand = np.imag(np.exp(-1j * np.multiply.outer(log_t, u)) * m) / u
        small = u < 1e-10
        if np.any(small):
            integrand[:, small] = (moments.mean_log - log_t)[:, None]
        total += (h / 2) * (integrand.reshape(t.size, n_pan, spec.nodes) @ w).sum(axis=1)
        tail = moments.tail_bound(target)
        if tail is None:
            tail = float(np.max(np.abs(m[-spec.nodes * max(1, n_pan // 50):]))) / target
        u0 = target
        if tail <= spec.tail_tol or target >= spec.u_cap:
            break
        target = min(2 * target, spec.u_cap)
    converged = tail <= spec.tail_tol
    if not converged and raise_on_fail:
        raise QuadratureError(f"Gil-Pelaez tail bound {tail:.2e} above {spec.tail_tol:.0e} at U={u0:g}", tail)
    ccdf = np.clip(0.5 + total / np.pi, 0.0, 1.0)
    return ccdf, {"u_final": u0, "tail_bound": tail, "converged": converged}


def beta_approximation(m1, m2, t):
    """Two-moment Beta fit of the meta-distribution (diagnostic only)."""
    var = m2 - m1**2
    if var <= 0:
        raise ValueError("moments imply zero variance")
    common = m1 * (1 - m1) / var - 1
    a, b = m1 * common, (1 - m1) * common
    return 1.0 - betainc(a, b, np.asarray(t, dtype=float))


@dataclass
class MetaCurve:
    t: np.ndarray
    values: np.ndarray
    raw: np.ndarray
    error: np.ndarray
    provenance: str
    m1: float
    m2: float
    info: dict = field(default_factory=dict)


def monotone_projection(raw, err):
    """Running minimum, applied only where it stays within the error bar."""
    raw = np.asarray(raw, dtype=float)
    proj = np.minimum.accumulate(raw)
    proj = np.maximum(proj, raw - np.asarray(err, dtype=float))
    return proj, bool(np.all(np.diff(proj) <= 0))


class MetaModel:
    """Conditional-coverage sample at one threshold and its moments.

    The geometry sample is the same one ``SensingModel.average_coverage``
    draws for identical ``(n_geom, seed, replicates)``, so ``M_1`` equals the
    average coverage. The CCDF is that of a Gaussian kernel estimate in
    ``log P`` of width ``bandwidth`` (0.1% in ``P`` by default, narrow enough
    for the near-atoms the monostatic law can have). ``bandwidth=None``
    inverts the raw sample, whose ringing then depends on the truncation point.
    """

    def __init__(self, model, tau, n_geom=8192, seed=0, replicates=8, floor=1e-3, bandwidth=1e-3):
        self.model = model
        self.tau = float(tau)
        geo = model.geometry(n_geom, seed, replicates)
        self.samples = np.concatenate([model.conditional_coverage(g, [self.tau])[:, 0] for g in geo])
        self.floor = floor
        self.bandwidth = bandwidth
        self.moments = SampleMoments(self.samples, floor=floor, bandwidth=bandwidth)

    def coverage_moment(self, b):
        return self.moments.real_moment(b)

    def meta_ccdf(self, t, spec: InversionSpec = InversionSpec()):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t <= self.floor):
            raise ValueError(f"reliability levels must exceed the sample floor {self.floor}")
        return gil_pelaez(self.moments, t, spec)

    def meta_curve(self, t_grid, spec: InversionSpec = InversionSpec()):
        t = np.asarray(t_grid, dtype=float)
        raw, info = self.meta_ccdf(t, spec)
        n = self.samples.size
        err = np.sqrt(np.maximum(raw * (1 - raw), 1.0 / n) / n) + info["tail_bound"]
        values, mono = monotone_projection(raw, err)
        info = dict(info, monotone=mono, n_samples=n, n_zero=self.moments.n_zero, bandwidth=self.bandwidth)
        return MetaCurve(t, values, raw, err, "analytic", float(self.coverage_moment(1)),
                         float(self.coverage_moment(2)), info)


def empirical_meta_curve(conditional, t_grid, n_inner):
    """CCDF of per-geometry success frequencies from a two-level simulation.

    Error bars combine the outer binomial spread with a finite-inner-count
    smoothing allowance of one inner standard deviation at the level ``t``.
    """
    c = np.asarray(conditional, dtype=float)
    t = np.asarray(t_grid, dtype=float)
    vals = (c[None, :] > t[:, None]).mean(axis=1)
    g = c.size
    err = np.sqrt(np.maximum(vals * (1 - vals), 1.0 / g) / g)
    m1 = float(c.mean())
    m2 = float(np.mean(c**2))
    info = {"outer": g, "inner": int(n_inner),
            "inner_smoothing_sd": np.sqrt(t * (1 - t) / max(n_inner, 1)).tolist()}
    return MetaCurve(t, vals, vals.copy(), err, "empirical", m1, m2, info)
