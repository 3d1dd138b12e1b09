"""Monte Carlo network simulator: full-network coverage trials and two-level
meta-distribution estimators.

Every realization draws from its own substreams of ``SeedSequence([seed,
index])``, one child stream per kind of random variable, so results depend
only on the master seed and never on how work is split across processes.
Points are generated in order of distance from the target, which makes the
BSs of a smaller region an exact prefix of those of a larger one.
"""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import PointSet, antenna_gain, los_probability, sample_ordered_distances, wrap_angle
from .meta import MetaCurve, empirical_meta_curve
from .sensing import COMPONENTS

STREAMS = ("position", "angle", "phase", "los_target", "rcs", "los_link", "fade_los", "fade_nlos",
           "comm_position", "comm_angle", "comm_phase", "comm_los", "comm_fade_los",
           "comm_fade_nlos", "comm_serving")
_BLOCK = 1024
META_TAG = 0x6D657461


def substreams(seed, index, tag=None):
    key = [int(seed), int(index)] if tag is None else [int(seed), int(index), int(tag)]
    children = np.random.SeedSequence(key).spawn(len(STREAMS))
    return {name: np.random.default_rng(c) for name, c in zip(STREAMS, children)}


def fan_offset(direction, phase, n_beams):
    """Angular distance from ``direction`` to the nearest beam of a regular
    ``n_beams`` fan whose first beam points at ``phase``."""
    sector = 2 * np.pi / n_beams
    o = np.mod(np.asarray(direction) - np.asarray(phase), sector)
    return np.minimum(o, sector - o)


def lobe_half_width(dp):
    """Half-width of the antenna main lobe (rad)."""
    return dp.beamwidth / 2 if dp.params.antenna_model == "flat_top" else np.pi / dp.q


def _gain(offset, dp):
    return antenna_gain(offset, dp.params.antenna_model, dp.beam_gain, dp.q, dp.beamwidth)


def sorted_network(lambda_bs, side, rng_pos, rng_ang):
    """PPP on a square of side ``side`` centred on the origin, sorted by
    distance. Radii come from cumulative unit exponentials of ``pi lambda r^2``
    drawn in fixed blocks, so the points of a smaller square are a prefix."""
    r_out2 = side**2 / 2
    cap = np.pi * lambda_bs * r_out2
    chunks, total = [], 0.0
    while total <= cap:
        e = np.cumsum(rng_pos.exponential(size=_BLOCK)) + total
        chunks.append(e)
        total = float(e[-1])
    arr = np.concatenate(chunks)
    arr = arr[arr <= cap]
    r = np.sqrt(arr / (np.pi * lambda_bs))
    phi = rng_ang.random(r.size) * 2 * np.pi
    xy = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    half = side / 2
    keep = (np.abs(xy[:, 0]) <= half) & (np.abs(xy[:, 1]) <= half)
    return PointSet(xy=xy[keep], side=side)


@dataclass(frozen=True)
class NetworkRealization:
    points: PointSet
    distances: np.ndarray
    phases: np.ndarray
    los_target: np.ndarray
    redraws: int = 0

    def digest(self) -> str:
        h = hashlib.sha256()
        for a in (self.points.xy, self.phases, self.los_target.astype(np.uint8)):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()[:16]


def realize(dp, area_m2, streams) -> NetworkRealization:
    """BS PPP around a target at the origin with beam fans and LoS flags.

    The nearest BS senses and points one beam exactly at the target; its link
    to the target is LoS. Empty realizations are redrawn and counted.
    """
    side = float(np.sqrt(area_m2))
    redraws = 0
    while True:
        ps = sorted_network(dp.lambda_bs, side, streams["position"], streams["angle"])
        if len(ps):
            break
        redraws += 1
    d = ps.distances
    to_target = np.arctan2(-ps.xy[:, 1], -ps.xy[:, 0])
    phases = streams["phase"].random(d.size) * 2 * np.pi
    phases[0] = to_target[0]
    los = streams["los_target"].random(d.size) < los_probability(d, dp.params.blockage_eta)
    los[0] = True
    return NetworkRealization(ps, d, phases, los, redraws)


@dataclass
class SensingOutcome:
    """Per-trial power breakdown (W); trailing axis runs over cluster sizes."""

    n_c: tuple
    p_tot: np.ndarray
    i_target: np.ndarray
    i_los: np.ndarray
    i_nlos: np.ndarray
    noise: float
    si: float
    components: frozenset = COMPONENTS

    def denominator(self):
        c = self.components
        den = np.zeros_like(self.p_tot)
        if "target" in c:
            den = den + self.i_target
        if "cochannel" in c:
            den = den + (self.i_los + self.i_nlos)[..., None]
        if "noise" in c:
            den = den + self.noise
        if "si" in c:
            den = den + self.si
        return den

    @property
    def sinr(self):
        den = self.denominator()
        with np.errstate(divide="ignore"):
            return np.where(den > 0, self.p_tot / np.where(den > 0, den, 1.0), np.inf)


def sensing_kernel(dp, xy, phases, los_t, valid, streams, n_c_list, components=COMPONENTS,
                   cochannel=None):
    """Sensing powers for a batch of trials.

    ``xy`` is ``(F, n, 2)`` or ``(1, n, 2)`` BS positions with the sensing BS
    in column 0 and the cluster in the first ``N_c`` columns; ``phases``,
    ``los_t`` and ``valid`` are ``(F, n)``. ``cochannel`` optionally masks the
    BSs allowed to act as co-channel interferers.
    """
    p = dp.params
    phases = np.asarray(phases, dtype=float)
    f, n = phases.shape
    # shared positions (leading axis 1) are broadcast across the trials
    xy = np.broadcast_to(np.asarray(xy, dtype=float), (f, n, 2))
    d = np.hypot(xy[..., 0], xy[..., 1])
    to_t = np.arctan2(-xy[..., 1], -xy[..., 0])
    g_t = _gain(fan_offset(to_t, phases, p.n_beams), dp) / dp.beam_gain
    g_t[:, 0] = 1.0
    rcs = streams["rcs"].exponential(size=(f, n))
    rcs[:, 0] *= p.rcs_mono
    rcs[:, 1:] *= p.rcs_bi
    r1 = d[:, :1]
    with np.errstate(divide="ignore"):
        echo = dp.echo_const * g_t * rcs / (r1**p.alpha_los * np.where(valid, d, 1.0) ** p.alpha_los)
    echo = np.where(los_t & valid, echo, 0.0)
    # tail sums stay accurate when the cluster dominates the total
    tail = np.cumsum(echo[:, ::-1], axis=1)[:, ::-1]
    head = np.cumsum(echo, axis=1)
    ncs = tuple(int(min(k, n)) for k in n_c_list)
    p_tot = np.stack([head[:, k - 1] for k in ncs], axis=-1)
    i_t = np.stack([tail[:, k] if k < n else np.zeros(f) for k in ncs], axis=-1)

    i_los = np.zeros(f)
    i_nlos = np.zeros(f)
    if n > 1 and "cochannel" in components:
        s = xy[:, 0, :]
        v = xy[:, 1:, :] - s[:, None, :]
        dir_t = np.arctan2(-s[:, 1], -s[:, 0])
        rx_off = np.abs(wrap_angle(np.arctan2(v[..., 1], v[..., 0]) - dir_t[:, None]))
        allowed = valid[:, 1:] if cochannel is None else (valid & cochannel)[:, 1:]
        cand = allowed & (rx_off <= lobe_half_width(dp))
        rows, cols = np.nonzero(cand)
        if rows.size:
            vv = v[rows, cols]
            r_s = np.hypot(vv[:, 0], vv[:, 1])
            g_rx = _gain(rx_off[rows, cols], dp)
            tx_off = fan_offset(np.arctan2(-vv[:, 1], -vv[:, 0]), phases[rows, cols + 1], p.n_beams)
            g_tx = _gain(tx_off, dp)
            k = rows.size
            # draws only for receive-lobe members; column order keeps region prefixes stable
            los_s = streams["los_link"].random(k) < los_probability(r_s, p.blockage_eta)
            fl = streams["fade_los"].gamma(p.nakagami_m_los, 1 / p.nakagami_m_los, k)
            fn = streams["fade_nlos"].gamma(p.nakagami_m_nlos, 1 / p.nakagami_m_nlos, k)
            base = dp.p_c * g_tx * g_rx
            pw_l = np.where(los_s, base * dp.c_los * r_s ** (-p.alpha_los) * fl, 0.0)
            pw_n = np.where(los_s, 0.0, base * dp.c_nlos * r_s ** (-p.alpha_nlos) * fn)
            i_los = np.bincount(rows, pw_l, minlength=f)
            i_nlos = np.bincount(rows, pw_n, minlength=f)
    return SensingOutcome(ncs, p_tot, i_t, i_los, i_nlos, dp.noise_power, dp.residual_si,
                          frozenset(components))


def sensing_sinr(nr: NetworkRealization, dp, streams, n_c_list, components=COMPONENTS):
    """One full-network sensing trial; returns a SensingOutcome with ``F = 1``."""
    xy = nr.points.xy[None]
    valid = np.ones((1, len(nr.distances)), dtype=bool)
    return sensing_kernel(dp, xy, nr.phases[None], nr.los_target[None], valid, streams,
                          n_c_list, components)


def comm_sinr(dp, area_m2, streams, interference=True, noise=True):
    """Downlink SINR of a user at the centre of an independent realization."""
    p = dp.params
    side = float(np.sqrt(area_m2))
    while True:
        ps = sorted_network(dp.lambda_bs, side, streams["comm_position"], streams["comm_angle"])
        if len(ps):
            break
    d = ps.distances
    g0 = streams["comm_serving"].gamma(p.nakagami_m_los, 1 / p.nakagami_m_los)
    signal = dp.p_c * g0 * dp.beam_gain * dp.c_los * d[0] ** (-p.alpha_los)
    den = dp.noise_power if noise else 0.0
    if interference and d.size > 1:
        xy = ps.xy[1:]
        r = d[1:]
        to_mu = np.arctan2(-xy[:, 1], -xy[:, 0])
        phases = streams["comm_phase"].random(r.size) * 2 * np.pi
        g_tx = _gain(fan_offset(to_mu, phases, p.n_beams), dp)
        los = streams["comm_los"].random(r.size) < los_probability(r, p.blockage_eta)
        fl = streams["comm_fade_los"].gamma(p.nakagami_m_los, 1 / p.nakagami_m_los, r.size)
        fn = streams["comm_fade_nlos"].gamma(p.nakagami_m_nlos, 1 / p.nakagami_m_nlos, r.size)
        pw = np.where(los, dp.c_los * r ** (-p.alpha_los) * fl, dp.c_nlos * r ** (-p.alpha_nlos) * fn)
        den += math.fsum(dp.p_c * g_tx * pw)
    return signal / den if den > 0 else np.inf


# ---------------------------------------------------------------------------
# full-network coverage runs

def _coverage_chunk(args):
    dp, area, seed, lo, hi, n_c_list, components, with_comm = args
    sens = np.empty((hi - lo, len(n_c_list)))
    comm = np.full(hi - lo, np.nan)
    redraws = 0
    for i, idx in enumerate(range(lo, hi)):
        st = substreams(seed, idx)
        nr = realize(dp, area, st)
        redraws += nr.redraws
        sens[i] = sensing_sinr(nr, dp, st, n_c_list, components).sinr[0]
        if with_comm:
            comm[i] = comm_sinr(dp, area, st)
    return sens, comm, redraws


def _map_chunks(fn, jobs, workers):
    if not workers or workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def _chunks(n, size):
    return [(lo, min(n, lo + size)) for lo in range(0, n, size)]


def _digest(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(np.asarray(a, dtype="<f8")).tobytes())
    return h.hexdigest()[:16]


@dataclass
class SimulationResult:
    """Per-realization SINR samples plus summary estimators."""

    n_c: tuple
    sensing_sinr: np.ndarray         # (N, len(n_c))
    comm_sinr: np.ndarray            # (N,) or empty
    redraws: int
    digest: str
    info: dict = field(default_factory=dict)

    @property
    def realizations(self):
        return self.sensing_sinr.shape[0]

    def sensing_coverage(self, tau):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        p = (self.sensing_sinr[:, :, None] > tau).mean(axis=0)
        return p, np.sqrt(p * (1 - p) / self.realizations)

    def comm_coverage(self, tau):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        p = (self.comm_sinr[:, None] > tau).mean(axis=0)
        return p, np.sqrt(p * (1 - p) / self.comm_sinr.size)

    def sensing_rate(self, dp):
        """``N_b E[log(1 + SINR)]`` per cluster size with standard errors."""
        x = np.log1p(self.sensing_sinr)
        nb = dp.params.n_beams
        mean = np.array([math.fsum(col) / col.size for col in x.T])
        return nb * mean, nb * x.std(axis=0, ddof=1) / np.sqrt(x.shape[0])

    def comm_rate(self, dp):
        x = np.log1p(self.comm_sinr)
        f = dp.params.n_beams * (dp.t_t - dp.t_s) / dp.t_t
        return f * math.fsum(x) / x.size, f * x.std(ddof=1) / np.sqrt(x.size)


def run_simulation(dp, sim_cfg, n_c_list, components=COMPONENTS, comm=True, chunk=250):
    """Independent full-network realizations; output is independent of
    ``sim_cfg.workers``."""
    n = sim_cfg.realizations
    area = sim_cfg.area_km2 * 1e6
    n_c_list = tuple(int(k) for k in n_c_list)
    jobs = [(dp, area, sim_cfg.seed, lo, hi, n_c_list, frozenset(components), comm)
            for lo, hi in _chunks(n, chunk)]
    parts = _map_chunks(_coverage_chunk, jobs, sim_cfg.workers)
    sens = np.concatenate([p[0] for p in parts])
    comm_s = np.concatenate([p[1] for p in parts]) if comm else np.zeros(0)
    redraws = sum(p[2] for p in parts)
    return SimulationResult(n_c_list, sens, comm_s, redraws, _digest(sens, comm_s),
                            {"area_km2": sim_cfg.area_km2, "seed": sim_cfg.seed})


def run_coverage(dp, sim_cfg, tau, n_c_list, components=COMPONENTS, comm=True):
    """Empirical sensing (and downlink) coverage with binomial standard errors."""
    res = run_simulation(dp, sim_cfg, n_c_list, components, comm)
    cov, se = res.sensing_coverage(tau)
    out = {"sensing": cov, "sensing_se": se, "result": res}
    if comm:
        out["comm"], out["comm_se"] = res.comm_coverage(tau)
    return out


# ---------------------------------------------------------------------------
# two-level meta-distribution estimators

def _sample_reflectors(dp, rho, f, rng):
    """Target-illuminating LoS BSs beyond ``rho``, pre-thinned; returns ragged
    lists of (x, y, beam offset) per trial."""
    p = dp.params
    eta = p.blockage_eta
    lobe = lobe_half_width(dp)
    frac = p.n_beams * 2 * lobe / (2 * np.pi)
    mean = 2 * np.pi * dp.lambda_bs * frac * np.exp(-eta * rho) * (1 + eta * rho) / eta**2
    counts = rng.poisson(mean, f)
    m = int(counts.sum())
    # radial law r e^{-eta r} on r > rho as an Exp / Gamma(2) mixture of r - rho
    first = rng.random(m) < rho * eta / (rho * eta + 1)
    y = np.where(first, rng.exponential(1 / eta, m), rng.gamma(2.0, 1 / eta, m))
    r = rho + y
    phi = rng.random(m) * 2 * np.pi
    off = rng.random(m) * lobe
    return counts, r * np.cos(phi), r * np.sin(phi), off


def _distances_batch(dp, radii, f, streams, radius):
    """Inner trials conditioned on the cluster distances ``radii``.

    The sensing BS's receive lobe (out to ``radius``) is populated with the
    full PPP beyond the cluster disc; outside it only target-illuminating
    LoS reflectors matter and are sampled from their thinned intensity.
    """
    p = dp.params
    rng = streams["position"]
    n_c = radii.size
    rho = radii[-1]
    lobe = lobe_half_width(dp)
    ang = rng.random((f, n_c)) * 2 * np.pi
    cl = np.stack([radii * np.cos(ang), radii * np.sin(ang)], axis=-1)       # (F, n_c, 2)
    s = cl[:, 0, :]
    dir_t = np.arctan2(-s[:, 1], -s[:, 0])

    # receive-lobe sector field
    k_w = rng.poisson(dp.lambda_bs * lobe * radius**2, f)
    m_w = int(k_w.sum())
    rr = radius * np.sqrt(rng.random(m_w))
    aa = np.repeat(dir_t, k_w) + (2 * rng.random(m_w) - 1) * lobe
    wx = np.repeat(s[:, 0], k_w) + rr * np.cos(aa)
    wy = np.repeat(s[:, 1], k_w) + rr * np.sin(aa)
    keep_w = np.hypot(wx, wy) > rho

    # reflectors outside the sector
    k_r, rx, ry, roff = _sample_reflectors(dp, rho, f, streams["angle"])
    owner = np.repeat(np.arange(f), k_r)
    vx, vy = rx - s[owner, 0], ry - s[owner, 1]
    in_sector = (np.hypot(vx, vy) <= radius) & (
        np.abs(wrap_angle(np.arctan2(vy, vx) - dir_t[owner])) <= lobe)
    keep_r = ~in_sector

    owner_w = np.repeat(np.arange(f), k_w)[keep_w]
    owner_r = owner[keep_r]
    n_w = np.bincount(owner_w, minlength=f)
    n_r = np.bincount(owner_r, minlength=f)
    width = n_c + int(n_w.max(initial=0)) + int(n_r.max(initial=0))
    xy = np.zeros((f, width, 2))
    valid = np.zeros((f, width), dtype=bool)
    los_t = np.zeros((f, width), dtype=bool)
    phases = streams["phase"].random((f, width)) * 2 * np.pi
    xy[:, :n_c] = cl
    valid[:, :n_c] = True
    phases[:, 0] = dir_t

    def place(owner_idx, x, y, start):
        order = np.argsort(owner_idx, kind="stable")
        o = owner_idx[order]
        first = np.searchsorted(o, np.arange(f))
        slot = np.arange(o.size) - first[o]
        col = start[o] + slot
        xy[o, col, 0] = x[order]
        xy[o, col, 1] = y[order]
        valid[o, col] = True
        return o, col, order

    start_w = np.full(f, n_c)
    o, col, _ = place(owner_w, wx[keep_w], wy[keep_w], start_w)
    start_r = n_c + n_w
    o_r, col_r, order_r = place(owner_r, rx[keep_r], ry[keep_r], start_r)
    d = np.hypot(xy[..., 0], xy[..., 1])
    los_t[:] = streams["los_target"].random((f, width)) < los_probability(d, p.blockage_eta)
    los_t[:, 0] = True
    # pre-thinned reflectors: LoS, with a beam at the sampled offset from the target
    los_t[o_r, col_r] = True
    to_t = np.arctan2(-xy[o_r, col_r, 1], -xy[o_r, col_r, 0])
    phases[o_r, col_r] = to_t - roff[keep_r][order_r]
    cochannel = np.ones((f, width), dtype=bool)
    cochannel[o_r, col_r] = False
    return xy, phases, los_t & valid, valid, cochannel


def _meta_chunk(args):
    dp, seed, lo, hi, n_c, tau, f, components, mode, area, radius = args
    out = np.empty(hi - lo)
    for i, g in enumerate(range(lo, hi)):
        st = substreams(seed, g, META_TAG)
        if mode == "distances":
            radii = sample_ordered_distances(dp.lambda_bs, n_c, st["comm_position"])
            xy, ph, los_t, valid, cc = _distances_batch(dp, radii, f, st, radius)
        else:
            nr = realize(dp, area, st)
            keep = nr.distances <= radius + nr.distances[0]
            pts = nr.points.xy[keep]
            m = pts.shape[0]
            xy = pts[None]
            ph = st["comm_phase"].random((f, m)) * 2 * np.pi
            ph[:, 0] = nr.phases[0]
            los_t = st["comm_los"].random((f, m)) < los_probability(nr.distances[keep], dp.params.blockage_eta)
            los_t[:, 0] = True
            valid = np.ones((f, m), dtype=bool)
            cc = None
        oc = sensing_kernel(dp, xy, ph, los_t, valid, st, (n_c,), components, cc)
        out[i] = np.mean(oc.sinr[:, 0] > tau)
    return out


def run_meta(dp, sim_cfg, tau, n_c, t_grid, components=COMPONENTS, chunk=50):
    """Two-level empirical meta-distribution.

    Outer draws fix the conditioning information (the cluster distances in
    ``distances`` mode, every BS position in ``full_geometry`` mode); inner
    trials resample everything else. Finite inner counts smooth the curve by
    roughly one binomial standard deviation ``sqrt(t(1-t)/F)``.
    """
    g = sim_cfg.meta_outer
    jobs = [(dp, sim_cfg.seed, lo, hi, int(n_c), float(tau), sim_cfg.meta_inner, frozenset(components),
             sim_cfg.conditioning, sim_cfg.area_km2 * 1e6, sim_cfg.interference_radius)
            for lo, hi in _chunks(g, chunk)]
    cond = np.concatenate(_map_chunks(_meta_chunk, jobs, sim_cfg.workers))
    curve = empirical_meta_curve(cond, t_grid, sim_cfg.meta_inner)
    curve.info.update(conditioning=sim_cfg.conditioning, digest=_digest(cond))
    return curve, cond


__all__ = [
    "NetworkRealization", "SensingOutcome", "SimulationResult", "MetaCurve", "realize",
    "sensing_sinr", "comm_sinr", "run_simulation", "run_coverage", "run_meta", "substreams",
    "fan_offset", "sorted_network",
]
