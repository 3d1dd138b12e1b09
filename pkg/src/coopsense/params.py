"""System parameters, config loading and SI-unit derived quantities."""
from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SPEED_OF_LIGHT = 299_792_458.0
BOLTZMANN = 1.380649e-23

ANTENNA_MODELS = ("flat_top", "cosine")


class ConfigError(ValueError):
    """Invalid or malformed configuration document."""


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


@dataclass(frozen=True)
class SystemParams:
    """Network/ISAC parameters in engineering units.

    Defaults are the reference operating point used throughout the package
    (28 GHz, 200 MHz, 70 BS/km^2, 8 beams of 18 degrees).
    """

    carrier_frequency_ghz: float = 28.0
    bandwidth_mhz: float = 200.0
    bs_density_per_km2: float = 70.0
    n_beams: int = 8
    beamwidth_deg: float = 18.0
    beam_gain_dbi: float = 20.0
    alpha_los: float = 2.0
    alpha_nlos: float = 4.0
    intercept_los_db: float = -61.4
    intercept_nlos_db: float = -72.0
    nakagami_m_los: float = 3.0
    nakagami_m_nlos: float = 2.0
    rcs_mono: float = 1.0
    rcs_bi: float = 0.7
    blockage_eta: float = 0.0149
    energy_split: float = 0.7
    avg_power: float = 1.0
    temperature: float = 300.0
    si_residual: float = 1e-12
    cluster_size: int = 1
    rmax_factor: float = 3.0
    antenna_model: str = "flat_top"

    def __post_init__(self):
        validate(self)

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)


def _fail(name, msg):
    raise ConfigError(f"{name}: {msg}")


def validate(p: SystemParams) -> None:
    """Check every invariant; raise ConfigError naming the offending field."""
    positive = ("carrier_frequency_ghz", "bandwidth_mhz", "bs_density_per_km2",
                "rcs_mono", "rcs_bi", "blockage_eta", "avg_power", "temperature",
                "rmax_factor")
    for name in positive:
        v = getattr(p, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            _fail(name, f"must be a finite number > 0, got {v!r}")
    if not 0.0 <= p.energy_split <= 1.0:
        _fail("energy_split", f"must lie in [0, 1], got {p.energy_split}")
    if not 0.0 < p.beamwidth_deg < 360.0:
        _fail("beamwidth_deg", f"must lie in (0, 360), got {p.beamwidth_deg}")
    if int(p.n_beams) != p.n_beams or p.n_beams < 1:
        _fail("n_beams", f"must be a positive integer, got {p.n_beams}")
    if p.n_beams * p.beamwidth_deg > 360.0 + 1e-9:
        _fail("n_beams", f"n_beams * beamwidth_deg = {p.n_beams * p.beamwidth_deg} "
                         "exceeds 360 (beams must not overlap)")
    for name in ("alpha_los", "alpha_nlos"):
        if getattr(p, name) < 2.0:
            _fail(name, f"must be >= 2, got {getattr(p, name)}")
    for name in ("nakagami_m_los", "nakagami_m_nlos"):
        if getattr(p, name) < 0.5:
            _fail(name, f"must be >= 0.5, got {getattr(p, name)}")
    if p.si_residual < 0:
        _fail("si_residual", f"must be >= 0, got {p.si_residual}")
    if int(p.cluster_size) != p.cluster_size or p.cluster_size < 1:
        _fail("cluster_size", f"must be an integer >= 1, got {p.cluster_size}")
    if p.antenna_model not in ANTENNA_MODELS:
        _fail("antenna_model", f"must be one of {ANTENNA_MODELS}, got {p.antenna_model!r}")


@dataclass(frozen=True)
class DerivedParams:
    """SI-unit quantities computed once from a SystemParams."""

    params: SystemParams
    wavelength: float
    lambda_bs: float          # 1/m^2
    r_eff: float
    r_max: float
    t_t: float
    t_s: float
    energy: float             # J per slot
    p_s: float
    p_c: float
    noise_power: float
    residual_si: float
    beam_gain: float          # linear
    beamwidth: float          # rad
    beam_fraction: float      # N_b theta_b / 2pi
    lambda_i: float           # aligned co-channel interferer intensity
    xi: float
    q: float
    c_los: float
    c_nlos: float
    echo_const: float         # P_s G_m^2 lambda^2 / (4 pi)^3

    @property
    def floor_power(self) -> float:
        """Noise plus residual self-interference (W)."""
        return self.noise_power + self.residual_si


def derive(p: SystemParams) -> DerivedParams:
    wavelength = SPEED_OF_LIGHT / (p.carrier_frequency_ghz * 1e9)
    lambda_bs = p.bs_density_per_km2 * 1e-6
    r_eff = math.sqrt(1.0 / (math.pi * lambda_bs))
    r_max = p.rmax_factor * r_eff
    w = p.bandwidth_mhz * 1e6
    t_s = 1.0 / w
    t_t = 2.0 * r_max / SPEED_OF_LIGHT
    if t_t <= t_s:
        raise ConfigError("rmax_factor: slot 2 R_max / c must exceed the pulse width 1/W")
    energy = p.avg_power * t_t
    p_s = p.energy_split * energy / t_s
    p_c = (1.0 - p.energy_split) * energy / (t_t - t_s)
    g = db_to_linear(p.beam_gain_dbi)
    theta = math.radians(p.beamwidth_deg)
    beam_fraction = p.n_beams * theta / (2 * math.pi)
    lambda_i = lambda_bs * p.n_beams * (theta / (2 * math.pi)) ** 2
    return DerivedParams(
        params=p,
        wavelength=wavelength,
        lambda_bs=lambda_bs,
        r_eff=r_eff,
        r_max=r_max,
        t_t=t_t,
        t_s=t_s,
        energy=energy,
        p_s=p_s,
        p_c=p_c,
        noise_power=BOLTZMANN * p.temperature * w,
        residual_si=p_c * p.si_residual,
        beam_gain=g,
        beamwidth=theta,
        beam_fraction=beam_fraction,
        lambda_i=lambda_i,
        xi=2 * math.pi * lambda_i,
        q=math.pi / theta,
        c_los=db_to_linear(p.intercept_los_db),
        c_nlos=db_to_linear(p.intercept_nlos_db),
        echo_const=p_s * g**2 * wavelength**2 / (4 * math.pi) ** 3,
    )


# ---------------------------------------------------------------------------
# config documents

@dataclass(frozen=True)
class SimulationConfig:
    realizations: int = 20_000
    area_km2: float = 25.0
    seed: int = 2024
    meta_outer: int = 4000
    meta_inner: int = 2000
    conditioning: str = "distances"
    workers: int | None = None
    # interferer field radius around the sensing BS in the distance-conditioned sampler (m)
    interference_radius: float = 1000.0

    def __post_init__(self):
        if self.realizations < 1:
            raise ConfigError("simulation.realizations: must be >= 1")
        if self.area_km2 <= 0:
            raise ConfigError("simulation.area_km2: must be > 0")
        if self.meta_outer < 1 or self.meta_inner < 1:
            raise ConfigError("simulation.meta_outer/meta_inner: must be >= 1")
        if self.conditioning not in ("distances", "full_geometry"):
            raise ConfigError(f"simulation.conditioning: unknown mode {self.conditioning!r}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("simulation.workers: must be >= 1")
        if self.interference_radius <= 0:
            raise ConfigError("simulation.interference_radius: must be > 0")

    def replace(self, **changes) -> "SimulationConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class SweepConfig:
    tau_db: tuple = (-5.0, 0.0, 5.0, 10.0)
    nc: tuple = (1, 2, 4, 6)
    density_per_km2: tuple = (70.0,)
    gamma: tuple = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    t_grid: tuple = tuple(round(0.05 * i, 2) for i in range(1, 20))

    def __post_init__(self):
        for name in ("tau_db", "nc", "density_per_km2", "gamma", "t_grid"):
            v = getattr(self, name)
            if len(v) == 0:
                raise ConfigError(f"sweep.{name}: must be non-empty")
            if any(not isinstance(x, (int, float)) or isinstance(x, bool) for x in v):
                raise ConfigError(f"sweep.{name}: entries must be numbers")
            if list(v) != sorted(v) or len(set(v)) != len(v):
                raise ConfigError(f"sweep.{name}: must be strictly increasing")
        if any(int(k) != k or k < 1 for k in self.nc):
            raise ConfigError("sweep.nc: cluster sizes must be integers >= 1")
        if any(d <= 0 for d in self.density_per_km2):
            raise ConfigError("sweep.density_per_km2: densities must be > 0")
        if any(not 0 <= g <= 1 for g in self.gamma):
            raise ConfigError("sweep.gamma: energy splits must lie in [0, 1]")
        if any(not 0 < t < 1 for t in self.t_grid):
            raise ConfigError("sweep.t_grid: reliability levels must lie in (0, 1)")


@dataclass(frozen=True)
class NumericsConfig:
    geometry_samples: int = 8192
    meta_samples: int = 8192
    replicates: int = 8

    def __post_init__(self):
        if self.replicates < 2:
            raise ConfigError("numerics.replicates: must be >= 2")
        if self.geometry_samples < self.replicates or self.meta_samples < self.replicates:
            raise ConfigError("numerics: sample counts must be at least the replicate count")


@dataclass(frozen=True)
class Config:
    system: SystemParams = field(default_factory=SystemParams)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    quadrature: "object" = None


def _section(cls, data, name):
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{name}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name in data:
            v = data[f.name]
            if isinstance(f.default, tuple):
                if not isinstance(v, (list, tuple)):
                    raise ConfigError(f"{name}.{f.name}: expected a list")
                v = tuple(v)
            kwargs[f.name] = v
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def load_config(text: str) -> Config:
    """Parse a TOML config document into a validated Config."""
    from .quadrature import QuadratureSpec

    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from None
    sections = {"simulation", "sweep", "numerics", "quadrature"}
    top = {k: v for k, v in doc.items() if k not in sections}
    for k in sections & set(doc):
        if not isinstance(doc[k], dict):
            raise ConfigError(f"{k}: expected a section")
    for name, v in top.items():
        if isinstance(v, dict):
            raise ConfigError(f"unknown section [{name}]")
    system = _section(SystemParams, top, "system")
    try:
        quad = _section(QuadratureSpec, doc.get("quadrature", {}), "quadrature")
    except ValueError as exc:
        raise ConfigError(f"quadrature: {exc}") from None
    cfg = Config(
        system=system,
        simulation=_section(SimulationConfig, doc.get("simulation", {}), "simulation"),
        sweep=_section(SweepConfig, doc.get("sweep", {}), "sweep"),
        numerics=_section(NumericsConfig, doc.get("numerics", {}), "numerics"),
        quadrature=quad,
    )
    return cfg


def load_params(text: str) -> SystemParams:
    return load_config(text).system


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize(p: SystemParams) -> str:
    """TOML text for ``p``; ``load_params(serialize(p)) == p``."""
    return "".join(f"{f.name} = {_toml_value(getattr(p, f.name))}\n" for f in fields(p))


def serialize_config(cfg: Config) -> str:
    out = [serialize(cfg.system)]
    for name in ("simulation", "sweep", "numerics", "quadrature"):
        obj = getattr(cfg, name)
        if obj is None:
            continue
        out.append(f"\n[{name}]\n")
        for f in fields(obj):
            v = getattr(obj, f.name)
            if v is not None:
                out.append(f"{f.name} = {_toml_value(v)}\n")
    return "".join(out)
