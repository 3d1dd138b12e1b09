"""Cooperative ISAC sensing analysis: stochastic-geometry formulas and an exact
Monte Carlo network simulator."""

from .params import SystemParams, DerivedParams, derive, load_config, ConfigError
from .quadrature import QuadratureSpec

__all__ = ["SystemParams", "DerivedParams", "derive", "load_config", "ConfigError",
           "QuadratureSpec"]
__version__ = "0.1.0"
