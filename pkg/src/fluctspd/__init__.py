"""Thermal electric-field fluctuations near metal surfaces and thin films.

Three descriptions of the metal are provided: a local Drude half-space, a
nonlocal hydrodynamic half-space, and a self-consistent jellium film with
RPA screening.  Internal quantities are in Hartree atomic units.
"""

__version__ = "0.1.0"

from .errors import ConfigError, ConvergenceError, FluctSpdError, QuadratureError, SingularKernelError
from .physical import MaterialParams, aluminum, derive_material, thermal_factors

__all__ = [
    "__version__",
    "ConfigError",
    "ConvergenceError",
    "FluctSpdError",
    "QuadratureError",
    "SingularKernelError",
    "MaterialParams",
    "aluminum",
    "derive_material",
    "thermal_factors",
]
