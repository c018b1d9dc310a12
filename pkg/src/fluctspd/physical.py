"""Material parameters, thermal occupation factors and dielectric functions.

Frequencies passed to the functions in this module are in Hartree atomic
units (use :func:`fluctspd.units.rad_s_to_au` to convert), temperatures in
Kelvin, wavenumbers in 1/Bohr.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import units

__all__ = [
    "MaterialParams",
    "DerivedMaterial",
    "aluminum",
    "thermal_factors",
    "dielectric_local",
    "dielectric_nonlocal",
    "planck_density",
    "derive_material",
]


@dataclass(frozen=True)
class MaterialParams:
    """Drude/hydrodynamic and jellium parameters of a free-electron metal.

    Attributes
    ----------
    plasma_frequency : float
        Plasma frequency in rad/s.
    collision_rate : float
        Collision rate in 1/s.
    fermi_velocity : float
        Fermi velocity in cm/s.
    wigner_seitz_radius : float
        r_s in Bohr.
    temperature : float
        Temperature in K.
    """

    plasma_frequency: float
    collision_rate: float
    fermi_velocity: float
    wigner_seitz_radius: float
    temperature: float = 300.0

    def __post_init__(self):
        if not self.plasma_frequency > 0:
            raise ValueError("plasma_frequency must be positive")
        if not 0 <= self.collision_rate < self.plasma_frequency:
            raise ValueError("collision_rate must satisfy 0 <= nu < omega_p")
        if not self.fermi_velocity > 0:
            raise ValueError("fermi_velocity must be positive")
        if not self.wigner_seitz_radius > 0:
            raise ValueError("wigner_seitz_radius must be positive")
        if not self.temperature >= 0:
            raise ValueError("temperature must be non-negative")

    # atomic-unit views
    @property
    def wp(self) -> float:
        return units.rad_s_to_au(self.plasma_frequency)

    @property
    def nu(self) -> float:
        return units.rad_s_to_au(self.collision_rate)

    @property
    def vf(self) -> float:
        return units.cm_s_to_au(self.fermi_velocity)

    @property
    def beta(self) -> float:
        """Hydrodynamic pressure velocity sqrt(3/5) v_F in a.u."""
        return math.sqrt(0.6) * self.vf

    @property
    def kT(self) -> float:
        return units.kelvin_to_hartree(self.temperature)


def aluminum(temperature: float = 300.0) -> MaterialParams:
    """Aluminum parameters used throughout the examples and figures."""
    return MaterialParams(
        plasma_frequency=2.3e16,
        collision_rate=1.3e14,
        fermi_velocity=2.03e8,
        wigner_seitz_radius=2.07,
        temperature=temperature,
    )


@dataclass(frozen=True)
class DerivedMaterial:
    """Jellium quantities derived from r_s (all in atomic units)."""

    beta: float
    fermi_wavenumber: float
    fermi_energy: float
    background_density: float
    jellium_plasma_frequency: float
    plasma_frequency_ratio: float
    vacuum_extension: float


def derive_material(mat: MaterialParams) -> DerivedMaterial:
    rs = mat.wigner_seitz_radius
    kf = (9.0 * math.pi / 4.0) ** (1.0 / 3.0) / rs
    wp_jellium = math.sqrt(3.0 / rs**3)
    return DerivedMaterial(
        beta=mat.beta,
        fermi_wavenumber=kf,
        fermi_energy=0.5 * kf * kf,
        background_density=3.0 / (4.0 * math.pi * rs**3),
        jellium_plasma_frequency=wp_jellium,
        # diagnostic only: the input omega_p is not forced to the jellium value
        plasma_frequency_ratio=wp_jellium / mat.wp,
        vacuum_extension=3.0 * math.pi / (8.0 * kf),
    )


def thermal_factors(omega, temperature):
    """Bose and coth thermal factors, in units of hbar.

    Returns ``(bose, coth)`` with ``bose = 1/(exp(w/kT) - 1)`` and
    ``coth = coth(w/2kT)``; at ``T = 0`` these are 0 and 1.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("thermal factors need omega > 0")
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if temperature == 0:
        zero = np.zeros_like(omega)
        return zero[()], (zero + 1.0)[()]
    x = omega / units.kelvin_to_hartree(temperature)
    with np.errstate(over="ignore"):
        bose = 1.0 / np.expm1(x)
        coth = 1.0 / np.tanh(0.5 * x)
    return bose[()], coth[()]


def bose_factor(omega, temperature):
    return thermal_factors(omega, temperature)[0]


def dielectric_local(omega, mat: MaterialParams):
    """Drude permittivity 1 - wp^2 / (w^2 + i nu w)."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be positive")
    wp, nu = mat.wp, mat.nu
    return (1.0 - wp * wp / (omega * omega + 1j * nu * omega))[()]


def dielectric_nonlocal(omega, k, mat: MaterialParams):
    """Hydrodynamic longitudinal permittivity 1 - wp^2 / (w^2 + i nu w - beta^2 k^2)."""
    omega = np.asarray(omega, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be positive")
    if np.any(k < 0):
        raise ValueError("k must be non-negative")
    wp, nu, b = mat.wp, mat.nu, mat.beta
    return (1.0 - wp * wp / (omega * omega + 1j * nu * omega - b * b * k * k))[()]


def planck_density(omega, temperature):
    """Black-body spectral energy density per unit angular frequency (a.u.).

    Thermal part only: w^3 / (pi^2 c^3) / (exp(w/kT) - 1).
    """
    if temperature <= 0:
        raise ValueError("planck_density needs T > 0")
    omega = np.asarray(omega, dtype=float)
    bose, _ = thermal_factors(omega, temperature)
    return (omega**3 / (math.pi**2 * units.C_AU**3) * bose)[()]
