"""Unit conversions between Hartree atomic units and laboratory units.

All internal computation is done in Hartree atomic units (hbar = m_e = e = 1,
Gaussian electrostatics).  Values read from configuration files or written to
tables are converted with the factors below.
"""

from scipy import constants as _sc

_pc = _sc.physical_constants

#: atomic unit of time in seconds; omega[a.u.] = omega[rad/s] * AU_TIME_S
AU_TIME_S = _pc["atomic unit of time"][0]
#: Bohr radius in cm
BOHR_CM = _pc["Bohr radius"][0] * 1e2
#: Bohr radius in nm
BOHR_NM = _pc["Bohr radius"][0] * 1e9
#: Hartree energy in eV
HARTREE_EV = _pc["Hartree energy in eV"][0]
#: Boltzmann constant in Hartree per Kelvin
KELVIN_HARTREE = _pc["kelvin-hartree relationship"][0]
#: atomic unit of velocity in cm/s
AU_VELOCITY_CM_S = _pc["atomic unit of velocity"][0] * 1e2
#: speed of light in atomic units (1/alpha)
C_AU = 1.0 / _pc["fine-structure constant"][0]


def rad_s_to_au(omega):
    return omega * AU_TIME_S


def au_to_rad_s(omega):
    return omega / AU_TIME_S


def hartree_to_ev(energy):
    return energy * HARTREE_EV


def ev_to_hartree(energy):
    return energy / HARTREE_EV


def nm_to_bohr(length):
    return length / BOHR_NM


def bohr_to_nm(length):
    return length * BOHR_NM


def cm_to_bohr(length):
    return length / BOHR_CM


def bohr_to_cm(length):
    return length * BOHR_CM


def cm_s_to_au(velocity):
    return velocity / AU_VELOCITY_CM_S


def kelvin_to_hartree(temperature):
    return temperature * KELVIN_HARTREE


def hartree_to_kelvin(energy):
    return energy / KELVIN_HARTREE
