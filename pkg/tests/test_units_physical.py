import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluctspd import units
from fluctspd.physical import (
    MaterialParams,
    aluminum,
    bose_factor,
    derive_material,
    dielectric_local,
    dielectric_nonlocal,
    planck_density,
    thermal_factors,
)


@given(st.floats(1e-3, 1e20))
def test_conversions_round_trip(x):
    for fwd, back in [
        (units.rad_s_to_au, units.au_to_rad_s),
        (units.nm_to_bohr, units.bohr_to_nm),
        (units.cm_to_bohr, units.bohr_to_cm),
        (units.ev_to_hartree, units.hartree_to_ev),
        (units.kelvin_to_hartree, units.hartree_to_kelvin),
    ]:
        assert back(fwd(x)) == pytest.approx(x, rel=1e-12)


def test_aluminum_in_atomic_units(mat):
    assert mat.wp == pytest.approx(0.5563, rel=1e-3)
    assert mat.nu == pytest.approx(3.145e-3, rel=1e-3)
    assert mat.vf == pytest.approx(0.928, rel=1e-3)
    assert mat.beta == pytest.approx(math.sqrt(0.6) * mat.vf)


def test_derived_jellium_quantities(mat):
    d = derive_material(mat)
    assert d.fermi_wavenumber == pytest.approx(0.9272, rel=1e-3)
    assert units.hartree_to_ev(d.fermi_energy) == pytest.approx(11.70, abs=0.02)
    assert d.background_density == pytest.approx(3 / (4 * math.pi * 2.07**3))
    assert d.vacuum_extension == pytest.approx(3 * math.pi / (8 * d.fermi_wavenumber))
    # the input plasma frequency is close to, but not forced to, the jellium value
    assert 0.8 < d.plasma_frequency_ratio < 1.3


@pytest.mark.parametrize(
    "kw",
    [
        dict(plasma_frequency=-1.0),
        dict(collision_rate=3e16),
        dict(fermi_velocity=0.0),
        dict(wigner_seitz_radius=0.0),
        dict(temperature=-1.0),
    ],
)
def test_material_validation(kw):
    base = dict(plasma_frequency=2.3e16, collision_rate=1.3e14, fermi_velocity=2.03e8,
                wigner_seitz_radius=2.07)
    base.update(kw)
    with pytest.raises(ValueError):
        MaterialParams(**base)


@settings(max_examples=200)
@given(st.floats(1e-6, 10.0), st.floats(1.0, 5000.0))
def test_coth_equals_one_plus_twice_bose(omega, T):
    bose, coth = thermal_factors(omega, T)
    assert coth == pytest.approx(1.0 + 2.0 * bose, rel=1e-12)


def test_thermal_factors_limits():
    assert thermal_factors(0.1, 0.0) == (0.0, 1.0)
    with pytest.raises(ValueError):
        thermal_factors(0.0, 300.0)
    # classical limit kT/omega
    kT = units.kelvin_to_hartree(300.0)
    assert bose_factor(1e-9 * kT, 300.0) == pytest.approx(1e9, rel=1e-6)


def test_dielectric_functions(mat):
    w = 0.1 * mat.wp
    eps = dielectric_local(w, mat)
    assert eps.imag > 0
    assert eps == pytest.approx(-98.68 + 5.634j, rel=1e-3)
    assert dielectric_nonlocal(w, 0.0, mat) == eps
    # hydrodynamic pole moves with k
    assert dielectric_nonlocal(w, 1.0, mat) != eps


def test_planck_density_peak():
    """Wien peak of omega^3 bose at x = 2.8214, located by an independent bisection."""
    T = 300.0
    kT = units.kelvin_to_hartree(T)
    xs = np.linspace(0.5, 6.0, 20001)
    u = planck_density(xs * kT, T)
    x_peak = xs[np.argmax(u)]
    # root of 3 (1 - e^-x) = x by bisection
    lo, hi = 1.0, 5.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if 3.0 * (1.0 - math.exp(-mid)) - mid > 0:
            lo = mid
        else:
            hi = mid
    assert x_peak == pytest.approx(lo, abs=1e-3)
    assert lo == pytest.approx(2.8214, abs=1e-4)
    with pytest.raises(ValueError):
        planck_density(1.0, 0.0)


def test_aluminum_temperature_override():
    assert aluminum(10.0).temperature == 10.0
