"""Continuum response models of a metal half-space.

* local quasi-static baseline (Drude permittivity, sharp surface),
* hydrodynamic half-space with a nonlocal pressure term beta,
* bulk spectrum of an infinite nonlocal medium.

Atomic units throughout: ``omega`` in Hartree, lengths in Bohr, wavenumbers
in 1/Bohr.  SPD values carry hbar = 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate

from . import units
from .errors import QuadratureError, SingularKernelError
from .physical import (
    MaterialParams,
    bose_factor,
    dielectric_local,
    dielectric_nonlocal,
)

__all__ = [
    "HydroKernel",
    "QuadratureSpec",
    "SpdValue",
    "BulkValue",
    "decaying_root",
    "hydro_kernel",
    "hydro_bracket",
    "hydro_spd_zz",
    "hydro_chi_kernel",
    "hydro_laplace_closed",
    "local_spd_zz",
    "local_surface_loss",
    "bulk_spectrum",
    "bulk_integrand",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Settings for the adaptive semi-infinite integrals."""

    rtol: float = 1e-9
    atol: float = 0.0
    qmax_multiplier: float = 40.0
    limit: int = 500
    rule: str = "quadpack-qags"

    def __post_init__(self):
        if not self.rtol > 0:
            raise ValueError("rtol must be positive")
        if self.atol < 0:
            raise ValueError("atol must be non-negative")
        if self.qmax_multiplier < 10:
            raise ValueError("qmax_multiplier must be >= 10")


class SpdValue(NamedTuple):
    zz: float
    xx: float
    abserr: float = 0.0


class BulkValue(NamedTuple):
    g_ee: float
    longitudinal: float
    transverse: float
    abserr: float


@dataclass(frozen=True)
class HydroKernel:
    QL: complex
    QT: complex
    QT0: complex
    gamma: complex


def decaying_root(x):
    """Square root with Re >= 0; ties (purely imaginary roots) take Im >= 0."""
    r = np.sqrt(np.asarray(x, dtype=complex))
    flip = (r.real < 0) | ((r.real == 0) & (r.imag < 0))
    return np.where(flip, -r, r)[()]


def _qs_gamma(Q, QL, eps):
    # c -> infinity form with the common factor Q cancelled (finite at Q = 0)
    return 2.0 * Q * (1.0 - eps) / (QL * (eps + 1.0) + (eps - 1.0) * Q)


def hydro_kernel(Q, omega, mat: MaterialParams, retarded: bool = True) -> HydroKernel:
    """Wavenumbers Q_L, Q_T, Q_T0 and surface coupling gamma.

    With ``retarded=False`` the transverse wavenumbers are taken in the
    quasi-static limit ``c -> infinity`` (Q_T = Q_T0 = Q).
    """
    if np.any(np.asarray(Q) < 0) or omega <= 0:
        raise ValueError("need Q >= 0 and omega > 0")
    Q = np.asarray(Q, dtype=float)
    wp, nu, b = mat.wp, mat.nu, mat.beta
    eps = dielectric_local(omega, mat)
    QL = decaying_root(Q * Q + (wp * wp - omega * omega - 1j * omega * nu) / (b * b))
    if retarded:
        k0sq = (omega / units.C_AU) ** 2
        QT = decaying_root(Q * Q - k0sq * eps)
        QT0 = decaying_root(Q * Q - k0sq)
        den = QL * (eps * QT0 + QT) + (eps - 1.0) * Q * Q
        if np.any(den == 0):
            raise SingularKernelError(
                f"gamma denominator vanishes at Q={Q}, omega={omega}", Q, omega
            )
        gamma = 2.0 * Q * Q * (1.0 - eps) / den
    else:
        QT = QT0 = Q + 0j
        den = QL * (eps + 1.0) + (eps - 1.0) * Q
        if np.any(den == 0):
            raise SingularKernelError(
                f"gamma denominator vanishes at Q={Q}, omega={omega}", Q, omega
            )
        gamma = _qs_gamma(Q, QL, eps)
    return HydroKernel(QL=QL, QT=QT, QT0=QT0, gamma=gamma)


def hydro_bracket(Q, omega, mat: MaterialParams, retarded: bool = False):
    """Complex integrand (Q / 2Q_L) [1 - (Q_L - Q)/(Q_L + Q) (1 + gamma)].

    Evaluated as 2Q/(Q_L+Q) - r*gamma to avoid cancellation at small Q.
    """
    Q = np.asarray(Q, dtype=float)
    k = hydro_kernel(Q, omega, mat, retarded=retarded)
    QL = k.QL
    r = (QL - Q) / (QL + Q)
    return (Q / (2.0 * QL) * (2.0 * Q / (QL + Q) - r * k.gamma))[()]


def hydro_laplace_closed(Q, omega, mat: MaterialParams, retarded: bool = False):
    """Closed-form double Laplace transform of the hydrodynamic chi kernel.

    (wp^2 / 4 pi beta^2) (1 / 2Q_L) [1 - (Q_L - Q)/(Q_L + Q)(1 + gamma)]
    """
    wp, b = mat.wp, mat.beta
    return (wp * wp / (4.0 * math.pi * b * b)) * hydro_bracket(
        Q, omega, mat, retarded
    ) / np.asarray(Q, dtype=float)


def hydro_chi_kernel(z1, z2, Q, omega, mat: MaterialParams, retarded: bool = False):
    """Half-space charge response chi(z1, z2; Q, omega) for z1, z2 <= 0.

    Returns ``(regular, delta_weight)``: the regular part of the kernel and the
    coefficient of the distributional term delta(z1 - z2).
    """
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    if np.any(z1 > 0) or np.any(z2 > 0):
        raise ValueError("the hydrodynamic kernel is defined on the metal side z <= 0")
    wp, nu, b = mat.wp, mat.nu, mat.beta
    k = hydro_kernel(Q, omega, mat, retarded=retarded)
    QL = k.QL
    pref = wp * wp / (4.0 * math.pi * b * b)
    # Q_L^2 - Q^2 written without cancellation
    ql2_minus_q2 = (wp * wp - omega * omega - 1j * omega * nu) / (b * b)
    regular = -pref * (ql2_minus_q2 / (2.0 * QL)) * (
        np.exp(-QL * np.abs(z1 - z2)) + (1.0 + k.gamma) * np.exp(QL * (z1 + z2))
    )
    return regular[()], pref


def _integrate_pieces(f, edges, spec: QuadratureSpec, tail=True, what="integral"):
    """Integrate real ``f`` over consecutive ``edges`` (and [edges[-1], inf))."""
    total = 0.0
    err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        spans = list(zip(edges[:-1], edges[1:]))
        if tail:
            spans.append((edges[-1], np.inf))
        for a, b in spans:
            if b <= a:
                continue
            val, e = integrate.quad(
                f, a, b, epsabs=spec.atol, epsrel=spec.rtol * 1e-2, limit=spec.limit
            )
            total += val
            err += e
    bound = max(spec.rtol * abs(total), spec.atol)
    if not np.isfinite(total) or err > bound:
        raise QuadratureError(
            f"{what}: estimate {total:.6e} with error {err:.3e} exceeds {bound:.3e}",
            estimate=total,
            error=err,
        )
    return total, err


def hydro_spd_zz(
    h,
    omega,
    mat: MaterialParams,
    quad: QuadratureSpec | None = None,
    retarded: bool = False,
) -> SpdValue:
    """Vacuum-side SPD of the normal field component above a hydrodynamic half-space.

    g_zz = bose * (wp^2 / beta^2) * Im int_0^inf dQ exp(-2Qh) bracket(Q),
    with g_xx = g_zz / 2.  Finite at h = 0.  ``h`` is measured from the edge
    of the positive background, in Bohr.
    """
    quad = quad or QuadratureSpec()
    if h < 0 or omega <= 0:
        raise ValueError("need h >= 0 and omega > 0")
    wp, b = mat.wp, mat.beta
    kappa = wp / b
    scale = max(1.0 / (2.0 * h), kappa) if h > 0 else kappa
    qmax = quad.qmax_multiplier * scale

    def f(Q):
        return (hydro_bracket(Q, omega, mat, retarded) * math.exp(-2.0 * Q * h)).imag

    pts = [kappa * x for x in (0.1, 1.0, 4.0)]
    if h > 0:
        pts += [x / (2.0 * h) for x in (0.1, 1.0, 5.0, 15.0)]
    if retarded:
        k0 = omega / units.C_AU
        eps = dielectric_local(omega, mat)
        pts += [k0, k0 * math.sqrt(abs((eps / (eps + 1.0)).real)), 2 * k0]
    edges = [0.0] + sorted(p for p in set(pts) if 0 < p < qmax) + [qmax]
    val, err = _integrate_pieces(f, edges, quad, tail=True, what="hydro Q-integral")
    pref = bose_factor(omega, mat.temperature) * wp * wp / (b * b)
    zz = pref * val
    return SpdValue(zz=zz, xx=0.5 * zz, abserr=abs(pref) * err)


def local_surface_loss(omega, mat: MaterialParams) -> float:
    """Im[(eps - 1)/(eps + 1)] of the Drude permittivity."""
    eps = dielectric_local(omega, mat)
    return float(((eps - 1.0) / (eps + 1.0)).imag)


def local_spd_zz(h, omega, mat: MaterialParams) -> SpdValue:
    """Quasi-static local SPD: bose * Im[(eps-1)/(eps+1)] / (2 h^3).

    Diverges as h -> 0, so ``h = 0`` is rejected.
    """
    if h <= 0:
        raise ValueError("local model is singular at h = 0; need h > 0")
    if omega <= 0:
        raise ValueError("omega must be positive")
    zz = bose_factor(omega, mat.temperature) * local_surface_loss(omega, mat) / (2.0 * h**3)
    return SpdValue(zz=zz, xx=0.5 * zz)


def bulk_integrand(k, omega, mat: MaterialParams):
    """Return (transverse, longitudinal) parts of 4 pi k^2 g_EE(omega, k) / theta."""
    k = np.asarray(k, dtype=float)
    eps = dielectric_nonlocal(omega, k, mat)
    c = units.C_AU
    trans = omega**3 / math.pi**3 * eps.imag / np.abs(k * k * c * c - omega * omega * eps) ** 2
    longi = eps.imag / np.abs(eps) ** 2 / (2.0 * math.pi**3 * omega)
    w = 4.0 * math.pi * k * k
    return (w * trans)[()], (w * longi)[()]


def bulk_spectrum(omega, mat: MaterialParams, quad: QuadratureSpec | None = None) -> BulkValue:
    """Trace of the electric SPD inside an infinite nonlocal medium.

    g_EE(omega) = 4 pi int_0^inf g_EE(omega, k) k^2 dk with the thermal
    factor theta = omega * bose (no zero-point term).  The k^-2 tail of the
    longitudinal term beyond k_max is added analytically.
    """
    quad = quad or QuadratureSpec()
    if omega <= 0:
        raise ValueError("omega must be positive")
    wp, nu, b = mat.wp, mat.nu, mat.beta
    c = units.C_AU
    eps0 = dielectric_local(omega, mat)
    kappa = wp / b
    kmax = 1e3 * kappa
    kt = omega * math.sqrt(abs(eps0.real)) / c

    def ft(k):
        return bulk_integrand(k, omega, mat)[0]

    def fl(k):
        return bulk_integrand(k, omega, mat)[1]

    edges_t = [0.0] + [kt * x for x in (0.3, 1.0, 3.0, 30.0)] + [kappa, kmax]
    edges_l = [0.0] + [kappa * x for x in (0.1, 0.3, 1.0, 3.0, 10.0, 100.0)] + [kmax]
    t_val, t_err = _integrate_pieces(ft, sorted(edges_t), quad, tail=False, what="bulk transverse")
    l_val, l_err = _integrate_pieces(fl, edges_l, quad, tail=False, what="bulk longitudinal")
    # longitudinal tail: 4 pi k^2 * wp^2 nu omega / (beta^4 k^4) / (2 pi^3 omega)
    a2 = wp * wp - omega * omega
    tail_coeff = 2.0 * wp * wp * nu / (math.pi**2 * b**4)
    l_tail = tail_coeff / kmax
    tail_err = l_tail * 2.0 * a2 / (3.0 * (b * kmax) ** 2)
    theta = omega * bose_factor(omega, mat.temperature)
    longi = theta * (l_val + l_tail)
    trans = theta * t_val
    return BulkValue(
        g_ee=longi + trans,
        longitudinal=longi,
        transverse=trans,
        abserr=theta * (t_err + l_err + tail_err),
    )
