"""Independent-particle and RPA density response of a jellium slab, and the
electric-field spectral power density above the film.

Conventions
-----------
Atomic units with e = 1.  The box ``[0, L]`` of the SCF solution is used as
the integration domain; ``z`` is measured from the box wall facing the
observer, which sits at height ``h`` above that wall.  Response functions use
the standard causal sign, so ``Im chi < 0`` for ``omega > 0``; the loss
entering the SPD is therefore ``-Im``.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple
import warnings

import numpy as np
from scipy import linalg

from .errors import QuadratureError, SingularKernelError
from .grid import uniform_grid
from .jellium import ScfSolution, basis_functions, chemical_potential
from .physical import bose_factor

log = logging.getLogger(__name__)

__all__ = [
    "ResponseGrid",
    "SubbandSet",
    "subband_set",
    "f_coefficient",
    "pair_overlaps",
    "chi0_matrix",
    "coulomb_kernel",
    "coulomb_operator",
    "coulomb_parts",
    "CoulombParts",
    "dyson_solve",
    "g0_closed",
    "g0_ibm",
    "g_interaction",
    "FilmResponse",
    "film_spd",
    "default_q_range",
    "DysonResult",
    "pair_densities",
]

MODES = ("zero", "first", "full")
FLAVORS = ("self_consistent", "ibm")


@dataclass(frozen=True)
class ResponseGrid:
    """z-nodes on ``[0, L]`` with Simpson weights, plus the broadening ``eta``.

    ``eta`` is in Hartree (use the collision rate in a.u. by default).
    """

    z: np.ndarray
    weights: np.ndarray
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("broadening eta must be positive")
        if self.z.shape != self.weights.shape or self.z.ndim != 1:
            raise ValueError("z and weights must be 1-D arrays of equal length")

    @classmethod
    def uniform(cls, length: float, n: int, eta: float) -> "ResponseGrid":
        z, w = uniform_grid(n, length)
        return cls(z=z, weights=w, eta=eta)

    @property
    def length(self) -> float:
        return float(self.z[-1] - self.z[0])

    @property
    def n(self) -> int:
        return self.z.size


@dataclass(frozen=True)
class SubbandSet:
    """Subbands entering the response sum.

    ``occupied`` indexes the states with ``eps < mu`` (the l sum) and
    ``included`` the states up to the energy cutoff (the l' sum).
    """

    energies: np.ndarray
    coeffs: np.ndarray
    mu: float
    length: float
    occupied: np.ndarray
    included: np.ndarray
    flavor: str = "self_consistent"

    def __post_init__(self):
        if self.included.size < self.occupied.size:
            raise ValueError("subband cutoff is below the number of occupied subbands")

    @property
    def kf2(self) -> np.ndarray:
        """k_l^2 = 2 (mu - eps_l) for the occupied states."""
        return 2.0 * (self.mu - self.energies[self.occupied])

    def pairs(self):
        """Index arrays (l, l') over occupied x included."""
        l, lp = np.meshgrid(self.occupied, self.included, indexing="ij")
        return l.ravel(), lp.ravel()


def subband_set(
    sol: ScfSolution,
    flavor: str = "self_consistent",
    cutoff: float = 4.0,
    max_states: int | None = None,
) -> SubbandSet:
    """Select the subbands of ``sol`` used by the response sums.

    Parameters
    ----------
    flavor : {"self_consistent", "ibm"}
        ``"ibm"`` replaces the states by the bare box states of the same box
        (coefficients = identity, energies (s pi / L)^2 / 2) and recomputes
        the chemical potential for the same sheet density.
    cutoff : float
        l' runs over states with ``eps - eps_1 < cutoff * E_F`` where E_F is
        the free-electron Fermi energy of the background density.
    max_states : int, optional
        Explicit cap on the number of included states (overrides ``cutoff``).
    """
    if flavor not in FLAVORS:
        raise ValueError(f"flavor must be one of {FLAVORS}")
    L = sol.box_length
    if flavor == "ibm":
        s = np.arange(1, sol.n_basis + 1)
        energies = 0.5 * (s * math.pi / L) ** 2
        coeffs = np.eye(sol.n_basis)
        mu = chemical_potential(energies, sol.background_density * sol.thickness, sol.temperature)
    else:
        energies, coeffs, mu = np.asarray(sol.energies), np.asarray(sol.coeffs), sol.mu
    order = np.argsort(energies)
    occupied = order[energies[order] < mu]
    if max_states is None:
        ef = 0.5 * (3.0 * math.pi**2 * sol.background_density) ** (2.0 / 3.0)
        included = order[energies[order] - energies[order[0]] < cutoff * ef]
    else:
        included = order[:max_states]
    return SubbandSet(
        energies=energies,
        coeffs=coeffs,
        mu=float(mu),
        length=L,
        occupied=occupied,
        included=included,
        flavor=flavor,
    )


def _sqrt_upper(x):
    """Square root on the branch with Im >= 0."""
    r = np.sqrt(x + 0j)
    return np.where(r.imag < 0, -r, r)


def f_coefficient(Q, omega, eta, eps_l, eps_lp, kl2):
    """Subband pair response coefficient F_{l l'}(Q, omega).

    Closed form of the two-dimensional Lindhard integral over the occupied
    disk ``|k| < k_l`` (spin included),

        F = -(1 / pi Q^2) [2a + g(w - a) - g(w + a)],
        a = Q^2/2 - (eps_l - eps_l'),  w = omega + i eta,
        g(x) = sqrt(x^2 - k_l^2 Q^2)  with Im g >= 0,

    evaluated in the algebraically equivalent form
    ``(k_l^2 / pi) [1/(g(w-a) + w - a) - 1/(g(w+a) + w + a)]``, which has no
    cancellation at small Q.  All arguments broadcast.
    """
    Q = np.asarray(Q, dtype=float)
    if np.any(Q < 0):
        raise ValueError("Q must be non-negative")
    if not eta > 0:
        raise ValueError("eta must be positive")
    kl2 = np.asarray(kl2, dtype=float)
    if np.any(kl2 < 0):
        raise ValueError("l must be an occupied subband (k_l^2 >= 0)")
    a = 0.5 * Q * Q - (np.asarray(eps_l) - np.asarray(eps_lp))
    w = omega + 1j * eta
    c = kl2 * Q * Q
    z1 = w - a
    z2 = w + a
    g1 = _sqrt_upper(z1 * z1 - c)
    g2 = _sqrt_upper(z2 * z2 - c)
    return (kl2 / math.pi * (1.0 / (g1 + z1) - 1.0 / (g2 + z2)))[()]


def _exp_sine_matrix(Q, length, n_basis):
    """M_ss' = int_0^L exp(-Q z) sin(s pi z/L) sin(s' pi z/L) dz in closed form."""
    s = np.arange(1, n_basis + 1, dtype=float)
    S, Sp = np.meshgrid(s, s, indexing="ij")
    x = Q * length
    parity = np.where((S + Sp) % 2 == 0, 1.0, -1.0)
    # 1 - (-1)^(s+s') e^{-QL} without cancellation for the even case
    bracket = np.where(parity > 0, -math.expm1(-x), 1.0 + math.exp(-x))
    num = 2.0 * math.pi**2 * Q * length**2 * bracket * S * Sp
    den = (x * x + math.pi**2 * (S + Sp) ** 2) * (x * x + math.pi**2 * (S - Sp) ** 2)
    return num / den


def pair_overlaps(Q, subbands: SubbandSet) -> np.ndarray:
    """c_{l l'}(Q) = int_0^L exp(-Q z) phi_l phi_l' dz for all state pairs.

    Returns the full (n_states, n_states) matrix.
    """
    if Q <= 0:
        raise ValueError("Q must be positive")
    B = subbands.coeffs
    M = _exp_sine_matrix(Q, subbands.length, B.shape[0])
    return (2.0 / subbands.length) * (B.T @ M @ B)


def _pair_f(Q, omega, eta, subbands: SubbandSet):
    l, lp = subbands.pairs()
    E = subbands.energies
    kl2 = 2.0 * (subbands.mu - E[l])
    return l, lp, f_coefficient(Q, omega, eta, E[l], E[lp], kl2)


def g0_closed(Q, omega, eta, subbands: SubbandSet) -> complex:
    """Bare surface response G0 = sum F_{l l'} c_{l l'}(Q)^2.

    ``c`` is the exact exponential moment of the pair density, built from the
    sine-basis closed form, so no z-grid is involved.
    """
    l, lp, F = _pair_f(Q, omega, eta, subbands)
    C = pair_overlaps(Q, subbands)
    return complex(np.sum(F * C[l, lp] ** 2))


def g0_ibm(Q, omega, eta, subbands: SubbandSet) -> complex:
    """G0 with bare box states written out directly (Kronecker-delta coefficients).

    Uses only ``subbands.energies``, ``mu`` and ``length``; the coefficient
    matrix is ignored, so this is an independent evaluation of the IBM limit.
    """
    L = subbands.length
    l, lp, F = _pair_f(Q, omega, eta, subbands)
    s = (l + 1).astype(float)
    sp = (lp + 1).astype(float)
    x = Q * L
    sign = np.where((l + lp) % 2 == 0, 1.0, -1.0)
    num = 2.0 * math.pi**2 * Q * L**2 * (1.0 - sign * math.exp(-x)) * s * sp
    den = (
        math.pi**4 * (s * s - sp * sp) ** 2
        + 2.0 * math.pi**2 * x * x * (s * s + sp * sp)
        + x**4
    )
    return complex(4.0 / L**2 * np.sum(F * (num / den) ** 2))


def pair_densities(z, subbands: SubbandSet):
    """v_p(z) = phi_l(z) phi_l'(z) for every (l, l') pair; shape (len(z), n_pairs)."""
    l, lp = subbands.pairs()
    phi = basis_functions(np.asarray(z, dtype=float), subbands.length, subbands.coeffs.shape[0])
    phi = phi @ subbands.coeffs
    return phi[:, l] * phi[:, lp]


def chi0_matrix(Q, omega, subbands: SubbandSet, grid: ResponseGrid, pair_dens=None):
    """chi0(z_i, z_j) = sum_p F_p v_p(z_i) v_p(z_j) on the grid nodes.

    ``pair_dens`` may pass a precomputed :func:`pair_densities` array.
    """
    if Q <= 0:
        raise ValueError("Q must be positive")
    V = pair_densities(grid.z, subbands) if pair_dens is None else pair_dens
    _, _, F = _pair_f(Q, omega, grid.eta, subbands)
    chi = (V * F.real) @ V.T + 1j * ((V * F.imag) @ V.T)
    # BLAS blocking can break symmetry at the last bit; restore it exactly
    return 0.5 * (chi + chi.T)


def coulomb_kernel(z1, z2, Q):
    """2D Fourier transform of the Coulomb interaction, 2 pi exp(-Q|z1-z2|)/Q."""
    if np.any(np.asarray(Q) <= 0):
        raise ValueError("Coulomb kernel needs Q > 0")
    return (2.0 * math.pi * np.exp(-Q * np.abs(np.asarray(z1) - np.asarray(z2))) / Q)[()]


def _hat_moments(x):
    """Moments of exp(-x t) against the two hat halves on [0, 1].

    Returns ``a0 = int (1-t) e^{-xt} dt``, ``a1 = int t e^{-xt} dt`` and
    ``b0 = (a0 - 1/2)/x``, ``b1 = (a1 - 1/2)/x``, all evaluated without
    cancellation for small ``x``.
    """
    x = np.asarray(x, dtype=float)
    a0, a1, b0, b1 = (np.empty_like(x) for _ in range(4))
    small = x < 0.5
    xs = x[small]
    s0 = np.zeros_like(xs)
    s1 = np.zeros_like(xs)
    fact = 1.0
    for n in range(1, 18):
        fact *= n
        term = (-1.0) ** n * xs ** (n - 1) / fact
        s0 += term / ((n + 1) * (n + 2))
        s1 += term / (n + 2)
    b0[small], b1[small] = s0, s1
    a0[small], a1[small] = 0.5 + xs * s0, 0.5 + xs * s1
    xl = x[~small]
    a1[~small] = (-np.expm1(-xl) - xl * np.exp(-xl)) / (xl * xl)
    a0[~small] = -np.expm1(-xl) / xl - a1[~small]
    b0[~small] = (a0[~small] - 0.5) / xl
    b1[~small] = (a1[~small] - 0.5) / xl
    return a0, a1, b0, b1


class CoulombParts(NamedTuple):
    """``V_hat = regular + scale * outer(left, right)``.

    The rank-one term carries the ``2 pi / Q`` divergence of the kernel
    (its value at zero separation); ``regular`` stays finite as ``Q -> 0``
    and tends to the 1D kernel ``-2 pi |z - z'|``.  Keeping the two apart
    avoids the cancellation that otherwise limits the accuracy of
    ``chi0 @ V_hat`` at small ``Q``.
    """

    regular: np.ndarray
    left: np.ndarray
    right: np.ndarray
    scale: float

    def dense(self) -> np.ndarray:
        return self.regular + self.scale * np.outer(self.left, self.right)


def coulomb_parts(Q, grid: ResponseGrid, method: str = "product") -> CoulombParts:
    """Split discrete Coulomb operator; see :func:`coulomb_operator`."""
    if Q <= 0:
        raise ValueError("Coulomb operator needs Q > 0")
    z, w = grid.z, grid.weights
    scale = 2.0 * math.pi / Q
    if method == "nystrom":
        reg = 2.0 * math.pi * np.expm1(-Q * np.abs(z[:, None] - z[None, :])) / Q
        return CoulombParts(w[:, None] * reg * w[None, :], w, w.copy(), scale)
    if method != "product":
        raise ValueError("method must be 'product' or 'nystrom'")
    n = z.size
    h = np.diff(z)
    a0, a1, b0, b1 = _hat_moments(Q * h)
    i = np.arange(n)[:, None]
    k = np.arange(n - 1)[None, :]
    right = k >= i  # interval [z_k, z_k+1] lies at or to the right of z_i
    dist = np.where(right, z[k] - z[i], z[i] - z[k + 1])
    em = np.expm1(-Q * dist) / Q
    # per interval: exact weight h * e^{-Q d} * a minus its Q -> 0 limit h / 2,
    # divided by Q; the node nearer z_i carries a0, the farther one a1
    near = h * (em * a0 + h * b0)
    far = h * (em * a1 + h * b1)
    R = np.zeros((n, n))
    R[:, :-1] += np.where(right, near, far)
    R[:, 1:] += np.where(right, far, near)
    hat = np.zeros(n)
    hat[:-1] += 0.5 * h
    hat[1:] += 0.5 * h
    return CoulombParts(w[:, None] * (2.0 * math.pi) * R, w, hat, scale)


def coulomb_operator(Q, grid: ResponseGrid, method: str = "product") -> np.ndarray:
    """Discrete operator V_hat with (V_hat f)_i ~ w_i int V(z_i, z) f(z) dz.

    ``method="nystrom"`` uses ``W V W`` (kernel sampled at nodes, Simpson
    weights on both sides) and is exact in the quadrature sense only while
    ``Q dz`` is small.  ``method="product"`` integrates the exponential
    exactly against piecewise-linear interpolants of ``f``, which stays
    accurate at large ``Q``; the left factor is still the Simpson weight.
    """
    return coulomb_parts(Q, grid, method).dense()


class DysonResult(NamedTuple):
    chi: np.ndarray
    residual: float


def dyson_solve(chi0, v_hat, mode: str = "full", Q=None, omega=None) -> DysonResult:
    """Screen ``chi0`` with the discrete Coulomb operator.

    Parameters
    ----------
    mode : {"zero", "first", "full"}
        ``zero`` returns chi0, ``first`` the one-term iterate
        chi0 + chi0 V chi0, ``full`` the dense solution of
        (I - chi0 V) chi = chi0.

    Returns the matrix and the relative residual
    ``|chi - chi0 - chi0 V chi| / |chi0|`` (Frobenius norms).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "zero":
        chi = chi0
    elif mode == "first":
        chi = chi0 + chi0 @ v_hat @ chi0
    else:
        A = np.eye(chi0.shape[0]) - chi0 @ v_hat
        try:
            chi = np.linalg.solve(A, chi0)
            chi += np.linalg.solve(A, chi0 - A @ chi)  # one refinement step
        except np.linalg.LinAlgError as exc:
            raise SingularKernelError(
                f"Dyson system is singular at Q={Q}, omega={omega}", Q=Q, omega=omega
            ) from exc
    scale = np.linalg.norm(chi0)
    res = np.linalg.norm(chi - chi0 - chi0 @ v_hat @ chi) / scale if scale > 0 else 0.0
    if mode == "full" and not np.isfinite(res) or (mode == "full" and res > 1e-6):
        raise SingularKernelError(
            f"Dyson system is ill-conditioned at Q={Q}, omega={omega} (residual {res:.2e})",
            Q=Q,
            omega=omega,
        )
    return DysonResult(chi, float(res))


def g_interaction(chi0, chi, v_hat, grid: ResponseGrid, Q) -> complex:
    """G = int int u(z') [chi0 V chi](z', z'') u(z'') with u = exp(-Q z)."""
    uw = np.exp(-Q * grid.z) * grid.weights
    return complex(uw @ chi0 @ v_hat @ chi @ uw)


# ---------------------------------------------------------------------------
# film SPD


@dataclass
class _QSample:
    Q: float
    g0: complex
    g: complex
    residual: float
    vector_residual: float = 0.0


def _screen(chi0, parts: CoulombParts, chi0_left, y, Q, omega):
    """Solve (I - chi0 V) x = y and (I - chi0 V) chi = chi0 with one factorization.

    ``V`` is given split as :class:`CoulombParts`; ``chi0_left`` is
    ``chi0 @ parts.left`` computed in pair form so that it keeps full
    relative accuracy when it is small.  Returns ``x``, the matrix residual
    |chi - chi0 - chi0 V chi| / |chi0| and the vector residual
    |x - y - chi0 V x| / |y|.
    """

    def chi0_v(X):
        return chi0 @ (parts.regular @ X) + parts.scale * np.multiply.outer(
            chi0_left, parts.right @ X
        )

    A = np.eye(y.size) - chi0 @ parts.regular
    A -= parts.scale * np.outer(chi0_left, parts.right)
    rhs = np.column_stack([y, chi0])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", linalg.LinAlgWarning)
            lu = linalg.lu_factor(A, check_finite=False)
            sol = linalg.lu_solve(lu, rhs, check_finite=False)
    except (linalg.LinAlgError, linalg.LinAlgWarning, ValueError) as exc:
        raise SingularKernelError(
            f"Dyson system is singular at Q={Q}, omega={omega}", Q=Q, omega=omega
        ) from exc
    x, chi = sol[:, 0], sol[:, 1:]
    res = float(np.linalg.norm(chi - chi0 - chi0_v(chi)) / np.linalg.norm(chi0))
    vres = float(np.linalg.norm(x - y - chi0_v(x)) / np.linalg.norm(y))
    if not res < 1e-6:
        raise SingularKernelError(
            f"Dyson system is ill-conditioned at Q={Q}, omega={omega} (residual {res:.2e})",
            Q=Q,
            omega=omega,
        )
    return x, res, vres


@dataclass
class FilmResponse:
    """Cache of the h-independent surface response G0(Q) + G(Q) at one omega.

    Build one per (solution, omega, mode) and call :meth:`spd` for many
    heights; the Q-samples are shared between heights.
    """

    subbands: SubbandSet
    grid: ResponseGrid
    omega: float
    mode: str = "full"
    coulomb: str = "product"
    threads: int = 1
    _cache: dict = field(default_factory=dict, repr=False)
    _pair_dens: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.mode != "zero":
            self._pair_dens = pair_densities(self.grid.z, self.subbands)

    def sample(self, Q: float) -> _QSample:
        hit = self._cache.get(Q)
        if hit is not None:
            return hit
        eta = self.grid.eta
        l, lp, F = _pair_f(Q, self.omega, eta, self.subbands)
        C = pair_overlaps(Q, self.subbands)
        c = C[l, lp]
        g0 = complex(np.sum(F * c * c))
        g = 0j
        res = vres = 0.0
        if self.mode != "zero":
            V = self._pair_dens
            # y(z) = int chi0(z, z'') exp(-Q z'') dz'' with the exact moments c
            y = V @ (F * c)
            chi0 = (V * F.real) @ V.T + 1j * ((V * F.imag) @ V.T)
            parts = coulomb_parts(Q, self.grid, self.coulomb)
            # overlaps with the rank-one Coulomb term, taken in pair form
            vl = V.T @ parts.left
            if self.mode == "first":
                x = y
            else:
                x, res, vres = _screen(chi0, parts, V @ (F * vl), y, Q, self.omega)
            y_left = complex(np.sum(F * c * vl))
            g = complex(y @ (parts.regular @ x) + parts.scale * y_left * (parts.right @ x))
        out = _QSample(Q, g0, g, res, vres)
        self._cache[Q] = out
        return out

    def loss(self, Q: float) -> float:
        """-Im[G0 + G](Q), non-negative for a passive medium."""
        s = self.sample(Q)
        return -(s.g0 + s.g).imag

    def prefetch(self, Qs):
        todo = [q for q in Qs if q not in self._cache]
        if self.threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                results = list(pool.map(self._sample_nocache, todo))
            for q, r in zip(todo, results):
                self._cache[q] = r
        else:
            for q in todo:
                self.sample(q)

    def _sample_nocache(self, Q):
        # identical numerics to sample(); the cache write happens in prefetch
        probe = FilmResponse.__new__(FilmResponse)
        probe.__dict__.update(self.__dict__)
        probe._cache = {}
        return probe.sample(Q)

    def samples(self) -> list[_QSample]:
        return [self._cache[q] for q in sorted(self._cache)]

    @property
    def max_residual(self) -> float:
        """Largest matrix Dyson residual over the solved Q points."""
        return max((s.residual for s in self._cache.values()), default=0.0)

    @property
    def max_vector_residual(self) -> float:
        return max((s.vector_residual for s in self._cache.values()), default=0.0)

    def integral(self, h, q_range, rtol=1e-5, n_init=256, max_depth=30):
        """int_0^inf Q exp(-2 Q h) (-Im[G0+G]) dQ by adaptive Simpson in ln Q.

        ``q_range = (Q_lo, Q_hi)``; the pieces below Q_lo and above Q_hi are
        bounded by the end-point values and must be negligible.
        """
        lo, hi = map(math.log, q_range)
        t = np.linspace(lo, hi, 2 * n_init + 1)
        self.prefetch(np.exp(t))

        def f(tt):
            q = math.exp(tt)
            return q * q * math.exp(-2.0 * q * h) * self.loss(q)

        vals = [f(tt) for tt in t]
        dt = t[1] - t[0]
        coarse = dt / 3.0 * (vals[0] + vals[-1] + 4 * sum(vals[1:-1:2]) + 2 * sum(vals[2:-1:2]))
        tol = rtol * abs(coarse) / n_init
        refined = 0.0
        errs = 0.0
        for j in range(n_init):
            a, m, b = t[2 * j], t[2 * j + 1], t[2 * j + 2]
            v, e = _simpson_refine(
                f, a, m, b, vals[2 * j], vals[2 * j + 1], vals[2 * j + 2], tol, max_depth
            )
            refined += v
            errs += e
        # end contributions: Q^2 e^{-2Qh} S ~ Q^3 near 0, decays beyond Q_hi
        head = vals[0] / 3.0
        tail = vals[-1]
        if max(head, abs(tail)) > 10 * rtol * abs(refined) and abs(refined) > 0:
            raise QuadratureError(
                f"Q-range {q_range} truncates the SPD integral at h={h}", refined, max(head, abs(tail))
            )
        if errs > 10 * rtol * abs(refined):
            raise QuadratureError(f"Q-integral did not converge at h={h}", refined, errs)
        return refined

    def spd(self, h, temperature, q_range=None, rtol=1e-5):
        """Return (g_xx, g_zz) at height ``h`` (Bohr) above the box wall."""
        if h < 0:
            raise ValueError("h must be non-negative")
        if q_range is None:
            q_range = default_q_range([h], self.subbands)
        J = self.integral(h, q_range, rtol=rtol)
        gxx = 2.0 * math.pi * bose_factor(self.omega, temperature) * J
        return float(gxx), float(2.0 * gxx)

    def write_diagnostics(self, path):
        """CSV of the cached samples: Q, Re/Im G0, Re/Im G, Dyson residual."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh)
            fh.write(f"# omega_au={self.omega!r} mode={self.mode} flavor={self.subbands.flavor}\n")
            wr.writerow(["Q_inv_bohr", "re_g0", "im_g0", "re_g", "im_g", "residual",
                         "vector_residual"])
            for s in self.samples():
                wr.writerow([repr(s.Q), repr(s.g0.real), repr(s.g0.imag),
                             repr(s.g.real), repr(s.g.imag), repr(s.residual),
                             repr(s.vector_residual)])
        return path


def _simpson_refine(f, a, m, b, fa, fm, fb, tol, depth):
    l = 0.5 * (a + m)
    r = 0.5 * (m + b)
    fl, fr = f(l), f(r)
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    left = (m - a) / 6.0 * (fa + 4 * fl + fm)
    right = (b - m) / 6.0 * (fm + 4 * fr + fb)
    err = abs(left + right - whole) / 15.0
    if err <= tol or depth <= 0:
        return left + right + (left + right - whole) / 15.0, err
    v1, e1 = _simpson_refine(f, a, l, m, fa, fl, fm, 0.5 * tol, depth - 1)
    v2, e2 = _simpson_refine(f, m, r, b, fm, fr, fb, 0.5 * tol, depth - 1)
    return v1 + v2, e1 + e2


def default_q_range(heights, subbands: SubbandSet):
    """Q window covering all requested heights: [1e-4 min, 40 max] of max(1/2h, k_F)."""
    kf = math.sqrt(max(subbands.kf2.max(), 1e-30)) if subbands.occupied.size else 1.0
    hs = np.asarray(heights, dtype=float)
    hmax = hs.max()
    pos = hs[hs > 0]
    lo_scale = min(1.0 / (2.0 * hmax), kf) if hmax > 0 else kf
    hi_scale = max(1.0 / (2.0 * pos.min()), kf) if pos.size else kf
    return 1e-4 * lo_scale, 40.0 * hi_scale


def film_spd(h, omega, subbands: SubbandSet, grid: ResponseGrid, temperature, mode="full", **kw):
    """Single-point film SPD; see :class:`FilmResponse` for sweeps."""
    return FilmResponse(subbands, grid, omega, mode=mode, **kw).spd(h, temperature)
