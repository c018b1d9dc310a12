"""Self-consistent Kohn-Sham solution for a jellium slab (Hartree only).

The slab of jellium thickness ``d`` sits centered in a box ``[0, L]`` with
``L = delta_left + d + delta_right``; wave functions vanish at the box walls
and are expanded in the box sine basis

    phi_l(z) = sqrt(2/L) sum_s b_s^(l) sin(s pi z / L).

Exchange-correlation is not included.  Atomic units throughout.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft, optimize

from . import units
from .errors import ConvergenceError
from .grid import uniform_grid
from .physical import MaterialParams, derive_material

__all__ = [
    "SlabSpec",
    "Subband",
    "ScfSolution",
    "basis_functions",
    "background_profile",
    "effective_potential",
    "assemble_hamiltonian",
    "solve_subbands",
    "occupation_weights",
    "sheet_density",
    "chemical_potential",
    "density_from_states",
    "scf_solve",
    "save_solution",
    "load_solution",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = "fluctspd-scf/1"
ZERO_TEMPERATURE_K = 1.0


@dataclass(frozen=True)
class SlabSpec:
    """Geometry and numerical settings of the slab calculation.

    Lengths in Bohr.  ``interacting=False`` freezes V_eff = 0, which gives the
    infinite-barrier (IBM) solution in the same box.
    """

    thickness: float
    delta_left: float
    delta_right: float
    n_basis: int = 64
    n_grid: int = 257
    mixing: float = 0.2
    tol: float = 1e-9
    max_iter: int = 500
    interacting: bool = True
    preconditioner: str = "kerker"

    def __post_init__(self):
        if self.preconditioner not in ("kerker", "none"):
            raise ValueError("preconditioner must be 'kerker' or 'none'")
        if not self.thickness > 0:
            raise ValueError("slab thickness must be positive")
        if self.delta_left < 0 or self.delta_right < 0:
            raise ValueError("vacuum extensions must be non-negative")
        if self.n_grid < 4 * self.n_basis:
            raise ValueError("n_grid must be at least 4 * n_basis")
        if not 0 < self.mixing <= 1:
            raise ValueError("mixing parameter must lie in (0, 1]")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")

    @property
    def box_length(self) -> float:
        return self.delta_left + self.thickness + self.delta_right

    @property
    def jellium_edges(self) -> tuple[float, float]:
        return self.delta_left, self.delta_left + self.thickness

    @classmethod
    def for_material(cls, mat: MaterialParams, thickness: float, **kw) -> "SlabSpec":
        """Symmetric box with the 3 pi / 8 k_F vacuum extension on both sides."""
        delta = derive_material(mat).vacuum_extension
        kw.setdefault("delta_left", delta)
        kw.setdefault("delta_right", delta)
        return cls(thickness=thickness, **kw)

    def check_basis(self, mat: MaterialParams, margin: int = 4):
        kf = derive_material(mat).fermi_wavenumber
        need = math.ceil(kf * self.box_length / math.pi) + margin
        if self.n_basis < need:
            raise ValueError(
                f"n_basis={self.n_basis} is below the occupied-subband estimate {need}"
            )


@dataclass(frozen=True)
class Subband:
    energy: float
    coeffs: np.ndarray


@dataclass(frozen=True)
class ScfSolution:
    """Converged (or last) state of the SCF loop; arrays are on the z-grid."""

    thickness: float
    delta_left: float
    delta_right: float
    temperature: float
    background_density: float
    mu: float
    energies: np.ndarray
    coeffs: np.ndarray  # (n_basis, n_states); column l holds b^(l)
    z: np.ndarray
    density: np.ndarray
    potential: np.ndarray
    neutrality_residual: float
    converged: bool
    iterations: int
    history: list = field(default_factory=list)
    interacting: bool = True

    @property
    def box_length(self) -> float:
        return self.delta_left + self.thickness + self.delta_right

    @property
    def n_basis(self) -> int:
        return self.coeffs.shape[0]

    @property
    def subbands(self) -> list[Subband]:
        return [Subband(float(e), self.coeffs[:, i]) for i, e in enumerate(self.energies)]

    @property
    def n_occupied(self) -> int:
        return int(np.count_nonzero(self.energies < self.mu))

    def wavefunctions(self, z, states=None) -> np.ndarray:
        """phi_l(z) for the requested states (all by default); shape (len(z), n)."""
        B = self.coeffs if states is None else self.coeffs[:, states]
        return basis_functions(np.asarray(z, dtype=float), self.box_length, self.n_basis) @ B


def basis_functions(z, length, n_basis) -> np.ndarray:
    s = np.arange(1, n_basis + 1)
    return math.sqrt(2.0 / length) * np.sin(np.outer(z, s) * (math.pi / length))


def background_profile(z, spec: SlabSpec, n_plus: float) -> np.ndarray:
    a, b = spec.jellium_edges
    z = np.asarray(z, dtype=float)
    return np.where((z >= a) & (z <= b), n_plus, 0.0)


def _hartree_matrix(z) -> np.ndarray:
    """Product-integration weights for int |z_i - z'| n(z') dz'.

    Exact for a piecewise-linear interpolant of n on the uniform grid.
    """
    dz = z[1] - z[0]
    M = np.abs(z[:, None] - z[None, :]) * dz
    # half hats at the walls have their centroid dz/3 inside the box
    M[:, 0] = 0.5 * dz * np.abs(z - (z[0] + dz / 3.0))
    M[:, -1] = 0.5 * dz * np.abs(z - (z[-1] - dz / 3.0))
    idx = np.arange(len(z))
    # hat centred on z_i: 2 int_0^dz (1 - t/dz) t dt = dz^2 / 3
    M[idx, idx] = dz * dz / 3.0
    M[0, 0] = M[-1, -1] = dz * dz / 6.0
    return M


def effective_potential(n, z, spec: SlabSpec, n_plus: float, _kernel=None) -> np.ndarray:
    """Hartree potential energy -2 pi int [n(z') - n_+(z')] |z - z'| dz'.

    The electron term uses product integration on the grid; the background
    step is integrated analytically.  The (L -> infinity) constant is dropped.
    """
    z = np.asarray(z, dtype=float)
    M = _hartree_matrix(z) if _kernel is None else _kernel
    a, b = spec.jellium_edges
    # int_a^b |z - z'| dz'
    bg = 0.5 * ((z - a) * np.abs(z - a) - (z - b) * np.abs(z - b))
    return -2.0 * math.pi * (M @ np.asarray(n, dtype=float) - n_plus * bg)


def assemble_hamiltonian(V, z, w, length, n_basis) -> np.ndarray:
    """H_ps = (1/2)(s pi / L)^2 delta_ps + int V phi_s phi_p dz (Simpson)."""
    Phi = basis_functions(z, length, n_basis)
    s = np.arange(1, n_basis + 1)
    H = (Phi * (w * V)[:, None]).T @ Phi
    H = 0.5 * (H + H.T)
    H[np.diag_indices(n_basis)] += 0.5 * (s * math.pi / length) ** 2
    return H


def solve_subbands(H):
    """Full eigendecomposition; returns (energies ascending, coefficient matrix).

    Eigenvector signs are fixed so that the largest-magnitude coefficient of
    each state is positive.
    """
    H = np.asarray(H, dtype=float)
    if not np.allclose(H, H.T, rtol=0, atol=1e-12 * max(1.0, np.abs(H).max())):
        raise ValueError("Hamiltonian is not symmetric")
    try:
        E, B = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed: {exc}") from exc
    pivot = np.abs(B).argmax(axis=0)
    sign = np.sign(B[pivot, np.arange(B.shape[1])])
    return E, B * sign


def subbands_from(E, B) -> list[Subband]:
    return [Subband(float(e), B[:, i]) for i, e in enumerate(E)]


def occupation_weights(energies, mu, temperature) -> np.ndarray:
    """Sheet density per subband, (kT/pi) ln(1 + exp((mu - e)/kT)).

    Below ZERO_TEMPERATURE_K the T = 0 form (mu - e)/pi * theta(mu - e) is used.
    """
    energies = np.asarray(energies, dtype=float)
    if temperature < ZERO_TEMPERATURE_K:
        return np.clip(mu - energies, 0.0, None) / math.pi
    kT = units.kelvin_to_hartree(temperature)
    return kT / math.pi * np.logaddexp(0.0, (mu - energies) / kT)


def sheet_density(energies, mu, temperature) -> float:
    """Right-hand side of the chemical-potential equation (electrons per area)."""
    return float(occupation_weights(energies, mu, temperature).sum())


def _mu_zero_temperature(energies, target):
    E = np.sort(np.asarray(energies, dtype=float))
    csum = np.cumsum(E)
    for k in range(1, len(E) + 1):
        mu = (math.pi * target + csum[k - 1]) / k
        upper = E[k] if k < len(E) else np.inf
        if E[k - 1] <= mu <= upper:
            return mu
    raise ConvergenceError("T = 0 chemical potential not found")


def chemical_potential(energies, sheet_target, temperature) -> float:
    """Solve sheet_density(mu) = sheet_target by bracketing and bisection."""
    E = np.sort(np.asarray(energies, dtype=float))
    if temperature < ZERO_TEMPERATURE_K:
        mu = _mu_zero_temperature(E, sheet_target)
    else:
        kT = units.kelvin_to_hartree(temperature)

        def f(mu):
            return sheet_density(E, mu, temperature) - sheet_target

        lo = E[0] - 40.0 * kT
        hi = E[0] + math.pi * sheet_target
        for _ in range(60):
            if f(lo) < 0:
                break
            lo -= (hi - lo)
        for _ in range(60):
            if f(hi) > 0:
                break
            hi += (hi - lo)
        if not (f(lo) < 0 < f(hi)):
            raise ConvergenceError("chemical potential root not bracketed")
        mu = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    margin = 0.0 if temperature < ZERO_TEMPERATURE_K else 20.0 * units.kelvin_to_hartree(temperature)
    if E[-1] < mu + margin:
        raise ConvergenceError(
            "highest basis state lies below the chemical potential; increase n_basis"
        )
    return float(mu)


def density_from_states(energies, B, mu, z, length, temperature) -> np.ndarray:
    """n(z) = sum_l w_l |phi_l(z)|^2 with the finite-temperature sheet weights."""
    wl = occupation_weights(energies, mu, temperature)
    keep = wl > 0
    phi = basis_functions(z, length, B.shape[0]) @ B[:, keep]
    return (phi * phi) @ wl[keep]


def kerker_filter(r, length, k2):
    """Apply q^2 / (q^2 + k2) to ``r`` in the cosine basis of ``[0, length]``.

    The q = 0 component is removed, so the filtered residual carries no net
    charge.
    """
    coef = fft.dct(r, type=1)
    q = np.pi * np.arange(r.size) / length
    coef *= q * q / (q * q + k2)
    return fft.idct(coef, type=1)


def scf_solve(spec: SlabSpec, mat: MaterialParams, temperature: float | None = None) -> ScfSolution:
    """Iterate density -> V_eff -> H -> subbands -> mu -> density to a fixed point.

    Linear density mixing n <- n + alpha P (n_out - n), starting from the
    V_eff = 0 (IBM) density.  ``P`` is the identity for
    ``preconditioner="none"`` (plain ``(1 - alpha) n + alpha n_out``) and the
    Kerker filter q^2 / (q^2 + k_TF^2) otherwise, which damps the long-wave
    charge sloshing that makes the plain scheme diverge for slabs much thicker
    than the screening length.  Returns a non-converged solution (flag and
    residual history set) if ``max_iter`` is exhausted.
    """
    T = mat.temperature if temperature is None else temperature
    spec.check_basis(mat)
    der = derive_material(mat)
    n_plus = der.background_density
    L = spec.box_length
    target = n_plus * spec.thickness
    z, w = uniform_grid(spec.n_grid, L)
    kernel = _hartree_matrix(z)
    if spec.preconditioner == "kerker":
        k_tf2 = 4.0 * der.fermi_wavenumber / math.pi  # Thomas-Fermi k^2

        def precondition(r):
            return kerker_filter(r, L, k_tf2)
    else:
        def precondition(r):
            return r

    def step(V):
        H = assemble_hamiltonian(V, z, w, L, spec.n_basis)
        E, B = solve_subbands(H)
        mu = chemical_potential(E, target, T)
        return E, B, mu, density_from_states(E, B, mu, z, L, T)

    V = np.zeros_like(z)
    E, B, mu, n_in = step(V)
    history: list[float] = []
    converged = False
    it = 0
    n_out = n_in
    if not spec.interacting:
        converged = True
        it = 1
        history.append(0.0)
    else:
        for it in range(1, spec.max_iter + 1):
            V = effective_potential(n_in, z, spec, n_plus, _kernel=kernel)
            E, B, mu, n_out = step(V)
            res = float(np.max(np.abs(n_out - n_in)))
            history.append(res)
            log.debug("scf iter %d residual %.3e mu %.6f", it, res, mu)
            if res < spec.tol:
                converged = True
                break
            n_in = n_in + spec.mixing * precondition(n_out - n_in)
        if len(history) > 21 and np.any(np.diff(history[20:]) > 0):
            warnings.warn("SCF residual is not monotone after burn-in", RuntimeWarning)
    neutral = abs(w @ n_out - target) / target
    return ScfSolution(
        thickness=spec.thickness,
        delta_left=spec.delta_left,
        delta_right=spec.delta_right,
        temperature=T,
        background_density=n_plus,
        mu=mu,
        energies=E,
        coeffs=B,
        z=z,
        density=n_out,
        potential=V,
        neutrality_residual=float(neutral),
        converged=converged,
        iterations=it,
        history=history,
        interacting=spec.interacting,
    )


_ARRAY_FIELDS = ("energies", "coeffs", "z", "density", "potential")


def solution_to_dict(sol: ScfSolution, config: dict | None = None) -> dict:
    data = asdict(sol)
    for key in _ARRAY_FIELDS:
        data[key] = np.asarray(data[key]).tolist()
    data["history"] = [float(x) for x in sol.history]
    out = {"schema": SCHEMA_VERSION, "solution": data}
    if config is not None:
        out["config"] = config
    return out


def solution_from_dict(data: dict) -> ScfSolution:
    if data.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"unsupported SCF file schema {data.get('schema')!r}")
    body = dict(data["solution"])
    for key in _ARRAY_FIELDS:
        body[key] = np.asarray(body[key], dtype=float)
    return ScfSolution(**body)


def save_solution(sol: ScfSolution, path, config: dict | None = None) -> Path:
    """Write a versioned JSON document; floats round-trip exactly."""
    path = Path(path)
    text = json.dumps(solution_to_dict(sol, config), sort_keys=True, indent=1)
    path.write_text(text + "\n")
    return path


def load_solution(path) -> ScfSolution:
    return solution_from_dict(json.loads(Path(path).read_text()))


def load_solution_config(path) -> dict | None:
    return json.loads(Path(path).read_text()).get("config")
