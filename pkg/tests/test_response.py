import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fluctspd import units
from fluctspd.errors import SingularKernelError
from fluctspd.grid import uniform_grid
from fluctspd.response import (
    FilmResponse,
    ResponseGrid,
    SubbandSet,
    _exp_sine_matrix,
    _pair_f,
    chi0_matrix,
    coulomb_kernel,
    coulomb_operator,
    coulomb_parts,
    default_q_range,
    dyson_solve,
    f_coefficient,
    g0_closed,
    g0_ibm,
    g_interaction,
    pair_densities,
    pair_overlaps,
    subband_set,
)

from oracles import lindhard_disk


@pytest.mark.parametrize(
    "Q, omega, eta, el, elp, kl2",
    [
        (0.3, 0.4, 1e-2, -0.1, 0.05, 0.8),  # inside the particle-hole continuum
        (0.3, 0.25, 5e-3, -0.2, -0.1, 0.6),
        (0.05, 0.1, 1e-2, -0.3, 0.2, 1.0),
        (1.5, 0.9, 2e-2, 0.0, 0.0, 0.5),  # intraband
    ],
)
def test_f_matches_momentum_space_sum(Q, omega, eta, el, elp, kl2):
    ref = lindhard_disk(Q, omega, eta, el, elp, kl2)
    got = f_coefficient(Q, omega, eta, el, elp, kl2)
    assert abs(got - ref) <= 1e-4 * abs(ref)


def test_f_is_real_in_the_static_limit():
    rng = np.random.default_rng(3)
    for _ in range(50):
        Q = rng.uniform(0.01, 3)
        el, elp = rng.uniform(-0.5, 0.5, 2)
        F = f_coefficient(Q, 0.0, 1e-8, el, elp, rng.uniform(0.01, 1.0))
        assert abs(F.imag) < 1e-6 * abs(F.real)


def test_f_limits():
    # no occupied disk, no response
    assert f_coefficient(0.4, 0.2, 1e-3, -0.1, 0.2, 0.0) == 0
    # finite (no 1/Q^2 blow-up) as Q -> 0; intraband term vanishes there
    small = f_coefficient(np.array([1e-9, 1e-6]), 0.2, 1e-3, -0.1, 0.3, 0.7)
    assert np.all(np.isfinite(small))
    assert abs(f_coefficient(1e-9, 0.2, 1e-3, 0.1, 0.1, 0.7)) < 1e-12
    with pytest.raises(ValueError):
        f_coefficient(0.1, 0.2, 0.0, 0.0, 0.1, 0.5)
    with pytest.raises(ValueError):
        f_coefficient(0.1, 0.2, 1e-3, 0.0, 0.1, -0.5)


@settings(max_examples=100)
@given(st.integers(1, 60), st.integers(1, 60), st.floats(1e-3, 200.0))
def test_denominator_factorizes(s, sp, x):
    D = math.pi**4 * (s * s - sp * sp) ** 2 + 2 * math.pi**2 * x * x * (s * s + sp * sp) + x**4
    F = (x * x + math.pi**2 * (s + sp) ** 2) * (x * x + math.pi**2 * (s - sp) ** 2)
    assert F == pytest.approx(D, rel=1e-12)


@pytest.mark.parametrize("Q", [1e-4, 0.05, 0.7, 8.0])
def test_exponential_moment_closed_form(Q):
    L = 13.0
    M = _exp_sine_matrix(Q, L, 6)
    for s, sp in [(1, 1), (1, 2), (3, 6), (5, 5)]:
        ref = integrate.quad(
            lambda z: math.exp(-Q * z) * math.sin(s * math.pi * z / L) * math.sin(sp * math.pi * z / L),
            0, L, limit=200, epsabs=1e-15, epsrel=1e-13,
        )[0]
        assert M[s - 1, sp - 1] == pytest.approx(ref, rel=1e-9, abs=1e-14)


def test_subband_selection(small_solution):
    sb = subband_set(small_solution)
    assert sb.occupied.size == small_solution.n_occupied
    assert set(sb.occupied) <= set(sb.included)
    assert np.all(sb.kf2 > 0)
    ibm = subband_set(small_solution, "ibm")
    assert np.array_equal(ibm.coeffs, np.eye(small_solution.n_basis))
    with pytest.raises(ValueError):
        subband_set(small_solution, max_states=sb.occupied.size - 1)
    with pytest.raises(ValueError):
        subband_set(small_solution, "lda")


def test_ibm_identity(small_solution):
    sb = subband_set(small_solution, "ibm")
    rng = np.random.default_rng(5)
    for _ in range(10):
        Q, w = 10 ** rng.uniform(-3, 1), rng.uniform(0.005, 0.6)
        a, b = g0_closed(Q, w, 3e-3, sb), g0_ibm(Q, w, 3e-3, sb)
        assert abs(a - b) <= 1e-12 * abs(b)


def test_g0_against_double_integral(small_solution):
    sb = subband_set(small_solution)
    L = sb.length
    x, w = np.polynomial.legendre.leggauss(300)
    z, wz = 0.5 * L * (x + 1), 0.5 * L * w
    V = pair_densities(z, sb)
    rng = np.random.default_rng(9)
    for _ in range(4):
        Q, om = 10 ** rng.uniform(-2, 0.5), rng.uniform(0.01, 0.5)
        _, _, F = _pair_f(Q, om, 3e-3, sb)
        K = (V * F) @ V.T  # chi0 on the Gauss nodes
        u = np.exp(-Q * z) * wz
        assert abs(u @ K @ u - g0_closed(Q, om, 3e-3, sb)) <= 1e-8 * abs(g0_closed(Q, om, 3e-3, sb))


def test_pair_overlaps_match_quadrature(small_solution):
    sb = subband_set(small_solution)
    z, w = uniform_grid(4001, sb.length)
    phi = small_solution.wavefunctions(z)
    C = pair_overlaps(0.37, sb)
    ref = phi.T @ (w[:, None] * np.exp(-0.37 * z)[:, None] * phi)
    assert np.allclose(C, ref, atol=1e-10)


def test_chi0_structure(small_solution):
    sb = subband_set(small_solution)
    grid = ResponseGrid.uniform(sb.length, 65, 3e-3)
    chi = chi0_matrix(0.2, 0.3, sb, grid)
    assert np.array_equal(chi, chi.T)
    assert np.all(np.isfinite(chi))
    static = chi0_matrix(0.2, 0.0, sb, ResponseGrid.uniform(sb.length, 65, 1e-8))
    assert np.abs(static.imag).max() < 1e-6 * np.abs(static.real).max()
    # node values agree with an explicit double sum
    phi = small_solution.wavefunctions(grid.z)
    i, j = 17, 40
    total = 0j
    for l in sb.occupied:
        for lp in sb.included:
            F = f_coefficient(0.2, 0.3, 3e-3, sb.energies[l], sb.energies[lp], 2 * (sb.mu - sb.energies[l]))
            total += F * phi[i, l] * phi[i, lp] * phi[j, l] * phi[j, lp]
    assert chi[i, j] == pytest.approx(total, rel=1e-11)


def test_coulomb_kernel():
    assert coulomb_kernel(1.0, 1.0, 0.5) == pytest.approx(4 * math.pi)
    assert coulomb_kernel(1.0, 3.0, 0.5) == coulomb_kernel(3.0, 1.0, 0.5)
    assert coulomb_kernel(0.0, 2.0, 0.5) == pytest.approx(4 * math.pi / math.e)
    with pytest.raises(ValueError):
        coulomb_kernel(0.0, 1.0, 0.0)


@pytest.mark.parametrize("Q", [1e-6, 0.1, 3.0, 40.0])
def test_product_coulomb_operator_is_exact_for_linear_functions(Q):
    grid = ResponseGrid.uniform(10.0, 41, 1e-3)
    A = coulomb_operator(Q, grid) / grid.weights[:, None]
    f = 1.0 + 0.3 * grid.z
    for i in (0, 13, 40):
        zi = grid.z[i]
        ref = integrate.quad(lambda z: coulomb_kernel(zi, z, Q) * (1 + 0.3 * z), 0, 10, points=[zi],
                             epsabs=0, epsrel=1e-13, limit=200)[0]
        assert (A @ f)[i] == pytest.approx(ref, rel=1e-10)


def test_coulomb_operator_methods_agree_at_small_q():
    grid = ResponseGrid.uniform(10.0, 201, 1e-3)
    a = coulomb_operator(0.05, grid, "product")
    b = coulomb_operator(0.05, grid, "nystrom")
    f = np.cos(grid.z)
    # Simpson across the |z - z_i| kink of the sampled kernel limits the agreement
    assert np.allclose(a @ f, b @ f, rtol=1e-3)
    with pytest.raises(ValueError):
        coulomb_operator(0.05, grid, "fft")
    with pytest.raises(ValueError):
        coulomb_operator(0.0, grid)


@pytest.mark.parametrize("method", ["product", "nystrom"])
def test_coulomb_split_regular_part_has_one_dimensional_limit(method):
    grid = ResponseGrid.uniform(10.0, 41, 1e-3)
    z, w = grid.z, grid.weights
    parts = coulomb_parts(1e-9, grid, method)
    assert parts.scale == pytest.approx(2 * math.pi / 1e-9)
    R = parts.regular / w[:, None]
    f = 1.0 + 0.3 * z
    i = 13
    # int -2 pi |z_i - z| f(z) dz, exact for the piecewise-linear f
    ref = -2 * math.pi * integrate.quad(lambda t: abs(z[i] - t) * (1 + 0.3 * t), 0, 10, points=[z[i]])[0]
    tol = 1e-7 if method == "product" else 1e-2
    assert (R @ f)[i] == pytest.approx(ref, rel=tol)
    for Q in (1e-3, 0.7):
        p = coulomb_parts(Q, grid, method)
        assert np.allclose(p.dense(), coulomb_operator(Q, grid, method), rtol=1e-13, atol=0)


def test_film_residual_stays_small_at_tiny_q(al_solution):
    sb = subband_set(al_solution)
    grid = ResponseGrid.uniform(sb.length, 257, 3.145e-3)
    fr = FilmResponse(sb, grid, 0.05)
    for Q in (1e-7, 1e-4, 1.0):
        assert fr.sample(Q).residual < 1e-12


def test_dyson_modes(small_solution):
    sb = subband_set(small_solution)
    grid = ResponseGrid.uniform(sb.length, 65, 3e-3)
    chi0 = chi0_matrix(0.1, 0.3, sb, grid)
    vh = coulomb_operator(0.1, grid)
    assert np.array_equal(dyson_solve(chi0, np.zeros_like(vh), "full").chi, chi0)
    assert dyson_solve(chi0, vh, "zero").chi is chi0
    first = dyson_solve(chi0, vh, "first").chi
    assert np.allclose(first, chi0 + chi0 @ vh @ chi0, rtol=0, atol=1e-15 * np.abs(first).max())
    full = dyson_solve(chi0, vh, "full")
    assert full.residual < 1e-10
    with pytest.raises(ValueError):
        dyson_solve(chi0, vh, "second")


def test_dyson_singular_system_names_the_point():
    chi0 = np.diag([1.0, 2.0]) + 0j
    with pytest.raises(SingularKernelError) as info:
        dyson_solve(chi0, np.linalg.inv(chi0), "full", Q=0.1, omega=0.2)
    assert info.value.Q == 0.1 and info.value.omega == 0.2


def test_interaction_term_against_four_fold_loop(small_solution):
    sb = subband_set(small_solution)
    grid = ResponseGrid.uniform(sb.length, 24, 3e-3)
    Q, om = 0.15, 0.3
    chi0 = chi0_matrix(Q, om, sb, grid)
    chi = dyson_solve(chi0, coulomb_operator(Q, grid, "nystrom"), "first").chi
    G = g_interaction(chi0, chi, coulomb_operator(Q, grid, "nystrom"), grid, Q)
    z, w = grid.z, grid.weights
    ref = 0j
    n = z.size
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    ref += (w[a] * w[b] * w[c] * w[d] * math.exp(-Q * (z[a] + z[d]))
                            * chi0[a, b] * coulomb_kernel(z[b], z[c], Q) * chi[c, d])
    assert abs(G - ref) <= 1e-10 * abs(ref)
    assert g_interaction(chi0, np.zeros_like(chi), coulomb_operator(Q, grid), grid, Q) == 0


def test_interaction_term_vanishes_at_large_q(small_solution):
    sb = subband_set(small_solution)
    fr = FilmResponse(sb, ResponseGrid.uniform(sb.length, 129, 3e-3), 0.3)
    assert abs(fr.sample(200.0).g) < 1e-6 * abs(fr.sample(0.5).g)


def test_film_vector_path_matches_matrix_path(small_solution):
    sb = subband_set(small_solution)
    grid = ResponseGrid.uniform(sb.length, 129, 3e-3)
    fr = FilmResponse(sb, grid, 0.3)
    Q = 0.2
    s = fr.sample(Q)
    chi0 = chi0_matrix(Q, 0.3, sb, grid)
    vh = coulomb_operator(Q, grid)
    chi = dyson_solve(chi0, vh, "full").chi
    G = g_interaction(chi0, chi, vh, grid, Q)
    # the film path integrates the outer exponential moments exactly
    assert s.g == pytest.approx(G, rel=1e-3)
    assert s.g0 == pytest.approx(g0_closed(Q, 0.3, 3e-3, sb), rel=1e-13)


def test_film_spd_properties(small_solution, mat):
    sb = subband_set(small_solution)
    grid = ResponseGrid.uniform(sb.length, 129, mat.nu)
    w = 0.1 * mat.wp
    hs = [0.0, 2.0, 20.0, 200.0]
    for mode in ("zero", "full"):
        fr = FilmResponse(sb, grid, w, mode=mode)
        qr = default_q_range(hs, sb)
        vals = [fr.spd(h, 300.0, q_range=qr) for h in hs]
        for gxx, gzz in vals:
            assert gzz == 2 * gxx and gxx > 0
        zz = [v[1] for v in vals]
        assert all(a > b for a, b in zip(zz, zz[1:]))
        assert zz[-1] < 1e-4 * zz[0]
        losses = np.array([fr.loss(s.Q) for s in fr.samples()])
        scale = np.abs(losses).max()
        assert losses.min() >= -1e-12 * scale
    with pytest.raises(ValueError):
        fr.spd(-1.0, 300.0)


def test_first_order_iterate_is_not_passive(small_solution, mat):
    """The one-term iterate overshoots where |chi0 V| > 1 and can give negative loss."""
    sb = subband_set(small_solution)
    fr = FilmResponse(sb, ResponseGrid.uniform(sb.length, 129, mat.nu), 0.1 * mat.wp, mode="first")
    assert fr.loss(0.085) < 0
    full = FilmResponse(sb, ResponseGrid.uniform(sb.length, 129, mat.nu), 0.1 * mat.wp)
    assert full.loss(0.085) > 0


def test_film_cutoff_convergence(al_solution, mat):
    grid = ResponseGrid.uniform(al_solution.box_length, 257, mat.nu)
    h = units.nm_to_bohr(1.0)
    out = []
    for cutoff in (4.0, 6.0):
        sb = subband_set(al_solution, cutoff=cutoff)
        out.append(FilmResponse(sb, grid, 0.1 * mat.wp).spd(h, 300.0)[1])
    assert out[0] == pytest.approx(out[1], rel=0.01)


def test_diagnostics_file(small_solution, tmp_path):
    sb = subband_set(small_solution)
    fr = FilmResponse(sb, ResponseGrid.uniform(sb.length, 65, 3e-3), 0.3)
    fr.sample(0.1)
    fr.sample(0.2)
    text = fr.write_diagnostics(tmp_path / "d.csv").read_text().splitlines()
    assert text[0].startswith("#") and len(text) == 4


def test_response_grid_validation():
    with pytest.raises(ValueError):
        ResponseGrid.uniform(10.0, 33, 0.0)
    with pytest.raises(ValueError):
        SubbandSet(np.zeros(3), np.eye(3), 0.0, 1.0, np.arange(3), np.arange(2))
