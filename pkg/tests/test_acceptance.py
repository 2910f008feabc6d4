"""Acceptance criteria at desk scale; the terminal summary prints one PASS/FAIL line each."""

import warnings

import numpy as np
import pytest

from nlsinverse import closed_form
from nlsinverse.forward import match_coefficients, solve_nonlinear, sweep
from nlsinverse.hierarchy import extract_series, forcing, green_solve, jost_right, linear_scattering, \
    solve_cascade, y_order
from nlsinverse.inversion import (
    CascadeModel,
    ContourGrid,
    DataSetDn,
    InversionConfig,
    ZeroModel,
    build_system,
    find_xi0,
    fourier_invert_special,
    fourier_rows,
    recover_all,
    recover_q,
    s_of_xi,
    weighted_norm,
)
from nlsinverse.numerics import SpatialGrid, quad
from nlsinverse.potential import CoefficientFunction, NonlinearPotential

criterion = pytest.mark.criterion


def rel_l2(grid, approx, exact):
    w = grid.weights
    return np.sqrt(np.sum(w * np.abs(approx - exact) ** 2) / np.sum(w * np.abs(exact) ** 2))


@criterion(1, "free-field exactness")
def test_free_field(grid):
    k = np.array([0.5, 1.0, 2.0, 5.0])
    A, B = match_coefficients(solve_nonlinear(NonlinearPotential.zero(1.0, 3), k, 0.1, grid), k)
    assert np.max(np.abs(A)) <= 1e-10
    assert np.max(np.abs(B - 0.1)) <= 1e-10


@criterion(2, "linear unitarity")
def test_linear_unitarity(grid):
    p = NonlinearPotential.from_coeffs(1.0, [CoefficientFunction.constant(1.0, 1.0)])
    k = np.linspace(0.5, 5, 20)
    for eps in (0.1, 1.0):
        A, B = match_coefficients(solve_nonlinear(p, k, eps, grid), k)
        assert np.max(np.abs(np.abs(B) ** 2 - np.abs(A) ** 2 - eps**2)) <= 1e-8 * eps**2


@criterion(3, "closed-form third-order amplitudes")
@pytest.mark.parametrize("name, param", [("constant_gamma", 1.0), ("exponential_alpha", 0.5)])
def test_closed_forms(grid, name, param):
    A3, B3, _ = closed_form.example_functions(name, param, 1.0)
    p = closed_form.example_potential(name, param, 1.0)
    k = np.linspace(0.5, 8, 40)
    state = solve_cascade(p, np.concatenate([k, 2 * k]), 3, grid)
    A, B = state.AB(3)
    assert np.max(np.abs(A[:40] - A3(k)) / np.abs(A3(k))) <= 1e-6
    assert np.max(np.abs(B[:40] - B3(k)) / np.abs(B3(k))) <= 1e-6
    assert np.max(np.abs(A[:40] + 2 * B[40:]) / np.abs(A[:40])) <= 1e-7


@criterion(4, "eps-series extraction")
def test_series_extraction(grid):
    p = closed_form.example_potential("constant_gamma", 1.0, 1.0)
    k = np.linspace(0.5, 8, 16)
    ext = extract_series(sweep(p, k, np.linspace(0.002, 0.02, 5), grid), 5)
    A3 = solve_cascade(p, k, 3, grid).A[2]
    assert np.max(np.abs(ext.A[2] - A3) / np.abs(A3)) <= 1e-4
    assert np.max(np.abs(ext.A[1])) <= 1e-6


@criterion(5, "operator norms")
def test_operator_norms():
    b = 1.0
    g = SpatialGrid(b, 512)
    M = 64
    modes = np.arange(-M, M + 1)
    K0 = fourier_rows(modes, g)
    synthesis = fourier_rows(modes, g).conj().T / b
    assert abs(weighted_norm(K0, g) / np.sqrt(b) - 1) <= 0.02
    synth_norm = np.linalg.norm(np.sqrt(g.weights)[:, None] * synthesis, 2)
    assert abs(synth_norm * np.sqrt(b) - 1) <= 0.02
    n = 2
    for l1 in (0.05, 0.2):
        q0 = CoefficientFunction.constant(l1 / b, b)
        xi0 = find_xi0(n, b, l1)
        for xi in (2 * xi0, 4 * xi0):
            d = DataSetDn.from_model(ZeroModel(), n, [q0], b)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                system = build_system(d, g, ContourGrid(xi, n, b, M))
            assert system.diagnostics["K_minus_K0_norm"] <= 1.05 * np.sqrt(s_of_xi(xi, n, b, l1))


@criterion(6, "xi0 solver")
@pytest.mark.parametrize("n, l1", [(2, 0.05), (3, 0.2), (4, 1.0)])
def test_xi0(n, l1):
    xi0 = find_xi0(n, 1.0, l1)
    assert abs(s_of_xi(xi0, n, 1.0, l1) - 1.0) <= 1e-10
    s = s_of_xi(np.logspace(-3, 3, 200), n, 1.0, l1)
    assert np.all(np.diff(s) < 0)


@criterion(7, "Green function identity for y_n")
def test_green_identity(grid):
    q0 = CoefficientFunction.constant(0.2, 1.0)
    p = NonlinearPotential.from_coeffs(1.0, [q0, CoefficientFunction.sinusoid(0.3, np.pi, 1.0)])
    k = 0.7 + 1.5j
    state = solve_cascade(p, k, 2, grid)
    jost = linear_scattering(q0, k, grid)
    g2, _ = forcing(p, state, 2)
    assert np.max(np.abs(y_order(state, jost, 2) - green_solve(jost, g2))) <= 1e-5


@criterion(8, "closed-form Fourier inversion")
def test_special_fourier_inversion():
    A3, _, _ = closed_form.example_functions("constant_gamma", 1.0, 1.0)
    x = np.linspace(0.05, 0.95, 91)
    integral = fourier_invert_special(A3, 1.0, x, "A", "integral", k_cutoff=200)
    series = fourier_invert_special(A3, 1.0, x, "A", "series")
    assert np.max(np.abs(integral - 1.0)) <= 2e-2
    assert np.max(np.abs(series - integral)) <= 2e-2


@criterion(9, "end-to-end roundtrip")
def test_roundtrip(grid):
    q1 = CoefficientFunction.sinusoid(0.3, np.pi, 1.0)
    q2 = CoefficientFunction.exponential(0.5, 1.0)
    zero = CoefficientFunction.zero(1.0)
    p = NonlinearPotential.from_coeffs(1.0, [zero, q1, q2])
    # real-axis sweep and extraction through order 3
    k = np.linspace(0.5, 8, 16)
    ext = extract_series(sweep(p, k, np.linspace(0.002, 0.02, 5), grid), 5)
    exact = solve_cascade(p, k, 3, grid)
    for n in (2, 3):
        A, B = exact.AB(n)
        assert np.max(np.abs(ext.A[n - 1] - A)) <= 1e-4 * np.max(np.abs(A))
        assert np.max(np.abs(ext.B[n - 1] - B)) <= 1e-4 * np.max(np.abs(B))
    model = CascadeModel(p, grid)
    F = recover_all(model, zero, 3, grid, InversionConfig(M=32, use_F=True))
    E = recover_all(model, zero, 3, grid, InversionConfig(M=30, use_F=False))
    for res, coeff in zip(F, (q1, q2)):
        assert rel_l2(grid, res.q, coeff(grid.nodes)) <= 1e-2
    for res, coeff in zip(E, (q1, q2)):
        assert rel_l2(grid, res.q, coeff(grid.nodes)) <= 1e-2
    for f, e in zip(F, E):
        assert np.max(np.abs(f.q - e.q)) <= 2e-2


@criterion(10, "Neumann and direct inversion agree")
def test_neumann_vs_direct(grid):
    l1 = 0.05
    q0 = CoefficientFunction.constant(l1, 1.0)
    p = NonlinearPotential.from_coeffs(1.0, [q0, CoefficientFunction.exponential(0.5, 1.0)])
    d = DataSetDn.from_model(CascadeModel(p, grid), 2, [q0], 1.0)
    xi = 2 * find_xi0(2, 1.0, l1)
    neumann = recover_q(d, grid, InversionConfig(xi=xi, M=32, method="neumann"))
    direct = recover_q(d, grid, InversionConfig(xi=xi, M=32, method="direct", basis="fourier"))
    assert np.max(np.abs(neumann.q - direct.q)) <= 1e-6
    bound = np.sqrt(s_of_xi(xi, 2, 1.0, l1)) + 0.05
    assert max(neumann.diagnostics["term_ratios"]) <= bound


def _refinement(errors):
    return np.array(errors[:-1]) / np.array(errors[1:])


@criterion(11, "convergence orders")
def test_convergence_orders():
    # RK4: Jost solution of a constant well, cos(kx) - (ik/kappa) sin(kx) with kappa^2 = k^2 - q
    height, k = 2.0, 3.0
    kappa = np.sqrt(k**2 - height)
    q0 = CoefficientFunction.constant(height, 1.0)
    rk_errors = []
    for n in (20, 40, 80, 160):
        g = SpatialGrid(1.0, n)
        x = g.nodes
        exact = np.cos(kappa * x) - 1j * k / kappa * np.sin(kappa * x)
        rk_errors.append(np.max(np.abs(jost_right(q0, k, g).value - exact)))
    assert np.all((_refinement(rk_errors) >= 12) & (_refinement(rk_errors) <= 20))

    # nonlinear RK4 on the pure cubic example, against a fine reference
    p = closed_form.example_potential("constant_gamma", 1.0, 1.0)
    ref = match_coefficients(solve_nonlinear(p, 2.0, 0.3, SpatialGrid(1.0, 4000)), 2.0)[0]
    nl_errors = [abs(match_coefficients(solve_nonlinear(p, 2.0, 0.3, SpatialGrid(1.0, n)), 2.0)[0] - ref)
                 for n in (10, 20, 40)]
    assert np.all((_refinement(nl_errors) >= 12) & (_refinement(nl_errors) <= 20))

    # composite Simpson on a smooth oscillatory integrand
    f = lambda x: np.exp(x) * np.cos(3 * x)
    exact = (np.exp(1) * (np.cos(3) + 3 * np.sin(3)) - 1) / 10
    quad_errors = [abs(quad(f(SpatialGrid(1.0, n).nodes), SpatialGrid(1.0, n)) - exact)
                   for n in (8, 16, 32, 64)]
    assert np.all((_refinement(quad_errors) >= 12) & (_refinement(quad_errors) <= 20))
