import dataclasses
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlsinverse import closed_form
from nlsinverse.errors import ContractViolation, NeumannNotGuaranteed, PoorReconstructionWarning
from nlsinverse.hierarchy import SeriesCoefficients, series_from_cascade
from nlsinverse.inversion import (
    CascadeModel,
    ClosedFormModel,
    ContourGrid,
    DataSetDn,
    InversionConfig,
    SeriesModel,
    ZeroModel,
    build_system,
    find_xi0,
    fourier_invert_special,
    fourier_rows,
    invert_direct,
    invert_neumann,
    recover_all,
    recover_q,
    s_of_xi,
    weighted_norm,
)
from nlsinverse.numerics import SpatialGrid
from nlsinverse.potential import CoefficientFunction, NonlinearPotential

ZERO = CoefficientFunction.zero(1.0)
Q0 = CoefficientFunction.sinusoid(0.3, np.pi, 1.0)
Q1 = CoefficientFunction.exponential(0.7, 1.0)


def rel_l2(grid, approx, exact):
    w = grid.weights
    return np.sqrt(np.sum(w * (approx - exact) ** 2) / np.sum(w * exact**2))


def two_term_data(grid):
    p = NonlinearPotential.from_coeffs(1.0, [Q0, Q1])
    return DataSetDn.from_model(CascadeModel(p, grid), 2, [Q0], 1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 20), st.floats(0.01, 5), st.integers(2, 5), st.floats(0.1, 3))
def test_s_is_decreasing_in_xi(xi, dxi, n, l1):
    assert s_of_xi(xi + dxi, n, 1.0, l1) <= s_of_xi(xi, n, 1.0, l1)


@pytest.mark.parametrize("n, l1", [(2, 0.3), (3, 1.0), (5, 2.5)])
def test_xi0_solves_s_equals_b(n, l1):
    xi0 = find_xi0(n, 1.0, l1)
    assert s_of_xi(xi0, n, 1.0, l1) == pytest.approx(1.0, rel=1e-12)
    assert find_xi0(n, 1.0, 0.0) == 0.0
    with pytest.raises(ContractViolation):
        find_xi0(n, 1.0, -1.0)


def test_contour_grid():
    c = ContourGrid(0.5, 2, 2.0, 3)
    assert c.power == 3
    assert np.allclose(c.k_values, 2 * np.pi * np.arange(-3, 4) / 6 + 0.5j)
    assert len(ContourGrid(1.0, 2, 1.0, 0).k_values) == 1
    for bad in (dict(xi=0.0, n=2, b=1.0, M=3), dict(xi=1.0, n=2, b=1.0, M=-1)):
        with pytest.raises(ContractViolation):
            ContourGrid(**bad)


@pytest.mark.parametrize("use_F", [True, False])
def test_kernel_reduces_to_fourier_rows_without_q0(grid, use_F):
    n = 3
    d = DataSetDn.from_model(ZeroModel(), n, [ZERO, ZERO], 1.0)
    c = ContourGrid(1.0, n, 1.0, 8, n + 1 if use_F else n - 1)
    system = build_system(d, grid, c, use_F)
    assert np.max(np.abs(system.kernel - fourier_rows(c.modes, grid))) <= 1e-12
    assert system.diagnostics["K_minus_K0_norm"] <= 1e-12
    assert weighted_norm(system.kernel, grid) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("use_F, M", [(True, 64), (False, 32)])
def test_data_identity_holds_for_true_coefficient(grid, use_F, M):
    d = two_term_data(grid)
    c = ContourGrid(1.0, 2, 1.0, M, 3 if use_F else 1)
    system = build_system(d, grid, c, use_F)
    phi = np.exp(c.xi * c.power * grid.nodes) * Q1(grid.nodes)
    rel = np.linalg.norm(system.apply(phi) - system.p) / np.linalg.norm(system.p)
    assert rel <= 1e-6


def test_neumann_series(grid):
    d = DataSetDn.from_model(ClosedFormModel("constant_gamma", 1.0, 1.0), 3, [ZERO, ZERO], 1.0)
    system = build_system(d, grid, ContourGrid(1.0, 3, 1.0, 16))
    sol = invert_neumann(system)
    assert sol.terms == 1
    assert np.allclose(sol.phi, system.K0_inverse(system.p))

    zero = dataclasses.replace(system, p=np.zeros_like(system.p))
    assert not np.any(invert_neumann(zero).phi)

    heavy = CoefficientFunction.constant(3.0, 1.0)
    d = DataSetDn.from_model(ZeroModel(), 2, [heavy], 1.0)
    system = build_system(d, grid, ContourGrid(0.1, 2, 1.0, 4))
    assert system.diagnostics["contraction_estimate"] >= 1
    with pytest.raises(NeumannNotGuaranteed):
        invert_neumann(system)


def test_neumann_converges_geometrically(grid):
    d = two_term_data(grid)
    xi = 2 * find_xi0(2, 1.0, Q0.l1_norm(grid))
    system = build_system(d, grid, ContourGrid(max(xi, 1.0), 2, 1.0, 32))
    sol = invert_neumann(system)
    assert sol.terms > 1
    assert max(sol.term_ratios) < system.diagnostics["contraction_estimate"]
    fourier = invert_direct(system, basis="fourier")
    assert system.l2(sol.phi - fourier.phi) <= 1e-8 * system.l2(fourier.phi)


def test_direct_fourier_basis_is_truncated_synthesis(grid):
    d = DataSetDn.from_model(ClosedFormModel("exponential_alpha", 0.5, 1.0), 3, [ZERO, ZERO], 1.0)
    system = build_system(d, grid, ContourGrid(1.0, 3, 1.0, 16))
    sol = invert_direct(system, basis="fourier")
    truncated = system.K0_inverse(system.p)
    assert system.l2(sol.phi - truncated) <= 1e-8 * system.l2(truncated)


@pytest.mark.parametrize("basis, tol", [("chebyshev", 1e-6), ("hat", 1e-2)])
def test_direct_recovers_manufactured_coefficient(grid, basis, tol):
    q0 = CoefficientFunction.constant(0.2, 1.0)
    d = DataSetDn.from_model(ZeroModel(), 2, [q0], 1.0)
    c = ContourGrid(1.0, 2, 1.0, 32)
    system = build_system(d, grid, c)
    q_true = np.sin(np.pi * grid.nodes)
    phi = np.exp(3 * grid.nodes) * q_true
    system = dataclasses.replace(system, p=system.apply(phi))
    sol = invert_direct(system, basis=basis, n_basis=20 if basis == "chebyshev" else 60)
    q = (np.exp(-3 * grid.nodes) * sol.phi).real
    assert rel_l2(grid, q, q_true) <= tol


def test_direct_rejects_unknown_basis(grid):
    d = DataSetDn.from_model(ZeroModel(), 2, [ZERO], 1.0)
    system = build_system(d, grid, ContourGrid(1.0, 2, 1.0, 4))
    with pytest.raises(ContractViolation):
        invert_direct(system, basis="wavelet")


@pytest.mark.parametrize("name, param", [("constant_gamma", 2.0), ("exponential_alpha", 0.5)])
def test_recover_closed_form_examples(grid, name, param):
    *_, q2 = closed_form.example_functions(name, param, 1.0)
    d = DataSetDn.from_model(ClosedFormModel(name, param, 1.0), 3, [ZERO, ZERO], 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = recover_q(d, grid, InversionConfig(xi=1.0))
    assert rel_l2(grid, res.q, q2(grid.nodes)) <= 1e-5
    assert res.relative_residual <= 1e-6
    assert res.imag_residual <= 1e-4 * np.max(np.abs(res.q))
    assert res.n == 3 and res.method == "direct" and res.basis == "chebyshev"


def test_recover_with_nonzero_q0(grid):
    d = two_term_data(grid)
    res = recover_q(d, grid, InversionConfig())
    assert res.xi == 1.0
    assert rel_l2(grid, res.q, Q1(grid.nodes)) <= 1e-5
    assert res.relative_residual <= 1e-6


def test_recover_warnings(grid):
    d = DataSetDn.from_model(ClosedFormModel("constant_gamma", 1.0, 1.0), 3, [ZERO, ZERO], 1.0)
    with pytest.warns(PoorReconstructionWarning, match="amplifies"):
        recover_q(d, grid, InversionConfig(xi=6.0, M=4))
    coarse = SpatialGrid(1.0, 200)
    with pytest.warns(PoorReconstructionWarning, match="grid step"):
        recover_q(d, coarse, InversionConfig(xi=1.0, M=16))


def test_fourier_special_method(grid):
    d = DataSetDn.from_model(ClosedFormModel("constant_gamma", 1.0, 1.0), 3, [ZERO, ZERO], 1.0)
    cfg = InversionConfig(xi=1.0, M=16, method="fourier_special")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PoorReconstructionWarning)
        res = recover_q(d, grid, cfg)
        ref = recover_q(d, grid, dataclasses.replace(cfg, method="direct", basis="fourier"))
    assert np.max(np.abs(res.q - ref.q)) <= 1e-8
    with pytest.raises(ContractViolation):
        recover_q(two_term_data(grid), grid, cfg)


def test_recover_all_zero_potential(grid):
    results = recover_all(ZeroModel(), ZERO, 4, grid, InversionConfig(M=8))
    assert [r.n for r in results] == [2, 3, 4]
    assert all(not np.any(r.q) for r in results)


def test_recover_all_feeds_recovered_coefficients(grid):
    p = NonlinearPotential.from_coeffs(1.0, [Q0, Q1, CoefficientFunction.constant(0.5, 1.0)])
    results = recover_all(CascadeModel(p, grid), Q0, 3, grid, InversionConfig(M=32))
    assert rel_l2(grid, results[0].q, Q1(grid.nodes)) <= 1e-5
    assert rel_l2(grid, results[1].q, 0.5 * np.ones(grid.size)) <= 1e-4


def test_recover_all_tags_order(grid):
    with pytest.raises(ContractViolation, match="order n=5"):
        recover_all(ClosedFormModel("constant_gamma", 1.0, 1.0), ZERO, 5, grid, InversionConfig(M=4))
    with pytest.raises(ContractViolation):
        recover_all(ZeroModel(), ZERO, 1, grid)


def test_data_set_validation():
    with pytest.raises(ContractViolation):
        DataSetDn.from_model(ZeroModel(), 1, [], 1.0)
    with pytest.raises(ContractViolation):
        DataSetDn.from_model(ZeroModel(), 3, [ZERO], 1.0)


@pytest.mark.parametrize("kwargs", [dict(method="magic"), dict(method="real_axis"), dict(xi=-1.0),
                                    dict(M=-2), dict(basis="wavelet")])
def test_inversion_config_validation(kwargs):
    with pytest.raises(ContractViolation):
        InversionConfig(**kwargs)


def test_series_model_only_answers_on_its_grid():
    k = np.array([1.0, 2.0])
    s = SeriesCoefficients(k, np.ones((3, 2), complex), np.ones((3, 2), complex), "test")
    model = SeriesModel(s)
    assert np.allclose(model.coefficients(2, np.array([2.0]))[0], 1)
    with pytest.raises(ContractViolation):
        model.coefficients(2, np.array([1.0 + 0.5j]))
    with pytest.raises(ContractViolation):
        model.coefficients(4, k)


def test_real_axis_route_from_exact_series(grid):
    p = NonlinearPotential.from_coeffs(1.0, [Q0, Q1])
    k = np.linspace(0.5, 8, 40)
    series = series_from_cascade(p, k, 2, grid)
    d = DataSetDn.from_model(SeriesModel(series), 2, [Q0], 1.0)
    res = recover_q(d, grid, InversionConfig(method="real_axis", k_real=tuple(k)))
    assert rel_l2(grid, res.q, Q1(grid.nodes)) <= 1e-2
    assert res.diagnostics["k_count"] == 40


def test_closed_form_model_has_no_high_orders():
    with pytest.raises(ContractViolation):
        ClosedFormModel("constant_gamma", 1.0, 1.0).coefficients(5, np.array([1.0]))


@pytest.mark.parametrize("name, param", [("constant_gamma", 1.0), ("exponential_alpha", 0.5)])
def test_special_fourier_formulas(name, param):
    A3, B3, q2 = closed_form.example_functions(name, param, 1.0)
    x = np.linspace(0.05, 0.95, 19)
    for which, amp in (("A", A3), ("B", B3)):
        integral = fourier_invert_special(amp, 1.0, x, which, "integral")
        series = fourier_invert_special(amp, 1.0, x, which, "series")
        assert np.max(np.abs(integral - q2(x))) <= 1e-2 * np.max(np.abs(q2(x)))
        assert np.max(np.abs(series - integral)) <= 1e-2 * np.max(np.abs(q2(x)))
    with pytest.raises(ContractViolation):
        fourier_invert_special(A3, 1.0, x, "C")
    with pytest.raises(ContractViolation):
        fourier_invert_special(A3, 1.0, x, "A", route="laplace")
