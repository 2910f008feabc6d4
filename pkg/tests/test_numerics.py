import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlsinverse.errors import ContractViolation, NumericallySingular, TrajectoryBlowUp
from nlsinverse.numerics import SpatialGrid, cumquad, integrate_ivp, quad, solve_dense

coef = st.floats(-10, 10, allow_nan=False)


def test_grid_needs_even_intervals():
    with pytest.raises(ContractViolation):
        SpatialGrid(1.0, 7)
    with pytest.raises(ContractViolation):
        SpatialGrid(-1.0, 8)
    g = SpatialGrid.for_width(0.3, per_unit=5)
    assert g.n_intervals % 2 == 0
    assert g.nodes[-1] == 0.3


def test_simpson_weights_sum_to_width():
    g = SpatialGrid(2.5, 40)
    assert np.isclose(g.weights.sum(), 2.5, rtol=1e-14)


@given(coef, coef, coef, coef, st.floats(0.1, 5))
def test_simpson_integrates_cubics_exactly(a, b_, c, d, width):
    g = SpatialGrid(width, 10)
    x = g.nodes
    exact = a * width + b_ * width**2 / 2 + c * width**3 / 3 + d * width**4 / 4
    got = quad(a + b_ * x + c * x**2 + d * x**3, g)
    assert abs(got - exact) <= 1e-11 * (1 + abs(exact) + abs(d) * width**4)


def test_cumquad_keeps_imaginary_part_and_matches_quad():
    g = SpatialGrid(1.0, 200)
    f = np.exp(2j * g.nodes)
    running = cumquad(f, g)
    exact = (np.exp(2j * g.nodes) - 1) / 2j
    assert np.max(np.abs(running - exact)) < 1e-8
    assert np.isclose(running[-1], quad(f, g), rtol=1e-8)


def test_quad_batches_along_trailing_axes():
    g = SpatialGrid(1.0, 100)
    k = np.array([1.0, 2.0, 3.0])
    samples = np.cos(np.outer(g.nodes, k))
    assert np.allclose(quad(samples, g), np.sin(k) / k, atol=1e-9)


def test_quad_rejects_wrong_length():
    with pytest.raises(ContractViolation):
        quad(np.ones(5), SpatialGrid(1.0, 10))


def test_rk4_harmonic_oscillator_forward_and_backward():
    g = SpatialGrid(2.0, 400)
    k = np.array([1.0, 2.0 + 0.5j])

    def rhs(x, u, du):
        return -(k**2) * u

    fwd = integrate_ivp(rhs, np.ones(2), np.zeros(2), g)
    assert np.allclose(fwd.value, np.cos(np.outer(g.nodes, k)), atol=1e-8)
    bwd = integrate_ivp(rhs, np.cos(2 * k), -k * np.sin(2 * k), g, direction="backward")
    assert np.allclose(bwd.value, fwd.value, atol=1e-8)
    assert np.allclose(bwd.slope, -k * np.sin(np.outer(g.nodes, k)), atol=1e-7)


def test_rk4_blowup_names_node():
    g = SpatialGrid(1.0, 100)
    with pytest.raises(TrajectoryBlowUp) as info:
        integrate_ivp(lambda x, u, du: 1e6 * u**3, 10.0, 0.0, g)
    assert 0 < info.value.node_index <= 100


def test_integrate_rejects_bad_direction():
    with pytest.raises(ContractViolation):
        integrate_ivp(lambda x, u, du: u, 1, 0, SpatialGrid(1.0, 4), direction="sideways")


def test_trajectory_interpolation_and_selection():
    g = SpatialGrid(1.0, 100)
    traj = integrate_ivp(lambda x, u, du: -u, np.array([1.0, 2.0]), np.zeros(2), g)
    assert np.allclose(traj(0.123), np.cos(0.123) * np.array([1, 2]), atol=1e-8)
    assert np.allclose(traj[1].value, 2 * np.cos(g.nodes), atol=1e-8)
    with pytest.raises(ContractViolation):
        traj(1.5)


def test_solve_dense_residual_and_singular():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    y = rng.standard_normal(6)
    x, res = solve_dense(a, y)
    assert np.allclose(a @ x, y)
    assert res < 1e-12
    with pytest.raises(NumericallySingular):
        solve_dense(np.ones((3, 3)), np.ones(3))
    with pytest.raises(ContractViolation):
        solve_dense(np.ones((2, 3)), np.ones(2))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 4.0), st.floats(-1.0, 1.0))
def test_rk4_linear_growth_is_exact_for_polynomials(slope, value):
    # u'' = 0 is integrated exactly by RK4
    g = SpatialGrid(1.0, 20)
    traj = integrate_ivp(lambda x, u, du: 0 * u, value, slope, g)
    assert np.allclose(traj.value, value + slope * g.nodes, atol=1e-12)
