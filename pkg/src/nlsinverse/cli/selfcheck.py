"""Invariant table run by ``nlsinverse selfcheck``.

Each check measures one number and passes when it is at most its tolerance.
Bound checks report the ratio of the observed quantity to its analytic bound,
so their tolerance is 1.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .. import closed_form
from ..forward import match_coefficients, solve_nonlinear, volterra_oracle
from ..hierarchy import (
    forcing,
    green_solve,
    jost_right,
    linear_scattering,
    solve_cascade,
    y_order,
)
from ..inversion import (
    ContourGrid,
    DataSetDn,
    ZeroModel,
    build_system,
    find_xi0,
    fourier_rows,
    s_of_xi,
    weighted_norm,
)
from ..numerics import SpatialGrid
from ..potential import CoefficientFunction, NonlinearPotential


@dataclass(frozen=True)
class Check:
    name: str
    tolerance: float
    description: str
    measure: object


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    seconds: float
    description: str


def _free_field(grid):
    p = NonlinearPotential.zero(1.0, 2)
    k = np.array([0.5, 1.0, 2.0, 5.0])
    A, B = match_coefficients(solve_nonlinear(p, k, 0.1, grid), k)
    return max(np.max(np.abs(A)), np.max(np.abs(B - 0.1)))


def _unitarity(grid):
    p = NonlinearPotential.from_coeffs(1.0, [CoefficientFunction.constant(1.0, 1.0)])
    k = np.linspace(0.5, 5.0, 20)
    eps = 0.1
    A, B = match_coefficients(solve_nonlinear(p, k, eps, grid), k)
    return np.max(np.abs(np.abs(B) ** 2 - np.abs(A) ** 2 - eps**2)) / eps**2


def _wronskian(grid):
    q0 = CoefficientFunction.sinusoid(1.0, np.pi, 1.0)
    k = np.concatenate([np.linspace(0.5, 5.0, 10), 0.7 + 1j * np.linspace(0.2, 3.0, 5)])
    return linear_scattering(q0, k, grid, rtol=np.inf).wronskian_deviation()


def _q0_samples():
    return [CoefficientFunction.constant(1.0, 1.0), CoefficientFunction.sinusoid(0.5, 2 * np.pi, 1.0)]


def _bound_u1(grid):
    k = np.concatenate([np.linspace(0.3, 6, 8), np.linspace(-3, 3, 7) + 1.0j, 2j + np.zeros(1)])
    worst = 0.0
    for q0 in _q0_samples():
        u1 = jost_right(q0, k, grid).value
        lhs = np.abs(np.exp(1j * k * grid.nodes[:, None]) * u1)
        worst = max(worst, np.max(lhs) / np.exp(grid.b * q0.l1_norm(grid)))
    return worst


def _bound_power(grid):
    k = np.concatenate([np.linspace(1.0, 8, 8), np.linspace(-4, 4, 9) + 1.5j, 1j * np.array([1.0, 3.0])])
    k = k[np.abs(k) >= 1]
    worst = 0.0
    for q0 in _q0_samples():
        u1 = jost_right(q0, k, grid).value
        l1 = q0.l1_norm(grid)
        for n in (1, 2, 3):
            m = n + 1
            lhs = np.abs(np.exp(1j * k * m * grid.nodes[:, None]) * u1**m - 1)
            rhs = (m / np.abs(k)) * l1 * np.exp(grid.b * m * l1)
            worst = max(worst, np.max(lhs / rhs))
    return worst


def _closed_forms(grid):
    k = np.linspace(0.5, 8.0, 31)
    worst = 0.0
    for name, param in (("constant_gamma", 1.0), ("exponential_alpha", 0.5)):
        A3, B3, _ = closed_form.example_functions(name, param, 1.0)
        state = solve_cascade(closed_form.example_potential(name, param, 1.0), k, 3, grid)
        A, B = state.AB(3)
        worst = max(worst, np.max(np.abs(A - A3(k)) / np.abs(A3(k))),
                    np.max(np.abs(B - B3(k)) / np.abs(B3(k))))
    return worst


def _relation(grid):
    k = np.linspace(0.5, 8.0, 31)
    p = closed_form.example_potential("exponential_alpha", 0.5, 1.0)
    A3 = solve_cascade(p, k, 3, grid).AB(3)[0]
    B3 = solve_cascade(p, 2 * k, 3, grid).AB(3)[1]
    return np.max(np.abs(A3 + 2 * B3))


def _k0_norm(grid):
    g = SpatialGrid(1.0, 512)
    c = ContourGrid(1.0, 2, 1.0, 64)
    return abs(weighted_norm(fourier_rows(c.modes, g), g) - 1.0)


def _synthesis_norm(grid):
    g = SpatialGrid(1.0, 512)
    c = ContourGrid(1.0, 2, 1.0, 64)
    synth = fourier_rows(c.modes, g).conj().T / g.b
    return abs(np.linalg.norm(np.sqrt(g.weights)[:, None] * synth, 2) - 1.0)


def _perturbation_norm(grid):
    g = SpatialGrid(1.0, 512)
    worst = 0.0
    for l1 in (0.05, 0.2):
        q0 = CoefficientFunction.constant(l1, 1.0)
        d = DataSetDn.from_model(ZeroModel(), 2, [q0], 1.0)
        xi0 = find_xi0(2, 1.0, l1)
        for factor in (2, 4):
            diag = build_system(d, g, ContourGrid(factor * xi0, 2, 1.0, 64)).diagnostics
            worst = max(worst, diag["K_minus_K0_norm"] / np.sqrt(diag["s_xi"]))
    return worst


def _green_identity(grid):
    q0 = CoefficientFunction.constant(0.2, 1.0)
    p = NonlinearPotential.from_coeffs(1.0, [q0, CoefficientFunction.sinusoid(0.3, np.pi, 1.0)])
    k = 0.7 + 1.5j
    state = solve_cascade(p, k, 2, grid)
    jost = linear_scattering(q0, k, grid)
    g2, _ = forcing(p, state, 2)
    return np.max(np.abs(y_order(state, jost, 2) - green_solve(jost, g2)))


def _xi0(grid):
    worst = 0.0
    for n, l1 in ((2, 0.05), (2, 0.2), (3, 0.1), (5, 0.02)):
        xi0 = find_xi0(n, 1.0, l1)
        worst = max(worst, abs(s_of_xi(xi0, n, 1.0, l1) - 1.0))
    return worst


def _s_monotone(grid):
    xi = np.geomspace(1e-3, 1e3, 200)
    bad = 0
    for n, l1 in ((2, 0.05), (3, 0.2)):
        s = s_of_xi(xi, n, 1.0, l1)
        bad += int(np.sum(np.diff(s) >= 0))
    return bad


def _volterra(grid):
    p = closed_form.example_potential("constant_gamma", 1.0, 1.0)
    eps = 0.05
    return max(np.max(np.abs(solve_nonlinear(p, k, eps, grid).value
                             - volterra_oracle(p, k, eps, grid).value))
               for k in (0.5, 1.0, 3.0))


CHECKS = (
    Check("free_field", 1e-10, "zero potential gives A = 0, B = eps", _free_field),
    Check("linear_unitarity", 1e-8, "|B|^2 - |A|^2 = |eps|^2 for a linear potential", _unitarity),
    Check("wronskian", 1e-6, "Jost pair Wronskian equals 2ik B1 at every node", _wronskian),
    Check("bound_u1", 1.0, "|exp(ikx) u1| over exp(b int|q0|)", _bound_u1),
    Check("bound_u1_power", 1.0, "|exp(ik(n+1)x) u1^(n+1) - 1| over its bound", _bound_power),
    Check("closed_form_A3_B3", 1e-6, "cascade A3, B3 vs closed forms (relative)", _closed_forms),
    Check("A3_B3_relation", 1e-7, "A3(k) + 2 B3(2k) for pure q2", _relation),
    Check("K0_norm", 0.02, "relative deviation of ||K0|| from sqrt(b)", _k0_norm),
    Check("synthesis_norm", 0.02, "relative deviation of ||K0^-1|| from 1/sqrt(b)", _synthesis_norm),
    Check("K_minus_K0", 1.05, "||K - K0|| over sqrt(s(xi))", _perturbation_norm),
    Check("green_identity", 1e-5, "y2 vs -int G g2 (sup norm)", _green_identity),
    Check("xi0_solver", 1e-10, "relative |s(xi0) - b|", _xi0),
    Check("s_monotone", 0.0, "non-decreasing steps of s on a log xi sweep", _s_monotone),
    Check("volterra_vs_rk4", 1e-7, "Picard oracle vs RK4 (sup norm)", _volterra),
)


def run_selfcheck(overrides: dict | None = None, grid: SpatialGrid | None = None) -> list:
    overrides = dict(overrides or {})
    unknown = set(overrides) - {c.name for c in CHECKS}
    if unknown:
        raise KeyError(f"unknown check(s): {', '.join(sorted(unknown))}")
    grid = grid or SpatialGrid.for_width(1.0)
    results = []
    for check in CHECKS:
        tol = float(overrides.get(check.name, check.tolerance))
        start = time.perf_counter()
        value = float(check.measure(grid))
        results.append(CheckResult(check.name, value, tol, bool(value <= tol),
                                   time.perf_counter() - start, check.description))
    return results


def format_table(results) -> str:
    lines = [f"{'check':<20} {'value':>11} {'tolerance':>11}  result  description"]
    for r in results:
        lines.append(f"{r.name:<20} {r.value:>11.3e} {r.tolerance:>11.3e}  "
                     f"{'PASS' if r.passed else 'FAIL':<6}  {r.description}")
    return "\n".join(lines)
