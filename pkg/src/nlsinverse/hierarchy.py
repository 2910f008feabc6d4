"""The epsilon-expansion cascade of linear problems.

Writing u = sum_n eps^n u_n turns the nonlinear problem into

    -u_1'' + q_0 u_1 = k^2 u_1,                 u_1 = exp(-ikx) for x <= 0,
    -u_n'' + q_0 u_n = k^2 u_n - g_n,           u_n = 0 for x <= 0, n >= 2,

with g_n = q_{n-1} u_1^n + h_n and h_n collecting the lower-order products.
Each u_n is A_n exp(ikx) + B_n exp(-ikx) for x >= b. All routines accept a
complex k, scalar or array; arrays become trailing batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, ContractViolation, IllConditionedExtraction, NearBoundState
from .forward import ScatteringSweep
from .numerics import ComplexTrajectory, SpatialGrid, cumquad, integrate_ivp
from .potential import CoefficientFunction, HalfStepTable, NonlinearPotential

WRONSKIAN_RTOL = 1e-6
BOUND_STATE_ATOL = 1e-10


def _as_k(k):
    return np.asarray(k, dtype=complex)


def _exact_exponential(sign, k, grid):
    """exp(sign * i k x) and its derivative, with k broadcast to trailing axes."""
    x = grid.nodes.reshape((-1,) + (1,) * np.ndim(k))
    value = np.exp(sign * 1j * k * x)
    return ComplexTrajectory(grid, value, sign * 1j * k * value)


def _linear_rhs(q0: CoefficientFunction, k, grid):
    k2 = k * k
    table = HalfStepTable([q0], grid)

    def rhs(x, u, du):
        return (table(x)[0] - k2) * u

    return rhs


def jost_right(q0: CoefficientFunction, k, grid: SpatialGrid) -> ComplexTrajectory:
    """u_1 on [0, b]: u_1(0) = 1, u_1'(0) = -ik."""
    k = _as_k(k)
    if q0.is_zero:
        return _exact_exponential(-1, k, grid)
    return integrate_ivp(_linear_rhs(q0, k, grid), np.ones_like(k), -1j * k, grid)


def jost_left(q0: CoefficientFunction, k, grid: SpatialGrid) -> ComplexTrajectory:
    """v_1 on [0, b]: v_1(b) = exp(ikb), v_1'(b) = ik exp(ikb), integrated backward."""
    k = _as_k(k)
    if q0.is_zero:
        return _exact_exponential(1, k, grid)
    end = np.exp(1j * k * grid.b)
    return integrate_ivp(_linear_rhs(q0, k, grid), end, 1j * k * end, grid, direction="backward")


def extract_AB(u_b, du_b, k, b):
    """Amplitudes (A_n, B_n) of exp(ikx), exp(-ikx) from u_n(b), u_n'(b)."""
    k = _as_k(k)
    if np.any(k == 0):
        raise ContractViolation("k = 0 is excluded when reading off A_n, B_n")
    A = (k * u_b - 1j * du_b) / (2 * k) * np.exp(-1j * k * b)
    B = (k * u_b + 1j * du_b) / (2 * k) * np.exp(1j * k * b)
    return A, B


@dataclass(frozen=True)
class JostSolutions:
    k: np.ndarray
    u1: ComplexTrajectory
    v1: ComplexTrajectory
    A1: np.ndarray
    B1: np.ndarray

    @property
    def T(self):
        """Transmission coefficient 1/B_1."""
        return 1.0 / self.B1

    @property
    def R(self):
        """Right reflection coefficient A_1/B_1."""
        return self.A1 / self.B1

    def wronskian(self) -> np.ndarray:
        """v_1' u_1 - v_1 u_1' at every node."""
        return self.v1.slope * self.u1.value - self.v1.value * self.u1.slope

    def wronskian_deviation(self) -> float:
        """max over nodes of |W(x) - 2ikB_1| / |2ikB_1|."""
        target = 2j * self.k * self.B1
        return float(np.max(np.abs(self.wronskian() - target) / np.abs(target)))

    def __getitem__(self, index) -> JostSolutions:
        return JostSolutions(self.k[index], self.u1[index], self.v1[index],
                             self.A1[index], self.B1[index])


def linear_scattering(q0: CoefficientFunction, k, grid: SpatialGrid,
                      rtol: float = WRONSKIAN_RTOL) -> JostSolutions:
    """Jost pair plus A_1, B_1; B_1 cross-checked against the Wronskian."""
    k = _as_k(k)
    if np.any(k == 0):
        raise ContractViolation("k = 0 is excluded from linear scattering")
    u1 = jost_right(q0, k, grid)
    v1 = jost_left(q0, k, grid)
    A1, B1 = extract_AB(u1.end_value, u1.end_slope, k, grid.b)
    jost = JostSolutions(k, u1, v1, A1, B1)
    if np.all(np.abs(B1) > 0):
        dev = jost.wronskian_deviation()
        if dev > rtol:
            raise ConsistencyError(f"Wronskian deviates from 2ikB1 by {dev:.3e} (relative)")
    return jost


# --- products of the expansion ------------------------------------------------

def _truncated_product(a, b, n):
    """Cauchy product of coefficient lists a, b up to degree n; None marks a zero."""
    out = [None] * (n + 1)
    for i, ai in enumerate(a[: n + 1]):
        if ai is None:
            continue
        for j, bj in enumerate(b[: n + 1 - i]):
            if bj is None:
                continue
            term = ai * bj
            out[i + j] = term if out[i + j] is None else out[i + j] + term
    return out


def _series(u_list, n):
    coeffs = [None] * (n + 1)
    for m, u in enumerate(u_list[:n], start=1):
        coeffs[m] = u
    return coeffs


def power_coefficients(u_list, j: int, n: int):
    """Coefficient of eps^n in (eps u_1 + ... + eps^{n-1} u_{n-1})^j, pointwise."""
    if not 2 <= j <= n - 1:
        raise ContractViolation(f"power j must satisfy 2 <= j <= n - 1, got j={j}, n={n}")
    if len(u_list) < n - 1:
        raise ContractViolation(f"need u_1 ... u_{n - 1}, got {len(u_list)} orders")
    base = _series(list(u_list[: n - 1]), n)
    acc = base
    for _ in range(j - 1):
        acc = _truncated_product(acc, base, n)
    out = acc[n]
    return out if out is not None else np.zeros_like(np.asarray(u_list[0]))


def _q_at(q_values, m):
    return q_values[m] if m < len(q_values) else 0


def forcing_terms(q_values, u_list, n: int):
    """(g_n, h_n) from coefficient values q_0, q_1, ... and u_1 ... u_{n-1}.

    Works pointwise on arrays, so it serves both for node samples and inside
    the RK4 right-hand side.
    """
    if n < 2:
        raise ContractViolation("forcing is defined for n >= 2")
    if len(u_list) < n - 1:
        raise ContractViolation(f"forcing of order {n} needs u_1 ... u_{n - 1}")
    u1 = np.asarray(u_list[0])
    h = np.zeros(np.broadcast_shapes(u1.shape, np.shape(_q_at(q_values, 1))), dtype=complex)
    for j in range(2, n):
        q = _q_at(q_values, j - 1)
        if np.any(q):
            h = h + power_coefficients(u_list, j, n) * q
    g = _q_at(q_values, n - 1) * u1**n + h
    return g, h


def _all_forcings(q_values, u_stack):
    """g_2 ... g_N stacked on the last axis, from u_1 ... u_N on the last axis."""
    N = u_stack.shape[-1]
    out = np.zeros_like(u_stack)
    if N < 2:
        return out
    base = [None] + [u_stack[..., m] for m in range(N)]
    power = base
    for J in range(2, N + 1):
        power = _truncated_product(power, base, N)
        q = _q_at(q_values, J - 1)
        if not np.any(q):
            continue
        for n in range(J, N + 1):
            if power[n] is not None:
                out[..., n - 1] += q * power[n]
    return out


@dataclass(frozen=True)
class CascadeState:
    """u_1 ... u_N on the grid and the amplitudes A_n, B_n (index n-1)."""

    k: np.ndarray
    n_max: int
    u: tuple
    A: np.ndarray
    B: np.ndarray

    def AB(self, n: int):
        return self.A[n - 1], self.B[n - 1]


def solve_cascade(p: NonlinearPotential, k, n_max: int, grid: SpatialGrid) -> CascadeState:
    """Integrate u_1 ... u_{n_max} jointly as one triangular ODE system."""
    if n_max < 1:
        raise ContractViolation("n_max must be >= 1")
    if not np.isclose(grid.b, p.b, rtol=1e-12, atol=0):
        raise ContractViolation("grid width does not match the potential")
    k = _as_k(k)
    if np.any(k == 0):
        raise ContractViolation("k = 0 is excluded from the cascade")
    coeffs = [p.q(m) for m in range(n_max)]
    table = HalfStepTable(coeffs, grid)
    kk = k[..., None]
    k2 = kk * kk

    def rhs(x, u, du):
        q = table(x)
        return (q[0] - k2) * u + _all_forcings(q, u)

    u0 = np.zeros(k.shape + (n_max,), dtype=complex)
    du0 = np.zeros_like(u0)
    u0[..., 0] = 1.0
    du0[..., 0] = -1j * k
    traj = integrate_ivp(rhs, u0, du0, grid)
    orders = tuple(ComplexTrajectory(grid, traj.value[..., m], traj.slope[..., m])
                   for m in range(n_max))
    A, B = extract_AB(traj.end_value, traj.end_slope, kk, grid.b)
    return CascadeState(k, n_max, orders, np.moveaxis(A, -1, 0), np.moveaxis(B, -1, 0))


def forcing(p: NonlinearPotential, state: CascadeState, n: int):
    """(g_n, h_n) sampled on the grid nodes from a solved cascade."""
    if state.n_max < n - 1:
        raise ContractViolation(f"cascade holds orders up to {state.n_max}; order {n} needs {n - 1}")
    grid = state.u[0].grid
    shape = (-1,) + (1,) * state.k.ndim
    q_values = [p.q(m)(grid.nodes).reshape(shape) for m in range(n)]
    return forcing_terms(q_values, [t.value for t in state.u[: n - 1]], n)


# --- Green's function -----------------------------------------------------------

def _check_resolvent(jost: JostSolutions):
    k = complex(jost.k)
    if not k.imag > 0:
        raise ContractViolation("the Green's function needs Im k > 0")
    if abs(complex(jost.B1)) < BOUND_STATE_ATOL:
        raise NearBoundState(f"|B1({k})| = {abs(complex(jost.B1)):.3e}: near a bound state or resonance")
    return k


def green(x, t, jost: JostSolutions):
    """G(x, t; k) built from the Jost pair, for a single k."""
    k = _check_resolvent(jost)
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    lo, hi = np.minimum(x, t), np.maximum(x, t)
    return -jost.u1(lo) * jost.v1(hi) / (2j * k * complex(jost.B1))


def green_solve(jost: JostSolutions, g) -> np.ndarray:
    """-int_0^b G(x, t; k) g(t) dt at every node, for a single k."""
    k = _check_resolvent(jost)
    grid = jost.u1.grid
    iu = cumquad(jost.u1.value * g, grid)
    iv = cumquad(jost.v1.value * g, grid)
    return (jost.u1.value * (iv[-1] - iv) + jost.v1.value * iu) / (2j * k * complex(jost.B1))


def y_order(state: CascadeState, jost: JostSolutions, n: int) -> np.ndarray:
    """y_n = u_n - (B_n / B_1) u_1, which decays at both ends for Im k > 0.

    It solves the forced linear problem, so it must equal ``green_solve`` of g_n.
    """
    if not 2 <= n <= state.n_max:
        raise ContractViolation(f"y_n needs 2 <= n <= {state.n_max}")
    _, B = state.AB(n)
    return state.u[n - 1].value - (B / jost.B1) * jost.u1.value


# --- series coefficients --------------------------------------------------------

@dataclass(frozen=True)
class SeriesCoefficients:
    """A_n(k), B_n(k) for n = 1 ... N on a k grid; arrays of shape (N, len(k))."""

    k_grid: np.ndarray
    A: np.ndarray
    B: np.ndarray
    source: str
    residual: np.ndarray | None = None

    def __post_init__(self):
        if self.A.shape != self.B.shape or self.A.shape[1:] != (len(self.k_grid),):
            raise ContractViolation("series arrays must have shape (N_max, len(k_grid))")

    @property
    def n_max(self) -> int:
        return self.A.shape[0]

    def AB(self, n: int):
        return self.A[n - 1], self.B[n - 1]


def series_from_cascade(p: NonlinearPotential, k_grid, n_max: int, grid: SpatialGrid) -> SeriesCoefficients:
    k_grid = _as_k(np.atleast_1d(k_grid))
    state = solve_cascade(p, k_grid, n_max, grid)
    return SeriesCoefficients(k_grid, state.A, state.B, "cascade")


MAX_VANDERMONDE_CONDITION = 1e12


def extract_series(sweep: ScatteringSweep, n_max: int) -> SeriesCoefficients:
    """Least-squares fit of A(k; eps) = sum_{n=1}^{N} eps^n A_n(k) per k (same for B).

    The eps powers are scaled by max|eps| before the fit; the condition number
    of that scaled Vandermonde matrix is what gets checked.
    """
    eps = np.asarray(sweep.eps_list, dtype=complex)
    if n_max < 1:
        raise ContractViolation("n_max must be >= 1")
    if eps.size < n_max:
        raise ContractViolation(f"need at least {n_max} eps values, got {eps.size}")
    if np.any(eps == 0) or len(np.unique(eps)) != eps.size:
        raise ContractViolation("eps values must be distinct and nonzero")
    scale = np.max(np.abs(eps))
    powers = np.arange(1, n_max + 1)
    V = (eps[:, None] / scale) ** powers[None, :]
    cond = np.linalg.cond(V)
    if not cond <= MAX_VANDERMONDE_CONDITION:
        raise IllConditionedExtraction(
            f"Vandermonde condition number {cond:.3e} exceeds {MAX_VANDERMONDE_CONDITION:.0e}; "
            "adjust eps_list (spread the values or use fewer orders)"
        )
    rhs = np.concatenate([sweep.A.T, sweep.B.T], axis=1)  # (n_eps, 2 * n_k)
    coef, *_ = np.linalg.lstsq(V, rhs, rcond=None)
    fitted = V @ coef
    nk = len(sweep.k_grid)
    unscale = (scale ** powers)[:, None]
    A = coef[:, :nk] / unscale
    B = coef[:, nk:] / unscale
    resid = np.maximum(np.linalg.norm(fitted[:, :nk] - rhs[:, :nk], axis=0),
                       np.linalg.norm(fitted[:, nk:] - rhs[:, nk:], axis=0))
    return SeriesCoefficients(np.asarray(sweep.k_grid, dtype=complex), A, B, "extracted", resid)
