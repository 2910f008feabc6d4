"""Direct problem: incident wave from +infinity onto Q(x, u) supported in [0, b].

The solution is fixed on x <= 0 by u = eps * exp(-ikx); we integrate across
the support and read off the outgoing/incoming amplitudes A, B at x = b.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, EpsilonBoundWarning, PicardDivergence, ScatteringError
from .numerics import ComplexTrajectory, SpatialGrid, cumquad, integrate_ivp
from .potential import HalfStepTable, NonlinearPotential, epsilon_bound, horner


def _check_k(k):
    k = np.asarray(k)
    if np.any(k == 0):
        raise ContractViolation("k = 0 is excluded: the plane-wave basis degenerates")
    return k


def _check_grid(p: NonlinearPotential, grid: SpatialGrid):
    if not np.isclose(grid.b, p.b, rtol=1e-12, atol=0):
        raise ContractViolation(f"grid width {grid.b} does not match potential width {p.b}")


def solve_nonlinear(p: NonlinearPotential, k, epsilon, grid: SpatialGrid) -> ComplexTrajectory:
    """Integrate u'' = (Q(x, u) - k^2) u from u(0) = eps, u'(0) = -ik eps.

    ``k`` and ``epsilon`` may be arrays; they are broadcast into batch axes.
    """
    _check_grid(p, grid)
    k = _check_k(k)
    k, epsilon = np.broadcast_arrays(np.asarray(k, dtype=complex), np.asarray(epsilon, dtype=complex))
    k2 = k * k
    coeffs = HalfStepTable(p.coeffs, grid)

    def rhs(x, u, du):
        return (horner(coeffs(x), u) - k2) * u

    return integrate_ivp(rhs, epsilon, -1j * k * epsilon, grid)


def match_coefficients(traj: ComplexTrajectory, k):
    """(A, B) such that u = A exp(ikx) + B exp(-ikx) matches the trajectory at x = b."""
    k = _check_k(k)
    b = traj.grid.b
    u, du = traj.end_value, traj.end_slope
    A = np.exp(-1j * k * b) * (k * u - 1j * du) / (2 * k)
    B = np.exp(1j * k * b) * (k * u + 1j * du) / (2 * k)
    return A, B


def volterra_oracle(p: NonlinearPotential, k, epsilon, grid: SpatialGrid,
                    max_iter: int = 200, tol: float = 1e-12) -> ComplexTrajectory:
    """Picard iteration of the integral form of the initial value problem.

    u(x) = eps e^{-ikx} + (1/k) int_0^x sin(k(x - t)) Q(t, u) u dt, with the
    slope obtained from the x-derivative of the same formula.
    """
    _check_grid(p, grid)
    k = complex(_check_k(k))
    epsilon = complex(epsilon)
    x = grid.nodes
    free = epsilon * np.exp(-1j * k * x)
    free_slope = -1j * k * free
    cos_kx, sin_kx = np.cos(k * x), np.sin(k * x)
    coeffs = p.coefficient_values(x)

    u = free.copy()
    du = free_slope.copy()
    residual = np.inf
    for it in range(1, max_iter + 1):
        source = horner(coeffs, u) * u
        c = cumquad(cos_kx * source, grid)
        s = cumquad(sin_kx * source, grid)
        new_u = free + (sin_kx * c - cos_kx * s) / k
        new_du = free_slope + cos_kx * c + sin_kx * s
        residual = float(np.max(np.abs(new_u - u)))
        u, du = new_u, new_du
        if residual <= tol:
            return ComplexTrajectory(grid, u, du)
    raise PicardDivergence(residual, max_iter)


@dataclass(frozen=True)
class PlaneWaveMatch:
    k: float
    epsilon: complex
    A: complex
    B: complex


@dataclass(frozen=True)
class ScatteringSweep:
    """A(k; eps), B(k; eps) tabulated on a real k grid times an eps list.

    ``A`` and ``B`` have shape ``(len(k_grid), len(eps_list))``.
    """

    k_grid: np.ndarray
    eps_list: np.ndarray
    A: np.ndarray
    B: np.ndarray
    b: float
    degree: int
    delta: float | None = None
    notes: tuple = field(default=())

    def __post_init__(self):
        shape = (len(self.k_grid), len(self.eps_list))
        if self.A.shape != shape or self.B.shape != shape:
            raise ContractViolation(f"sweep table must have shape {shape}")

    def entries(self):
        """PlaneWaveMatch records ordered by (k index, eps index)."""
        for i, k in enumerate(self.k_grid):
            for j, eps in enumerate(self.eps_list):
                yield PlaneWaveMatch(float(k), complex(eps), complex(self.A[i, j]), complex(self.B[i, j]))

    def __len__(self):
        return self.A.size


def _validate_sweep_inputs(k_grid, eps_list):
    k_grid = np.atleast_1d(np.asarray(k_grid, dtype=float))
    eps_list = np.atleast_1d(np.asarray(eps_list, dtype=complex))
    if k_grid.size == 0 or eps_list.size == 0:
        raise ContractViolation("k_grid and eps_list must be non-empty")
    if np.any(k_grid == 0):
        raise ContractViolation("k_grid must exclude k = 0")
    if np.any(eps_list == 0):
        raise ContractViolation("eps_list values must be nonzero")
    if len(np.unique(eps_list)) != eps_list.size:
        raise ContractViolation("eps_list values must be distinct")
    return k_grid, eps_list


def sweep(p: NonlinearPotential, k_grid, eps_list, grid: SpatialGrid,
          r: float | None = 1.0, threads: int = 1) -> ScatteringSweep:
    """Solve the nonlinear problem for every (k, eps) pair.

    When ``r`` is given the existence bound delta(r) is computed and any
    |eps| > delta triggers an :class:`EpsilonBoundWarning` (the bound is only
    sufficient, so the solve still proceeds).
    """
    k_grid, eps_list = _validate_sweep_inputs(k_grid, eps_list)
    notes = []
    delta = None
    if r is not None:
        delta = epsilon_bound(p, r).delta
        big = np.abs(eps_list) > delta
        if np.any(big):
            msg = (f"|eps| up to {np.max(np.abs(eps_list)):.3g} exceeds the existence "
                   f"bound delta = {delta:.3g} (r = {r}); solutions are not guaranteed")
            warnings.warn(msg, EpsilonBoundWarning, stacklevel=2)
            notes.append(msg)

    K, E = np.meshgrid(k_grid, eps_list, indexing="ij")

    def solve_rows(rows):
        try:
            traj = solve_nonlinear(p, K[rows], E[rows], grid)
        except ScatteringError:
            _locate_failure(p, K[rows], E[rows], grid)
            raise
        return match_coefficients(traj, K[rows])

    chunks = _chunks(len(k_grid), max(1, threads))
    if len(chunks) == 1:
        results = [solve_rows(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve_rows, chunks))
    A = np.concatenate([r_[0] for r_ in results], axis=0)
    B = np.concatenate([r_[1] for r_ in results], axis=0)
    return ScatteringSweep(k_grid, eps_list, A, B, p.b, p.degree, delta, tuple(notes))


def _locate_failure(p, K, E, grid):
    """Re-solve pair by pair and re-raise the first failure tagged with (k, eps)."""
    for k, eps in zip(K.ravel(), E.ravel()):
        try:
            solve_nonlinear(p, k, eps, grid)
        except ScatteringError as exc:
            exc.k, exc.epsilon = k, eps
            exc.args = (f"{exc} (k = {k:.6g}, eps = {eps:.6g})",)
            raise


def _chunks(n, parts):
    parts = min(parts, n)
    edges = np.linspace(0, n, parts + 1).astype(int)
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]
