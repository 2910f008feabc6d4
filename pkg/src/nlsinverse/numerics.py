"""Complex-valued numerical kernels on the support interval [0, b].

Everything here works on a uniform grid with an even number of intervals so
that RK4 trajectories and composite Simpson quadrature share the same nodes.
Arrays carry the node axis first; any trailing axes are batch axes (for
example one column per wavenumber), which lets a single integration sweep a
whole set of k values at once.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline

from .errors import ContractViolation, NumericallySingular, TrajectoryBlowUp

DEFAULT_INTERVALS_PER_UNIT = 2000


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid x_0 = 0 < ... < x_N = b with N even."""

    b: float
    n_intervals: int

    def __post_init__(self):
        if not self.b > 0:
            raise ContractViolation(f"support width must be positive, got {self.b}")
        if self.n_intervals < 2 or self.n_intervals % 2:
            raise ContractViolation(
                f"number of intervals must be even and >= 2, got {self.n_intervals}"
            )

    @classmethod
    def for_width(cls, b: float, per_unit: int = DEFAULT_INTERVALS_PER_UNIT) -> SpatialGrid:
        n = max(2, int(np.ceil(b * per_unit)))
        return cls(b, n + (n % 2))

    @property
    def step(self) -> float:
        return self.b / self.n_intervals

    @property
    def size(self) -> int:
        return self.n_intervals + 1

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.linspace(0.0, self.b, self.size)
        x[-1] = self.b
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        """Composite Simpson weights."""
        w = np.full(self.size, self.step / 3.0)
        w[1:-1:2] *= 4.0
        w[2:-1:2] *= 2.0
        return w


@dataclass(frozen=True)
class ComplexTrajectory:
    """Samples of a function and its x-derivative on every grid node."""

    grid: SpatialGrid
    value: np.ndarray
    slope: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.value.shape[0] != self.grid.size or self.slope.shape[0] != self.grid.size:
            raise ContractViolation(
                f"trajectory needs {self.grid.size} samples, got "
                f"{self.value.shape[0]} values and {self.slope.shape[0]} slopes"
            )

    @property
    def end_value(self):
        return self.value[-1]

    @property
    def end_slope(self):
        return self.slope[-1]

    def __getitem__(self, index) -> ComplexTrajectory:
        """Select along the batch axes, keeping the node axis."""
        if not isinstance(index, tuple):
            index = (index,)
        sel = (slice(None),) + index
        return ComplexTrajectory(self.grid, self.value[sel], self.slope[sel])

    @cached_property
    def _spline(self):
        return CubicHermiteSpline(self.grid.nodes, self.value, self.slope, axis=0)

    def __call__(self, x, nu: int = 0):
        """Cubic Hermite interpolation (or its ``nu``-th derivative) at ``x``."""
        x = np.asarray(x, dtype=float)
        if np.any((x < 0) | (x > self.grid.b)):
            raise ContractViolation("trajectory evaluated outside [0, b]")
        return self._spline(x, nu)


def integrate_ivp(rhs, initial_value, initial_slope, grid: SpatialGrid,
                  direction: str = "forward") -> ComplexTrajectory:
    """Classical RK4 for u'' = rhs(x, u, u') on ``grid``.

    ``initial_value``/``initial_slope`` are the data at x = 0 for
    ``direction="forward"`` and at x = b for ``direction="backward"``. They
    may be arrays; ``rhs`` must then broadcast over them. The returned samples
    are always ordered by increasing x.
    """
    if direction not in ("forward", "backward"):
        raise ContractViolation(f"direction must be 'forward' or 'backward', got {direction!r}")
    u = np.asarray(initial_value, dtype=complex) + 0j
    du = np.asarray(initial_slope, dtype=complex) + 0j
    u, du = np.broadcast_arrays(u, du)
    u, du = u.copy(), du.copy()

    n = grid.n_intervals
    values = np.empty((n + 1,) + u.shape, dtype=complex)
    slopes = np.empty_like(values)
    if direction == "forward":
        order = range(n + 1)
        h = grid.step
    else:
        order = range(n, -1, -1)
        h = -grid.step
    xs = grid.nodes

    order = list(order)
    values[order[0]] = u
    slopes[order[0]] = du
    with np.errstate(over="ignore", invalid="ignore"):
        _rk4_steps(rhs, u, du, xs, order, h, values, slopes)
    return ComplexTrajectory(grid, values, slopes)


def _rk4_steps(rhs, u, du, xs, order, h, values, slopes):
    half = 0.5 * h
    for step, i in enumerate(order[:-1]):
        x = xs[i]
        a1 = rhs(x, u, du)
        a2 = rhs(x + half, u + half * du, du + half * a1)
        a3 = rhs(x + half, u + half * du + 0.25 * h * h * a1, du + half * a2)
        a4 = rhs(x + h, u + h * du + 0.5 * h * h * a2, du + h * a3)
        u = u + h * du + (h * h / 6.0) * (a1 + a2 + a3)
        du = du + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        j = order[step + 1]
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(du))):
            raise TrajectoryBlowUp(j)
        values[j] = u
        slopes[j] = du


def _check_samples(samples, grid):
    samples = np.asarray(samples)
    if samples.shape[0] != grid.size:
        raise ContractViolation(
            f"expected {grid.size} samples on the grid, got {samples.shape[0]}"
        )
    return samples


def quad(samples, grid: SpatialGrid):
    """Composite Simpson integral over [0, b] along the node axis."""
    samples = _check_samples(samples, grid)
    return np.tensordot(grid.weights, samples, axes=(0, 0))


def cumquad(samples, grid: SpatialGrid) -> np.ndarray:
    """Running integral from 0 to every node (Simpson based), node axis first."""
    samples = _check_samples(samples, grid)
    out = np.zeros(samples.shape, dtype=np.result_type(samples, float))
    # cumulative_simpson silently drops imaginary parts
    out[1:] = cumulative_simpson(samples.real, dx=grid.step, axis=0)
    if np.iscomplexobj(samples):
        out[1:] += 1j * cumulative_simpson(samples.imag, dx=grid.step, axis=0)
    return out


def solve_dense(matrix, rhs):
    """Solve ``matrix @ x = rhs`` by LU with partial pivoting.

    Returns ``(x, residual_norm)``. Raises :class:`NumericallySingular` when a
    pivot falls below ``1e-13`` times the largest matrix entry.
    """
    a = np.asarray(matrix, dtype=complex)
    y = np.asarray(rhs, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ContractViolation(f"solve_dense needs a non-empty square matrix, got {a.shape}")
    if y.shape[0] != a.shape[0]:
        raise ContractViolation("right-hand side length does not match the matrix")
    scale = np.max(np.abs(a))
    if scale == 0:
        raise NumericallySingular("matrix is identically zero")
    with warnings.catch_warnings():
        # exact zero pivots are reported below as NumericallySingular
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if np.min(pivots) < 1e-13 * scale:
        raise NumericallySingular(
            f"pivot {np.min(pivots):.3e} below 1e-13 * max|A| = {1e-13 * scale:.3e}"
        )
    x = scipy.linalg.lu_solve((lu, piv), y)
    residual = float(np.linalg.norm(a @ x - y))
    return x, residual
