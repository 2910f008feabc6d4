"""Recovery of q_{n-1} (n >= 2) from A_n, B_n and the already known q_0 ... q_{n-2}.

The two data identities

    int_0^b u_1^{n+1} q_{n-1} dt = F_n(k),     int_0^b v_1 u_1^n q_{n-1} dt = E_n(k)

hold for every complex k. Sampling them on the shifted contour
k_m = 2 pi m / ((n+1) b) + i xi turns the first into a perturbed Fourier-series
operator K acting on phi(t) = exp(xi (n+1) t) q_{n-1}(t). K reduces to the
plain Fourier operator K0 when q_0 = 0, and K - K0 is small in norm once xi is
large enough; the Neumann series around K0 then inverts K.

The E route mirrors this with v_1 u_1^n, whose growth along the contour is
exp(xi (n-1) t); its contour and weight therefore use n - 1 in place of n + 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.linalg
from numpy.polynomial import chebyshev

from .errors import (
    ContractViolation,
    NearBoundState,
    NeumannDivergence,
    NeumannNotGuaranteed,
    NumericallySingular,
    PoorReconstructionWarning,
)
from .hierarchy import (
    BOUND_STATE_ATOL,
    SeriesCoefficients,
    forcing_terms,
    linear_scattering,
    solve_cascade,
)
from .numerics import SpatialGrid, quad, solve_dense
from .potential import CoefficientFunction, NonlinearPotential
from . import closed_form

# --- data sources -----------------------------------------------------------------


class CascadeModel:
    """A_n(k), B_n(k) at any complex k from a known (synthetic) potential."""

    def __init__(self, potential: NonlinearPotential, grid: SpatialGrid):
        self.potential = potential
        self.grid = grid

    def coefficients(self, n, k):
        state = solve_cascade(self.potential, k, n, self.grid)
        return state.AB(n)


class ClosedFormModel:
    """The pure-q_2 examples: only orders 1 to 4 have closed forms."""

    def __init__(self, name, param, b):
        self.A3, self.B3, _ = closed_form.example_functions(name, param, b)
        self.name, self.param, self.b = name, param, b

    def coefficients(self, n, k):
        k = np.asarray(k, dtype=complex)
        if n == 1:
            return np.zeros_like(k), np.ones_like(k)
        if n in (2, 4):
            return np.zeros_like(k), np.zeros_like(k)
        if n == 3:
            return self.A3(k), self.B3(k)
        raise ContractViolation(f"no closed form for order {n} of the {self.name} example")


class ZeroModel:
    """Scattering data of the zero potential."""

    def coefficients(self, n, k):
        k = np.asarray(k, dtype=complex)
        return np.zeros_like(k), (np.ones_like(k) if n == 1 else np.zeros_like(k))


class SeriesModel:
    """Tabulated series coefficients; only the tabulated real k are available.

    No analytic continuation is attempted, so asking for any other k (in
    particular the complex contour points) raises.
    """

    def __init__(self, series: SeriesCoefficients):
        self.series = series

    def coefficients(self, n, k):
        if n > self.series.n_max:
            raise ContractViolation(f"series holds orders up to {self.series.n_max}, asked for {n}")
        k = np.asarray(k, dtype=complex)
        table = np.asarray(self.series.k_grid, dtype=complex)
        idx = np.array([np.flatnonzero(np.isclose(table, kk, rtol=1e-12, atol=1e-14))[:1]
                        for kk in np.ravel(k)], dtype=object)
        if any(len(i) == 0 for i in idx):
            raise ContractViolation(
                "tabulated series cannot be evaluated off their k grid; complex contour "
                "points need a generative model (cascade or closed form)"
            )
        i = np.array([int(j[0]) for j in idx]).reshape(np.shape(k))
        A, B = self.series.AB(n)
        return A[i], B[i]


# --- data functionals -------------------------------------------------------------


@dataclass(frozen=True)
class DataSetDn:
    """A_n, B_n (callables of complex k) and the known q_0 ... q_{n-2}."""

    n: int
    A_n: Callable
    B_n: Callable
    known_coeffs: tuple
    b: float

    def __post_init__(self):
        if self.n < 2:
            raise ContractViolation("data sets are defined for n >= 2")
        if len(self.known_coeffs) != self.n - 1:
            raise ContractViolation(
                f"order {self.n} needs q_0 ... q_{self.n - 2} ({self.n - 1} coefficients), "
                f"got {len(self.known_coeffs)}"
            )

    @classmethod
    def from_model(cls, model, n, known_coeffs, b):
        return cls(n, lambda k: model.coefficients(n, k)[0],
                   lambda k: model.coefficients(n, k)[1], tuple(known_coeffs), b)

    @property
    def q0(self) -> CoefficientFunction:
        return self.known_coeffs[0]

    def known_potential(self) -> NonlinearPotential:
        return NonlinearPotential(self.b, tuple(self.known_coeffs))


def compute_hn_for_data(d: DataSetDn, k, grid: SpatialGrid) -> np.ndarray:
    """h_n(.; k) on the grid nodes (node axis first), from q_0 ... q_{n-2} only."""
    k = np.asarray(k, dtype=complex)
    if d.n == 2:
        return np.zeros((grid.size,) + k.shape, dtype=complex)
    p = d.known_potential()
    state = solve_cascade(p, k, d.n - 1, grid)
    shape = (-1,) + (1,) * k.ndim
    q_values = [c(grid.nodes).reshape(shape) for c in d.known_coeffs]
    _, h = forcing_terms(q_values, [t.value for t in state.u], d.n)
    return h


@dataclass(frozen=True)
class _Functionals:
    jost: object
    h: np.ndarray
    A_n: np.ndarray
    B_n: np.ndarray

    def E(self, grid):
        k = self.jost.k
        return -2j * k * self.B_n - quad(self.jost.v1.value * self.h, grid)

    def F(self, grid):
        j = self.jost
        return 2j * j.k * (j.B1 * self.A_n - j.A1 * self.B_n) - quad(j.u1.value * self.h, grid)


def _functionals(d: DataSetDn, k, grid, need_A=True):
    k = np.asarray(k, dtype=complex)
    jost = linear_scattering(d.q0, k, grid)
    h = compute_hn_for_data(d, k, grid)
    B_n = np.asarray(d.B_n(k))
    A_n = np.asarray(d.A_n(k)) if need_A else None
    return _Functionals(jost, h, A_n, B_n)


def compute_En(d: DataSetDn, k, grid: SpatialGrid):
    """E_n(k) = -2ik B_n(k) - int_0^b v_1 h_n dt (needs no A_n)."""
    return _functionals(d, k, grid, need_A=False).E(grid)


def compute_Fn(d: DataSetDn, k, grid: SpatialGrid):
    """F_n(k) = 2ik [B_1 A_n - A_1 B_n] - int_0^b u_1 h_n dt."""
    return _functionals(d, k, grid).F(grid)


# --- contour parameter ------------------------------------------------------------


def s_of_xi(xi, n, b, q0_l1):
    """Upper bound s(xi) for ||K - K0||^2; decreasing in xi."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0):
        raise ContractViolation("xi must be positive")
    m = n + 1
    return (b**2 * m**3 / (2 * xi)) * q0_l1**2 / np.tanh(m * b * xi / 2) * np.exp(2 * b * m * q0_l1)


def find_xi0(n, b, q0_l1, rtol=1e-13):
    """The xi0 with s(xi0) = b, by bisection; 0 when q_0 vanishes."""
    if q0_l1 < 0:
        raise ContractViolation("the L1 norm of q_0 must be >= 0")
    if q0_l1 == 0:
        return 0.0
    lo, hi = 1.0, 1.0
    while s_of_xi(lo, n, b, q0_l1) < b:
        lo /= 2
    while s_of_xi(hi, n, b, q0_l1) > b:
        hi *= 2
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        s = s_of_xi(mid, n, b, q0_l1)
        if abs(s - b) <= rtol * b:
            return float(mid)
        if s > b:
            lo = mid
        else:
            hi = mid
    return float(0.5 * (lo + hi))


@dataclass(frozen=True)
class ContourGrid:
    """k_m = 2 pi m / (power b) + i xi for m = -M ... M; power is n+1 (F) or n-1 (E)."""

    xi: float
    n: int
    b: float
    M: int
    power: int | None = None

    def __post_init__(self):
        if not self.xi > 0:
            raise ContractViolation("xi must be strictly positive")
        if self.M < 0:
            raise ContractViolation("mode truncation M must be >= 0")
        if self.power is None:
            object.__setattr__(self, "power", self.n + 1)
        if self.power < 1:
            raise ContractViolation("contour power must be >= 1")

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    @property
    def k_values(self) -> np.ndarray:
        return 2 * np.pi * self.modes / (self.power * self.b) + 1j * self.xi


# --- the discrete operator ---------------------------------------------------------


def fourier_rows(modes, grid: SpatialGrid) -> np.ndarray:
    """K0 kernel samples exp(-2 pi i m t / b), shape (len(modes), nodes)."""
    return np.exp(-2j * np.pi * np.outer(modes, grid.nodes) / grid.b)


def weighted_norm(matrix, grid: SpatialGrid) -> float:
    """Operator norm from L2(0, b) (Simpson-weighted) into l2 of a kernel sample matrix."""
    return float(np.linalg.norm(matrix * np.sqrt(grid.weights), 2))


@dataclass(frozen=True)
class InversionSystem:
    """Kernel samples, weighted matrix K, right-hand side p and diagnostics.

    ``contour`` is None for systems sampled on the real k axis.
    """

    contour: ContourGrid | None
    grid: SpatialGrid
    use_F: bool
    kernel: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def Kmat(self) -> np.ndarray:
        return self.kernel * self.grid.weights

    @property
    def K0_kernel(self) -> np.ndarray:
        if self.contour is None:
            raise ContractViolation("real-axis systems have no Fourier reference operator")
        return fourier_rows(self.contour.modes, self.grid)

    @property
    def K0mat(self) -> np.ndarray:
        return self.K0_kernel * self.grid.weights

    def K0_inverse(self, h) -> np.ndarray:
        """Truncated Fourier synthesis (1/b) sum_m h(m) exp(2 pi i m t / b)."""
        return self.K0_kernel.conj().T @ np.asarray(h) / self.grid.b

    def apply(self, phi) -> np.ndarray:
        return self.Kmat @ phi

    def l2(self, phi) -> float:
        return float(np.sqrt(np.sum(self.grid.weights * np.abs(phi) ** 2)))


def build_system(d: DataSetDn, grid: SpatialGrid, contour: ContourGrid,
                 use_F: bool = True) -> InversionSystem:
    """Sample the kernel on the contour and evaluate p(m) = F_n(k_m) (or E_n(k_m))."""
    if contour.n != d.n:
        raise ContractViolation(f"contour built for n={contour.n}, data are for n={d.n}")
    expected = d.n + 1 if use_F else d.n - 1
    if contour.power != expected:
        raise ContractViolation(f"{'F' if use_F else 'E'} route needs contour power {expected}")
    if not np.isclose(grid.b, d.b, rtol=1e-12, atol=0):
        raise ContractViolation("grid width does not match the data")
    n, xi = d.n, contour.xi
    k = contour.k_values
    fn = _functionals(d, k, grid, need_A=use_F)
    jost = fn.jost
    min_B1 = float(np.min(np.abs(jost.B1)))
    if min_B1 < BOUND_STATE_ATOL:
        raise NearBoundState(f"contour passes near a zero of B1 (|B1| = {min_B1:.2e}); raise xi")

    t = grid.nodes[:, None]
    u1 = jost.u1.value
    if use_F:
        kernel = np.exp(-xi * (n + 1) * t) * u1 ** (n + 1)
        p = fn.F(grid)
        plain = np.exp(1j * k * (n + 1) * t) * u1 ** (n + 1)
    else:
        kernel = np.exp(-xi * (n - 1) * t) * jost.v1.value * u1**n
        p = fn.E(grid)
        plain = np.exp(1j * k * (n - 1) * t) * jost.v1.value * u1**n
    kernel = kernel.T.copy()

    q0_l1 = d.q0.l1_norm(grid)
    s = float(s_of_xi(xi, n, d.b, q0_l1))
    diagnostics = {
        "xi": xi,
        "M": contour.M,
        "n": n,
        "route": "F" if use_F else "E",
        "q0_l1": q0_l1,
        "s_xi": s,
        "contraction_estimate": float(np.sqrt(s / d.b)),
        "K_norm": weighted_norm(kernel, grid),
        "K_minus_K0_norm": weighted_norm(kernel - fourier_rows(contour.modes, grid), grid),
        "M_U": float(np.max(np.abs(k * (plain - 1)))),
        "min_abs_B1": min_B1,
        "max_kh": float(np.max(np.abs(k)) * grid.step),
    }
    return InversionSystem(contour, grid, use_F, kernel, np.asarray(p), diagnostics)


def build_real_system(d: DataSetDn, grid: SpatialGrid, k_real, use_F: bool = True
                      ) -> InversionSystem:
    """Rows of the data identities at real k > 0 and their mirror images at -k.

    For real coefficients u_1(t; -k) and the data at -k are complex conjugates
    of those at k, so every sampled k contributes two rows. No contour weight
    is needed on the real axis.
    """
    k = np.asarray(k_real, dtype=float)
    if k.ndim != 1 or k.size == 0 or np.any(k <= 0):
        raise ContractViolation("real-axis inversion needs a non-empty list of k > 0")
    fn = _functionals(d, k.astype(complex), grid, need_A=use_F)
    u1 = fn.jost.u1.value
    if use_F:
        rows, p = (u1 ** (d.n + 1)).T, fn.F(grid)
    else:
        rows, p = (fn.jost.v1.value * u1**d.n).T, fn.E(grid)
    kernel = np.vstack([rows, rows.conj()])
    p = np.concatenate([p, np.conj(p)])
    diagnostics = {
        "xi": 0.0,
        "n": d.n,
        "route": "F" if use_F else "E",
        "k_min": float(k.min()),
        "k_max": float(k.max()),
        "k_count": int(k.size),
        "K_norm": weighted_norm(kernel, grid),
    }
    return InversionSystem(None, grid, use_F, kernel, p, diagnostics)


@dataclass(frozen=True)
class PhiSolution:
    phi: np.ndarray
    method: str
    basis: str | None = None
    terms: int | None = None
    term_ratios: tuple = ()


def invert_neumann(system: InversionSystem, max_terms: int = 500, tol: float = 1e-14,
                   force: bool = False) -> PhiSolution:
    """phi = sum_j (-1)^j [K0^{-1}(K - K0)]^j K0^{-1} p."""
    contraction = system.diagnostics.get("contraction_estimate", 0.0)
    if contraction >= 1 and not force:
        raise NeumannNotGuaranteed(
            f"contraction estimate sqrt(s(xi)/b) = {contraction:.3f} >= 1; raise xi"
        )
    D = system.Kmat - system.K0mat
    term = system.K0_inverse(system.p)
    phi = term.copy()
    norms = [system.l2(term)]
    if norms[0] == 0:
        return PhiSolution(phi, "neumann", terms=1)
    growth = 0
    for _ in range(1, max_terms):
        term = -system.K0_inverse(D @ term)
        size = system.l2(term)
        if size <= tol * system.l2(phi):
            break
        phi = phi + term
        growth = growth + 1 if size > norms[-1] else 0
        norms.append(size)
        if growth >= 3:
            raise NeumannDivergence(f"Neumann terms grew for 3 consecutive steps (last {size:.3e})")
    else:
        raise NeumannDivergence(f"Neumann series not converged after {max_terms} terms")
    ratios = tuple(b_ / a_ for a_, b_ in zip(norms[:-1], norms[1:]))
    return PhiSolution(phi, "neumann", terms=len(norms), term_ratios=ratios)


BASES = ("chebyshev", "hat", "fourier", "nodal")


def basis_matrix(basis: str, grid: SpatialGrid, n_basis: int | None = None,
                 modes=None) -> np.ndarray | None:
    """Columns are basis functions sampled on the nodes (None for the nodal basis)."""
    if basis == "nodal":
        return None
    if basis == "chebyshev":
        return chebyshev.chebvander(2 * grid.nodes / grid.b - 1, (n_basis or 20) - 1)
    if basis == "hat":
        m = n_basis or 32
        knots = np.linspace(0, grid.b, m + 1)
        eye = np.eye(m + 1)
        return np.stack([np.interp(grid.nodes, knots, eye[j]) for j in range(m + 1)], axis=1)
    if basis == "fourier":
        if modes is None:
            raise ContractViolation("the Fourier basis needs the contour modes")
        return fourier_rows(modes, grid).conj().T / grid.b
    raise ContractViolation(f"unknown basis {basis!r}; expected one of {BASES}")


def invert_direct(system: InversionSystem, basis: str = "chebyshev", n_basis: int | None = None,
                  lam: float | None = None) -> PhiSolution:
    """Tikhonov least squares: min ||K phi - p||^2 + lam ||phi||^2 with phi in a basis.

    Norms on phi are the Simpson-weighted L2(0, b) norm. ``lam`` defaults to
    ``1e-10 * ||K||^2``. With ``basis="nodal"`` every node value is an unknown
    and the dual (row-space) form is solved instead.
    """
    K = system.Kmat
    p = system.p
    w = system.grid.weights
    if lam is None:
        lam = 1e-10 * system.diagnostics.get("K_norm", weighted_norm(system.kernel, system.grid)) ** 2
    modes = None if system.contour is None else system.contour.modes
    P = basis_matrix(basis, system.grid, n_basis, modes)
    if not np.any(p):
        return PhiSolution(np.zeros(system.grid.size, dtype=complex), "direct", basis)
    if P is None:
        gram = (K / w) @ K.conj().T + lam * np.eye(K.shape[0])
        y, _ = solve_dense(gram, p)
        phi = (K.conj().T @ y) / w
        return PhiSolution(phi, "direct", basis)
    return PhiSolution(P @ _tikhonov(K @ P, p, np.sqrt(w)[:, None] * P, lam), "direct", basis)


def _tikhonov(A, p, L, lam):
    """argmin ||A c - p||^2 + lam ||L c||^2 via the stacked system (no squared condition)."""
    stacked = np.vstack([A, np.sqrt(lam) * L])
    rhs = np.concatenate([p, np.zeros(L.shape[0], dtype=complex)])
    c, _, rank, _ = scipy.linalg.lstsq(stacked, rhs)
    if rank < A.shape[1]:
        raise NumericallySingular(f"least-squares system is rank deficient ({rank} < {A.shape[1]})")
    return c


# --- reconstruction --------------------------------------------------------------


METHODS = ("direct", "neumann", "fourier_special", "real_axis")


@dataclass(frozen=True)
class InversionConfig:
    """Inversion settings.

    ``method="real_axis"`` skips the complex contour and fits the data
    identities at the real wavenumbers ``k_real`` (for example the grid of
    extracted series) with the direct solver.
    """

    xi: float | str = "auto"
    M: int = 64
    method: str = "direct"
    use_F: bool = True
    basis: str = "chebyshev"
    n_basis: int | None = 20
    lam: float | None = None
    neumann_max_terms: int = 500
    neumann_tol: float = 1e-14
    force_neumann: bool = False
    k_real: tuple | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ContractViolation(f"unknown inversion method {self.method!r}; expected one of {METHODS}")
        if self.method == "real_axis" and not self.k_real:
            raise ContractViolation("method 'real_axis' needs k_real")
        if self.basis not in BASES:
            raise ContractViolation(f"unknown basis {self.basis!r}")
        if not (self.xi == "auto" or (isinstance(self.xi, (int, float)) and self.xi > 0)):
            raise ContractViolation("xi must be 'auto' or a positive number")
        if self.M < 0:
            raise ContractViolation("M must be >= 0")


@dataclass(frozen=True)
class ReconstructionResult:
    n: int
    x: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)
    q_imag: np.ndarray = field(repr=False)
    imag_residual: float
    linear_residual: float
    relative_residual: float
    xi: float
    M: int
    method: str
    basis: str | None
    diagnostics: dict = field(default_factory=dict)

    def as_coefficient(self, b) -> CoefficientFunction:
        return CoefficientFunction.tabulated(self.x, self.q, b)


def choose_xi(n, b, q0_l1, method: str = "neumann") -> float:
    """Default contour height.

    The Neumann series needs xi > xi0, so it gets max(2 xi0, 1/b). The other
    solvers need no contraction and take 1/b: every extra unit of xi costs a
    factor exp(xi (n+1) b) in the final unweighting.
    """
    if method == "neumann":
        return max(2 * find_xi0(n, b, q0_l1), 1.0 / b)
    return 1.0 / b


MAX_AMPLIFICATION = 1e8
MAX_KH = 0.1


def recover_q(d: DataSetDn, grid: SpatialGrid, config: InversionConfig = InversionConfig()
              ) -> ReconstructionResult:
    """Recover q_{n-1} on the grid nodes: choose xi, build K and p, invert, unweight."""
    if config.method == "real_axis":
        system = build_real_system(d, grid, config.k_real, config.use_F)
        sol = invert_direct(system, config.basis, config.n_basis, config.lam)
        return _finish(d, grid, config, system, sol, 0.0, 0, 1.0)
    q0_l1 = d.q0.l1_norm(grid)
    xi = choose_xi(d.n, d.b, q0_l1, config.method) if config.xi == "auto" else float(config.xi)
    power = d.n + 1 if config.use_F else d.n - 1
    amplification = float(np.exp(xi * power * d.b))
    if amplification > MAX_AMPLIFICATION:
        warnings.warn(
            f"contour weight amplifies errors by exp(xi*{power}*b) = {amplification:.2e}; "
            "expect lost digits, lower xi", PoorReconstructionWarning, stacklevel=2)
    contour = ContourGrid(xi, d.n, d.b, config.M, power)
    system = build_system(d, grid, contour, config.use_F)
    if system.diagnostics["max_kh"] > MAX_KH:
        warnings.warn(
            f"largest contour |k| times the grid step is {system.diagnostics['max_kh']:.3f}; "
            "RK4 data there carry O((kh)^4) errors, refine the grid or lower M",
            PoorReconstructionWarning, stacklevel=2)

    if config.method == "neumann":
        sol = invert_neumann(system, config.neumann_max_terms, config.neumann_tol, config.force_neumann)
    elif config.method == "direct":
        sol = invert_direct(system, config.basis, config.n_basis, config.lam)
    else:
        if not d.q0.is_zero:
            raise ContractViolation("fourier_special inversion needs q_0 = 0 (then K = K0)")
        sol = PhiSolution(system.K0_inverse(system.p), "fourier_special")
    return _finish(d, grid, config, system, sol, xi, power, amplification)


def _finish(d, grid, config, system, sol, xi, power, amplification):
    phi = sol.phi
    q_raw = np.exp(-xi * power * grid.nodes) * phi
    residual = float(np.linalg.norm(system.apply(phi) - system.p))
    p_norm = float(np.linalg.norm(system.p))
    q = q_raw.real.copy()
    imag = float(np.max(np.abs(q_raw.imag)))
    q_scale = float(np.max(np.abs(q)))
    if imag > 0.05 * q_scale and imag > 0:
        warnings.warn(
            f"reconstruction poorly resolved (max |Im q| = {imag:.3g} vs max |q| = {q_scale:.3g}); "
            "increase M or k coverage", PoorReconstructionWarning, stacklevel=2)
    diagnostics = dict(system.diagnostics)
    diagnostics.update(terms=sol.terms, term_ratios=list(sol.term_ratios), amplification=amplification)
    return ReconstructionResult(
        n=d.n, x=grid.nodes.copy(), q=q, q_imag=q_raw.imag.copy(), imag_residual=imag,
        linear_residual=residual, relative_residual=residual / p_norm if p_norm else 0.0,
        xi=xi, M=config.M if system.contour is not None else 0,
        method="real_axis" if system.contour is None else sol.method,
        basis=sol.basis if sol.method == "direct" else None,
        diagnostics=diagnostics,
    )


def recover_all(model, q0: CoefficientFunction, n_target: int, grid: SpatialGrid,
                config: InversionConfig = InversionConfig()) -> list:
    """Recover q_1 ... q_{n_target - 1} in turn, feeding each into the next h_n."""
    if n_target < 2:
        raise ContractViolation("n_target must be >= 2")
    known = [q0]
    results = []
    for n in range(2, n_target + 1):
        d = DataSetDn.from_model(model, n, known, grid.b)
        try:
            res = recover_q(d, grid, config)
        except Exception as exc:
            exc.args = (f"order n={n}: {exc}",) + exc.args[1:]
            raise
        results.append(res)
        known.append(res.as_coefficient(grid.b))
    return results


# --- the pure-q2 special case ------------------------------------------------------


def _gauss_panels(lo, hi, width, points):
    nodes, weights = np.polynomial.legendre.leggauss(points)
    edges = np.linspace(lo, hi, max(1, int(np.ceil((hi - lo) / width))) + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * np.diff(edges)[:, None]
    return (mid + half * nodes).ravel(), (half * weights).ravel()


def fourier_invert_special(amplitude, b: float, x, which: str = "A", route: str = "integral",
                           k_cutoff: float = 200.0, xi: float | None = None, M: int = 64,
                           points_per_panel: int = 16) -> np.ndarray:
    """q_2 on ``x`` from A_3 (or B_3) when q_0 = q_1 = 0.

    ``route="integral"`` evaluates
    q_2(x) = (4i/pi) int k A_3(k) exp(4ikx) dk = -(2i/pi) int k B_3(k) exp(2ikx) dk
    over [-k_cutoff, k_cutoff] with panel Gauss-Legendre quadrature.
    ``route="series"`` sums the contour Fourier series over |m| <= M; the
    A_3 form uses k_m = pi m / (2b) + i xi, the B_3 form k_m = pi m / b + i xi.
    """
    if which not in ("A", "B"):
        raise ContractViolation("which must be 'A' or 'B'")
    x = np.asarray(x, dtype=float)
    freq = 4.0 if which == "A" else 2.0
    if route == "integral":
        panel = min(1.0, np.pi / (freq * b))
        k, wk = _gauss_panels(-k_cutoff, k_cutoff, panel, points_per_panel)
        fk = k * np.asarray(amplitude(k)) * wk
        pref = 4j / np.pi if which == "A" else -2j / np.pi
        out = np.empty(x.shape, dtype=complex)
        flat = x.ravel()
        res = out.reshape(-1)
        for s in range(0, flat.size, 256):
            chunk = flat[s:s + 256]
            res[s:s + 256] = np.exp(1j * freq * np.outer(chunk, k)) @ fk
        return (pref * out).real
    if route == "series":
        xi = 0.01 / b if xi is None else xi
        if not xi > 0:
            raise ContractViolation("xi must be positive")
        m = np.arange(-M, M + 1)
        k_m = 2 * np.pi * m / (freq * b) + 1j * xi
        amp = np.asarray(amplitude(k_m))
        p = 2j * k_m * amp if which == "A" else -2j * k_m * amp
        synth = np.exp(2j * np.pi * np.outer(x.ravel(), m) / b) @ p / b
        return (np.exp(-xi * freq * x.ravel()) * synth).real.reshape(x.shape)
    raise ContractViolation(f"unknown route {route!r}; expected 'integral' or 'series'")
