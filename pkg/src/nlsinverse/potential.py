"""Truncated nonlinear potentials Q(x, u) = sum_n q_n(x) u**n on [0, b]."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractViolation
from .numerics import SpatialGrid, quad

KINDS = ("zero", "constant", "exponential", "sinusoid", "tabulated")


@dataclass(frozen=True)
class CoefficientFunction:
    """One real coefficient q_n(x), supported on [0, b].

    Parameters
    ----------
    kind : str
        ``"zero"``, ``"constant"`` (``value``), ``"exponential"``
        (``amplitude * exp(rate * x)``), ``"sinusoid"``
        (``amplitude * sin(frequency * x)``, frequency in radians per unit
        length) or ``"tabulated"`` (``samples`` on ``nodes``, linearly
        interpolated).
    b : float
        Support width.
    """

    kind: str
    b: float
    value: float = 0.0
    amplitude: float = 1.0
    rate: float = 0.0
    frequency: float = 0.0
    nodes: np.ndarray | None = field(default=None, repr=False, compare=False)
    samples: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown coefficient kind {self.kind!r}; expected one of {KINDS}")
        if not self.b > 0:
            raise ContractViolation("support width must be positive")
        if self.kind == "tabulated":
            if self.nodes is None or self.samples is None:
                raise ContractViolation("tabulated coefficient needs nodes and samples")
            nodes = np.asarray(self.nodes, dtype=float)
            samples = np.asarray(self.samples)
            if nodes.shape != samples.shape or nodes.ndim != 1 or nodes.size < 2:
                raise ContractViolation("tabulated nodes and samples must be matching 1-D arrays")
            if not np.all(np.diff(nodes) > 0):
                raise ContractViolation("tabulated nodes must be strictly increasing")
            if not np.all(np.isfinite(samples)):
                raise ContractViolation("tabulated samples must be finite")
            object.__setattr__(self, "nodes", nodes)
            object.__setattr__(self, "samples", samples)

    # constructors ---------------------------------------------------------
    @classmethod
    def zero(cls, b):
        return cls("zero", b)

    @classmethod
    def constant(cls, value, b):
        return cls("constant", b, value=float(value))

    @classmethod
    def exponential(cls, rate, b, amplitude=1.0):
        return cls("exponential", b, rate=float(rate), amplitude=float(amplitude))

    @classmethod
    def sinusoid(cls, amplitude, frequency, b):
        return cls("sinusoid", b, amplitude=float(amplitude), frequency=float(frequency))

    @classmethod
    def tabulated(cls, grid_or_nodes, samples, b=None):
        if isinstance(grid_or_nodes, SpatialGrid):
            nodes, b = grid_or_nodes.nodes, grid_or_nodes.b
        else:
            nodes = np.asarray(grid_or_nodes, dtype=float)
            b = float(nodes[-1]) if b is None else b
        return cls("tabulated", b, nodes=nodes, samples=np.asarray(samples))

    # evaluation -------------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        if self.kind == "zero":
            return True
        if self.kind == "constant":
            return self.value == 0
        if self.kind in ("exponential", "sinusoid"):
            return self.amplitude == 0 or (self.kind == "sinusoid" and self.frequency == 0)
        return not np.any(self.samples)

    def _inside(self, x):
        return np.where((x >= 0) & (x <= self.b), 1.0, 0.0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "constant":
            inner = np.full_like(x, self.value)
        elif self.kind == "exponential":
            inner = self.amplitude * np.exp(self.rate * np.clip(x, 0.0, self.b))
        elif self.kind == "sinusoid":
            inner = self.amplitude * np.sin(self.frequency * x)
        else:
            inner = np.interp(x, self.nodes, self.samples)
        return inner * self._inside(x)

    def sup_norm(self) -> float:
        """sup over [0, b] of |q|."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return abs(self.value)
        if self.kind == "exponential":
            return abs(self.amplitude) * max(1.0, float(np.exp(self.rate * self.b)))
        if self.kind == "sinusoid":
            w = abs(self.frequency) * self.b
            peak = 1.0 if w >= np.pi / 2 else abs(np.sin(w))
            return abs(self.amplitude) * peak
        inside = (self.nodes >= 0) & (self.nodes <= self.b)
        return float(np.max(np.abs(self.samples[inside]), initial=0.0))

    def l1_norm(self, grid: SpatialGrid | None = None) -> float:
        """The integral of |q| over [0, b]."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return abs(self.value) * self.b
        if self.kind == "exponential" and self.rate != 0:
            return abs(self.amplitude) * abs(np.expm1(self.rate * self.b) / self.rate)
        grid = grid or SpatialGrid.for_width(self.b)
        return float(quad(np.abs(self(grid.nodes)), grid))

    def describe(self) -> dict:
        """Serializable parameters (tabulated samples are not included)."""
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "exponential":
            return {"kind": "exponential", "rate": self.rate, "amplitude": self.amplitude}
        if self.kind == "sinusoid":
            return {"kind": "sinusoid", "amplitude": self.amplitude, "frequency": self.frequency}
        if self.kind == "tabulated":
            return {"kind": "tabulated", "nodes": len(self.nodes)}
        return {"kind": "zero"}


@dataclass(frozen=True)
class NonlinearPotential:
    """Q(x, u) = sum_{n=0}^{D} q_n(x) u**n with every q_n supported on [0, b]."""

    b: float
    coeffs: tuple

    def __post_init__(self):
        coeffs = tuple(self.coeffs)
        if not coeffs:
            raise ContractViolation("a potential needs at least q0")
        for n, c in enumerate(coeffs):
            if not isinstance(c, CoefficientFunction):
                raise ContractViolation(f"q{n} is not a CoefficientFunction")
            if not np.isclose(c.b, self.b, rtol=1e-12, atol=0):
                raise ContractViolation(f"q{n} has support width {c.b}, potential has {self.b}")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_coeffs(cls, b: float, coeffs: Sequence[CoefficientFunction | None]):
        return cls(b, tuple(CoefficientFunction.zero(b) if c is None else c for c in coeffs))

    @classmethod
    def zero(cls, b: float, degree: int = 0):
        return cls(b, tuple(CoefficientFunction.zero(b) for _ in range(degree + 1)))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def q(self, n: int) -> CoefficientFunction:
        """q_n, or the zero function beyond the truncation degree."""
        if n < 0:
            raise ContractViolation("coefficient index must be >= 0")
        return self.coeffs[n] if n <= self.degree else CoefficientFunction.zero(self.b)

    def coefficient_values(self, x) -> list:
        return [c(x) for c in self.coeffs]

    def with_coeff(self, n: int, coeff: CoefficientFunction) -> NonlinearPotential:
        coeffs = list(self.coeffs) + [CoefficientFunction.zero(self.b)] * max(0, n - self.degree)
        coeffs[n] = coeff
        return NonlinearPotential(self.b, tuple(coeffs))

    def truncated(self, degree: int) -> NonlinearPotential:
        return NonlinearPotential(self.b, tuple(self.q(n) for n in range(degree + 1)))


class HalfStepTable:
    """Coefficient values cached on the grid nodes and the RK4 midpoints.

    Called with an x that is a node or a midpoint of ``grid``; returns the list
    of coefficient values there.
    """

    def __init__(self, coeffs, grid: SpatialGrid):
        self.inv_half = 2.0 / grid.step
        x = np.linspace(0.0, grid.b, 2 * grid.n_intervals + 1)
        self.table = [np.asarray(c(x)) for c in coeffs]

    def __call__(self, x):
        i = int(round(x * self.inv_half))
        return [t[i] for t in self.table]


def horner(coeff_values, u):
    """sum_n c_n u**n by Horner's rule; ``coeff_values`` broadcast against ``u``."""
    acc = np.zeros(np.broadcast_shapes(np.shape(u), np.shape(coeff_values[-1])), dtype=complex)
    for c in reversed(coeff_values):
        acc = acc * u + c
    return acc


def eval_Q(p: NonlinearPotential, x, u):
    """Q(x, u); identically zero for x outside [0, b]."""
    x = np.asarray(x, dtype=float)
    return horner(p.coefficient_values(x), np.asarray(u))


def sup_bound(p: NonlinearPotential, r: float) -> float:
    """An upper bound C for |Q(x, u)| over x in [0, b] and |u| <= r."""
    if not r > 0:
        raise ContractViolation("amplitude bound r must be positive")
    return float(sum(c.sup_norm() * r**n for n, c in enumerate(p.coeffs)))


@dataclass(frozen=True)
class ExistenceEstimate:
    r: float
    C: float
    delta: float


def epsilon_bound(p: NonlinearPotential, r: float = 1.0) -> ExistenceEstimate:
    """Admissible incident amplitude delta = (r/2) exp(-C b**2)."""
    C = sup_bound(p, r)
    return ExistenceEstimate(r=r, C=C, delta=0.5 * r * float(np.exp(-C * p.b**2)))
