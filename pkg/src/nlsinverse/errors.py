"""Exception and warning types shared across the package."""


class ScatteringError(Exception):
    """Base class for every error raised by :mod:`nlsinverse`."""


class ContractViolation(ScatteringError, ValueError):
    """An argument violates an operation's precondition."""


class TrajectoryBlowUp(ScatteringError, FloatingPointError):
    """A non-finite value appeared while integrating an initial value problem."""

    def __init__(self, node_index, message=None):
        self.node_index = node_index
        super().__init__(message or f"trajectory blow-up at node {node_index}")


class NumericallySingular(ScatteringError, ArithmeticError):
    """A dense system has a pivot below the singularity threshold."""


class PicardDivergence(ScatteringError):
    """Picard iteration did not reach the requested tolerance."""

    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"Picard did not converge after {iterations} iterations "
            f"(last residual {residual:.3e})"
        )


class IllConditionedExtraction(ScatteringError):
    """The epsilon Vandermonde system is too ill-conditioned to fit."""


class ConsistencyError(ScatteringError):
    """Two routes to the same quantity disagree beyond tolerance."""


class NearBoundState(ScatteringError):
    """|B1(k)| is too small: k sits near a bound state or resonance."""


class NeumannNotGuaranteed(ScatteringError):
    """The contraction estimate does not guarantee Neumann convergence."""


class NeumannDivergence(ScatteringError):
    """The Neumann series was forced and its terms stopped shrinking."""


class EpsilonBoundWarning(UserWarning):
    """|epsilon| exceeds the sufficient existence bound delta."""


class PoorReconstructionWarning(UserWarning):
    """The recovered coefficient has a large imaginary part."""
