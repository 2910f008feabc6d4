"""Closed-form third-order amplitudes for the pure cubic potential Q = q_2(x) u^2.

With q_0 = q_1 = 0 the cascade collapses: u_1 = exp(-ikx), u_2 = 0, and

    A_3(k) =  (1/2ik) int_0^b q_2(t) exp(-4ikt) dt,
    B_3(k) = -(1/2ik) int_0^b q_2(t) exp(-2ikt) dt.

Two coefficient shapes have elementary integrals: a constant q_2 = gamma and an
exponential q_2 = exp(alpha x). The functions below accept complex k.
"""

import numpy as np

from .potential import CoefficientFunction, NonlinearPotential

EXAMPLES = ("constant_gamma", "exponential_alpha")


def constant_A3(k, gamma, b):
    k = np.asarray(k, dtype=complex)
    return -(gamma / (8 * k**2)) * (1 - np.exp(-4j * k * b))


def constant_B3(k, gamma, b):
    k = np.asarray(k, dtype=complex)
    return (gamma / (4 * k**2)) * (1 - np.exp(-2j * k * b))


def exponential_A3(k, alpha, b):
    k = np.asarray(k, dtype=complex)
    z = alpha - 4j * k
    return np.expm1(z * b) / (2j * k * z)


def exponential_B3(k, alpha, b):
    k = np.asarray(k, dtype=complex)
    z = alpha - 2j * k
    return -np.expm1(z * b) / (2j * k * z)


def example_functions(name, param, b):
    """(A_3, B_3, q_2) callables for a named example."""
    if name == "constant_gamma":
        return (lambda k: constant_A3(k, param, b), lambda k: constant_B3(k, param, b),
                CoefficientFunction.constant(param, b))
    if name == "exponential_alpha":
        return (lambda k: exponential_A3(k, param, b), lambda k: exponential_B3(k, param, b),
                CoefficientFunction.exponential(param, b))
    raise KeyError(f"unknown example {name!r}; valid names: {', '.join(EXAMPLES)}")


def example_potential(name, param, b) -> NonlinearPotential:
    q2 = example_functions(name, param, b)[2]
    return NonlinearPotential.from_coeffs(b, [None, None, q2])
