"""Equations, exact solutions, error norms and conserved functionals.

All equations are written as i u_t + u_xx + V u = 0. The cubic case uses
V = -2 rho |u|^2, so rho = -1 (focusing) gives V = 2 |u|^2.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from integrators import CubicNonlinearity
from multidomain import (
    CompositeField,
    Decomposition,
    physical_derivative,
    sample_function,
    whole_line_integral,
    whole_line_l2,
)

logger = logging.getLogger("ced-schrodinger")


class PotentialKind(str, Enum):
    ZERO = "zero"
    CUBIC = "cubic"
    EXTERNAL = "external"


@dataclass(frozen=True)
class PotentialSpec:
    """Which V enters the equation."""

    kind: PotentialKind = PotentialKind.ZERO
    rho: int = -1
    function: Optional[Callable] = None

    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls(PotentialKind.ZERO)

    @classmethod
    def cubic(cls, rho: int = -1) -> "PotentialSpec":
        if rho not in (1, -1):
            raise ValueError(f"rho must be +1 or -1, got {rho}")
        return cls(PotentialKind.CUBIC, rho)

    @classmethod
    def external(cls, function: Callable) -> "PotentialSpec":
        return cls(PotentialKind.EXTERNAL, function=function)

    @property
    def is_linear(self) -> bool:
        return self.kind != PotentialKind.CUBIC

    def diagonal(self, decomp: Decomposition) -> Optional[np.ndarray]:
        """x-dependent part of V on the nodes (None when there is none)."""
        if self.kind != PotentialKind.EXTERNAL:
            return None
        return sample_function(decomp, self.function, at_infinity=self.function)

    def nonlinearity(self) -> Optional[CubicNonlinearity]:
        return CubicNonlinearity(self.rho) if self.kind == PotentialKind.CUBIC else None


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form solution u(x, t) plus its limit at x = +-inf.

    far_field is None when the limit does not exist.
    """

    name: str
    evaluator: Callable
    far_field: Optional[Callable] = None
    decays: bool = True

    def __call__(self, x, t):
        return self.evaluator(np.asarray(x, dtype=float), t)

    def sample(self, decomp: Decomposition, t: float) -> CompositeField:
        at_infinity = None
        if self.far_field is not None:
            def at_infinity(x):
                return self.far_field(t)
        values = sample_function(decomp, lambda x: self.evaluator(x, t), at_infinity)
        return CompositeField(values, decomp)


def eval_gaussian(x, t):
    """Gaussian drifting right at speed 16 (free equation)."""
    x = np.asarray(x, dtype=float)
    z = 1.0 + 4.0j * t
    return np.exp(-(x**2 - 8.0j * x + 64.0j * t) / z) / np.sqrt(z)


def eval_soliton(x, t, a: float = 2.0, c: float = 15.0):
    """Focusing NLS soliton of height sqrt(a) moving at speed c."""
    if not a > 0:
        raise ValueError(f"Soliton parameter a must be positive, got {a}")
    x = np.asarray(x, dtype=float)
    ra = np.sqrt(a)
    with np.errstate(over="ignore"):
        sech = 1.0 / np.cosh(ra * (x - c * t))
    return ra * sech * np.exp(1j * (0.5 * c * x + (a - 0.25 * c**2) * t))


def eval_peregrine(x, t):
    """Peregrine breather on the unit background."""
    x = np.asarray(x, dtype=float)
    return (1.0 - 4.0 * (1.0 + 4.0j * t) / (1.0 + 4.0 * x**2 + 16.0 * t**2)) * np.exp(2.0j * t)


def gaussian_solution() -> ExactSolution:
    return ExactSolution("gaussian", eval_gaussian, lambda t: 0.0)


def soliton_solution(a: float = 2.0, c: float = 15.0) -> ExactSolution:
    return ExactSolution(f"soliton(a={a:g},c={c:g})", lambda x, t: eval_soliton(x, t, a, c), lambda t: 0.0)


def peregrine_solution() -> ExactSolution:
    return ExactSolution("peregrine", eval_peregrine, lambda t: np.exp(2.0j * t), decays=False)


def galilei_boost(solution: ExactSolution, c: float) -> ExactSolution:
    """u(x - c t, t) exp(i c x / 2 - i c^2 t / 4)."""
    c = float(c)
    if not np.isfinite(c):
        raise ValueError("Boost speed must be finite")
    if c == 0.0:
        return solution

    def boosted(x, t):
        x = np.asarray(x, dtype=float)
        return solution.evaluator(x - c * t, t) * np.exp(1j * (0.5 * c * x - 0.25 * c**2 * t))

    far_field = (lambda t: 0.0) if solution.decays else None
    return ExactSolution(f"{solution.name}+boost({c:g})", boosted, far_field, solution.decays)


def error_delta(field: CompositeField, reference: CompositeField, window: str = "whole_line") -> float:
    """||u - u_ex||_2 / ||u_ex||_2 over the window.

    Raises NonDecayingFieldError for references that are not square
    integrable on the window (Peregrine on the whole line).
    """
    denominator = whole_line_l2(reference, window)
    if not denominator > 0:
        raise ValueError("Reference field has vanishing L2 norm")
    diff = CompositeField(field.values - reference.values, field.decomposition)
    return float(np.sqrt(max(whole_line_l2(diff, window), 0.0) / denominator))


def error_delta_inf(field: CompositeField, reference: CompositeField) -> float:
    """Max-norm error over all nodes relative to the reference max-norm."""
    scale = float(np.max(np.abs(reference.values)))
    if not scale > 0:
        raise ValueError("Reference field vanishes identically")
    return float(np.max(np.abs(field.values - reference.values)) / scale)


def mass(field: CompositeField, window: str = "whole_line") -> float:
    """Integral of |u|^2 over the window."""
    return whole_line_l2(field, window)


def energy_functional(field: CompositeField) -> float:
    """E = 1/2 int |u_x|^2 - |u|^2 (|u|^2 - 1) dx, finite on a unit background."""
    u = field.values
    ux = physical_derivative(field.decomposition, u)
    density = np.abs(ux) ** 2 - np.abs(u) ** 2 * (np.abs(u) ** 2 - 1.0)
    return 0.5 * float(whole_line_integral(field.decomposition, density).real)


def perturbed_peregrine_initial(decomp: Decomposition, amplitude: float = 0.1) -> CompositeField:
    """Peregrine data at t = 0 plus amplitude * exp(-x^2)."""
    values = sample_function(
        decomp,
        lambda x: eval_peregrine(x, 0.0) + amplitude * np.exp(-(x**2)),
        at_infinity=lambda x: 1.0 + 0.0j,
    )
    return CompositeField(values, decomp)
