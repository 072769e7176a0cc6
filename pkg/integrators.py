"""Implicit time stepping for the semi-discrete system u_t = i (L u + N(u)).

Crank-Nicolson and the 2-stage Gauss method. The tau rows of the spatial
operator replace the corresponding rows of every step matrix; step
matrices are LU-factored once per workspace and reused for every step.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from multidomain import CompositeOperator

logger = logging.getLogger("ced-schrodinger")

# Iteration counts above this per step usually mean the step is too large.
ITERATION_WARNING = 30


class Scheme(str, Enum):
    """Time integration schemes."""

    CN = "cn"
    IRK4 = "irk4"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"Unknown scheme '{value}' (expected one of: cn, irk4)") from None


class StepFailure(RuntimeError):
    """A time step did not converge or hit a singular system."""

    def __init__(self, message: str, step: Optional[int] = None, iterations: int = 0,
                 last_change: float = math.nan, location=None):
        super().__init__(message)
        self.step = step
        self.iterations = iterations
        self.last_change = last_change
        self.location = location

    def diagnostics(self) -> dict:
        return {
            "message": str(self),
            "step": self.step,
            "iterations": self.iterations,
            "last_change": self.last_change,
            "location": self.location,
        }


@dataclass
class SchemeConfig:
    """Time stepping settings."""

    scheme: Scheme = Scheme.CN
    h: float = 1e-3
    n_steps: int = 1000
    fp_tolerance: float = 1e-8
    fp_max_iters: int = 200

    def __post_init__(self):
        self.scheme = Scheme.parse(self.scheme)
        if not self.h > 0:
            raise ValueError(f"Time step must be positive, got {self.h}")
        if self.n_steps < 0:
            raise ValueError(f"Step count must be >= 0, got {self.n_steps}")
        if not self.fp_tolerance > 0:
            raise ValueError(f"Fixed-point tolerance must be positive, got {self.fp_tolerance}")
        if self.fp_max_iters < 1:
            raise ValueError(f"fp_max_iters must be >= 1, got {self.fp_max_iters}")

    @classmethod
    def for_final_time(cls, scheme, final_time: float, n_steps: int, **kwargs) -> "SchemeConfig":
        if n_steps < 1:
            raise ValueError(f"Step count must be >= 1, got {n_steps}")
        return cls(scheme=scheme, h=final_time / n_steps, n_steps=n_steps, **kwargs)

    @property
    def final_time(self) -> float:
        return self.h * self.n_steps


@dataclass(frozen=True)
class ButcherTableau:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray


_R3 = math.sqrt(3.0)

GAUSS2 = ButcherTableau(
    a=np.array([[0.25, 0.25 - _R3 / 6.0], [0.25 + _R3 / 6.0, 0.25]]),
    b=np.array([0.5, 0.5]),
    c=np.array([0.5 - _R3 / 6.0, 0.5 + _R3 / 6.0]),
)


class CubicNonlinearity:
    """N(u) = -2 rho |u|^2 u; rho = -1 is focusing."""

    def __init__(self, rho: int = -1):
        if rho not in (1, -1):
            raise ValueError(f"rho must be +1 or -1, got {rho}")
        self.rho = rho

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return -2.0 * self.rho * (np.abs(u) ** 2) * u

    def __repr__(self):
        return f"CubicNonlinearity(rho={self.rho})"


@dataclass
class IterationStats:
    """Fixed-point iteration counts over accepted steps."""

    steps: int = 0
    total: int = 0
    max: int = 0

    def record(self, iterations: int) -> None:
        self.steps += 1
        self.total += iterations
        self.max = max(self.max, iterations)

    @property
    def mean(self) -> float:
        return self.total / self.steps if self.steps else 0.0

    def as_dict(self) -> dict:
        return {"steps": self.steps, "mean": self.mean, "max": self.max}


@dataclass
class StepWorkspace:
    """Prefactored step matrix and everything a step needs."""

    operator: CompositeOperator
    config: SchemeConfig
    nonlinearity: Optional[Callable] = None
    lu: tuple = None
    tableau: ButcherTableau = GAUSS2
    stats: IterationStats = field(default_factory=IterationStats)

    @property
    def h(self) -> float:
        return self.config.h


def build_workspace(operator: CompositeOperator, config: SchemeConfig,
                    nonlinearity: Optional[Callable] = None) -> StepWorkspace:
    """Factor the step matrix of the configured scheme.

    CN uses 1 - i h L / 2. Gauss uses 1 - i h a_11 L, which also serves the
    second stage since a_11 = a_22.
    """
    h = config.h
    if config.scheme == Scheme.CN:
        alpha = 0.5j * h
    else:
        alpha = 1j * h * GAUSS2.a[0, 0]
    identity = np.eye(operator.size, dtype=complex)
    step_matrix = operator.substitute(identity - alpha * operator.matrix)
    lu = lu_factor(step_matrix)
    logger.debug(f"Factored {config.scheme.value} step matrix of size {operator.size} (h={h:g})")
    return StepWorkspace(operator, config, nonlinearity, lu, GAUSS2)


def cn_step(u_n: np.ndarray, ws: StepWorkspace, nonlinearity=None, step: Optional[int] = None) -> np.ndarray:
    """One Crank-Nicolson step.

    Linear problems take a single solve. With a nonlinearity the implicit
    part is iterated until consecutive iterates differ by less than
    fp_tolerance in the max-norm.
    """
    nonlinearity = nonlinearity or ws.nonlinearity
    op = ws.operator
    half = 0.5j * ws.h
    base = u_n + half * op.apply(u_n)

    if nonlinearity is None:
        ws.stats.record(1)
        return lu_solve(ws.lu, op.tau_rhs(base))

    n_old = nonlinearity(u_n)
    current = u_n
    change = math.inf
    for iteration in range(1, ws.config.fp_max_iters + 1):
        rhs = op.tau_rhs(base + half * (nonlinearity(current) + n_old))
        updated = lu_solve(ws.lu, rhs)
        change = float(np.max(np.abs(updated - current)))
        current = updated
        if not np.isfinite(change):
            break
        if change < ws.config.fp_tolerance:
            _record(ws, iteration, step)
            return current
    raise StepFailure(
        f"CN fixed point did not converge (last change {change:.3e})",
        step=step, iterations=iteration, last_change=change,
    )


def irk4_step(u_n: np.ndarray, ws: StepWorkspace, nonlinearity=None, step: Optional[int] = None) -> np.ndarray:
    """One step of the 2-stage Gauss method.

    The stage equations are swept Gauss-Seidel style: each stage solves its
    prefactored system with the other stage and the nonlinearity frozen.
    Iterates also in the linear case.
    """
    nonlinearity = nonlinearity or ws.nonlinearity
    op = ws.operator
    h = ws.h
    a = ws.tableau.a
    b = ws.tableau.b

    def n_of(y):
        return nonlinearity(y) if nonlinearity is not None else 0.0

    lu_u = op.apply(u_n)
    k1 = 1j * (lu_u + n_of(u_n))
    k2 = k1.copy()
    change = math.inf
    for iteration in range(1, ws.config.fp_max_iters + 1):
        y1 = u_n + h * (a[0, 0] * k1 + a[0, 1] * k2)
        rhs1 = 1j * (lu_u + h * a[0, 1] * op.apply(k2) + n_of(y1))
        k1_new = lu_solve(ws.lu, op.zero_tau_entries(rhs1))

        y2 = u_n + h * (a[1, 0] * k1_new + a[1, 1] * k2)
        rhs2 = 1j * (lu_u + h * a[1, 0] * op.apply(k1_new) + n_of(y2))
        k2_new = lu_solve(ws.lu, op.zero_tau_entries(rhs2))

        change = float(max(np.max(np.abs(k1_new - k1)), np.max(np.abs(k2_new - k2))))
        k1, k2 = k1_new, k2_new
        if not np.isfinite(change):
            break
        if change < ws.config.fp_tolerance:
            _record(ws, iteration, step)
            return u_n + h * (b[0] * k1 + b[1] * k2)
    raise StepFailure(
        f"Gauss stage iteration did not converge (last change {change:.3e})",
        step=step, iterations=iteration, last_change=change,
    )


def _record(ws: StepWorkspace, iterations: int, step: Optional[int]) -> None:
    ws.stats.record(iterations)
    if iterations > ITERATION_WARNING:
        logger.warning(f"Step {step}: {iterations} iterations to converge")
    else:
        logger.debug(f"Step {step}: converged in {iterations} iterations")


def scheme_step(ws: StepWorkspace) -> Callable:
    """The step function for the workspace's scheme."""
    return cn_step if ws.config.scheme == Scheme.CN else irk4_step


@dataclass
class PropagationResult:
    final: np.ndarray
    steps_done: int
    samples: int
    stats: IterationStats


def propagate(u0: np.ndarray, ws: StepWorkspace, observers: Iterable[Callable] = (),
              stride: int = 1, step_fn: Optional[Callable] = None) -> PropagationResult:
    """Advance u0 through config.n_steps steps.

    Observers are called as observer(step, t, u) at step 0, every `stride`
    steps and at the last step. A StepFailure is re-raised after tagging it
    with the failing step number.
    """
    if stride < 1:
        raise ValueError(f"Observer stride must be >= 1, got {stride}")
    observers = list(observers)
    step_fn = step_fn or scheme_step(ws)
    n_steps = ws.config.n_steps
    h = ws.h

    def notify(n, u):
        for observer in observers:
            observer(n, n * h, u)

    u = np.asarray(u0, dtype=complex)
    notify(0, u)
    samples = 1
    for n in range(1, n_steps + 1):
        try:
            u = step_fn(u, ws, step=n)
        except StepFailure as exc:
            if exc.step is None:
                exc.step = n
            logger.error(f"Step {n} failed: {exc}")
            raise
        if n % stride == 0 or n == n_steps:
            notify(n, u)
            samples += 1
    return PropagationResult(u, n_steps, samples, ws.stats)
