"""Transparent boundary conditions on a single window [x_l, x_r].

The window is one finite Chebyshev domain, node 0 at x_l and node N at
x_r, advanced with Crank-Nicolson. Dirichlet rows at both ends turn the
step matrix into L~; the boundary values are then fixed by a discrete
Dirichlet-to-Neumann relation:

- free equation: a half-order time-derivative convolution of the traces;
- cubic NLS: the same convolution applied to M1 of an auxiliary
  characteristic system driven by the boundary traces, iterated together
  with the CN relations.

g1 always denotes the outward normal derivative: du/dx at x_r, -du/dx at x_l.
"""

import cmath
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from cheb_core import diff_matrix
from config import BETA_RULES
from integrators import ITERATION_WARNING, IterationStats, Scheme, SchemeConfig, StepFailure
from multidomain import Decomposition, DomainError, MapKind, assemble

logger = logging.getLogger("ced-schrodinger")

PHASE = cmath.exp(-0.25j * cmath.pi)


def beta_sequence(n: int, rule: str = "printed") -> np.ndarray:
    """Convolution weights beta_0..beta_{n+1} of the discrete half derivative.

    "printed": beta_{k+2} = beta_k (1 - 1/(k+1)), which zeroes every even
    entry past beta_0. "series": Taylor coefficients of sqrt((1-z)/(1+z)),
    the exact Crank-Nicolson half derivative (1, -1, 1/2, -1/2, 3/8, ...).
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    beta = np.zeros(n + 2)
    beta[0], beta[1] = 1.0, -1.0
    if rule == "printed":
        for k in range(n):
            beta[k + 2] = beta[k] * (1.0 - 1.0 / (k + 1))
    elif rule == "series":
        for k in range(2, n + 2):
            if k % 2 == 0:
                beta[k] = beta[k - 2] * (k - 1) / k
            else:
                beta[k] = -beta[k - 1]
    else:
        raise ValueError(f"Unknown beta rule '{rule}' (expected one of: {', '.join(BETA_RULES)})")
    return beta


def dtn_factor(h: float) -> complex:
    """F = -exp(-i pi/4) sqrt(2/h)."""
    return -PHASE * math.sqrt(2.0 / h)


class _BetaCache:
    """Grows the beta sequence on demand."""

    def __init__(self, rule: str, n: int = 64):
        self.rule = rule
        self.values = beta_sequence(n, rule)

    def upto(self, k: int) -> np.ndarray:
        """beta_0..beta_k."""
        if k + 1 > self.values.size:
            self.values = beta_sequence(max(k, 2 * self.values.size), self.rule)
        return self.values[: k + 1]


@dataclass
class InfluenceDecomposition:
    """Boundary derivatives of a CN step as affine functions of the traces.

    With U = w + g0r phi_r + g0l phi_l the x-derivatives at the ends are
    d_r.U = u_r + gamma_rr g0r + gamma_rl g0l and
    d_l.U = u_l + gamma_lr g0r + gamma_ll g0l.
    """

    gamma_rr: complex
    gamma_rl: complex
    gamma_lr: complex
    gamma_ll: complex
    u_r: complex = 0.0
    u_l: complex = 0.0

    def derivatives(self, g0r: complex, g0l: complex) -> tuple[complex, complex]:
        right = self.u_r + self.gamma_rr * g0r + self.gamma_rl * g0l
        left = self.u_l + self.gamma_lr * g0r + self.gamma_ll * g0l
        return right, left

    def solve_traces(self, c_r, v_r, c_l, v_l, step=None) -> tuple[complex, complex]:
        """Traces with outward derivatives g1 = c g0 + v at both ends."""
        system = np.array(
            [[self.gamma_rr - c_r, self.gamma_rl], [self.gamma_lr, self.gamma_ll + c_l]],
            dtype=complex,
        )
        rhs = np.array([v_r - self.u_r, -v_l - self.u_l], dtype=complex)
        try:
            g0r, g0l = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError:
            raise StepFailure("Singular boundary system", step=step) from None
        return complex(g0r), complex(g0l)


@dataclass
class TbcWorkspace:
    """Dirichlet-substituted CN matrix of the window and its boundary responses."""

    decomposition: Decomposition
    config: SchemeConfig
    operator: np.ndarray
    lu: tuple
    phi_r: np.ndarray
    phi_l: np.ndarray
    d_r: np.ndarray
    d_l: np.ndarray
    influence: InfluenceDecomposition
    nonlinearity: Optional[object] = None
    beta_rule: str = "series"
    stats: IterationStats = field(default_factory=IterationStats)

    @property
    def h(self) -> float:
        return self.config.h

    @property
    def size(self) -> int:
        return self.operator.shape[0]

    def interior_solve(self, rhs: np.ndarray) -> np.ndarray:
        """L~^{-1} rhs with zero boundary data."""
        rhs = np.array(rhs, dtype=complex)
        rhs[0] = rhs[-1] = 0.0
        return lu_solve(self.lu, rhs)

    def with_interior(self, w: np.ndarray) -> InfluenceDecomposition:
        return replace(self.influence, u_r=complex(self.d_r @ w), u_l=complex(self.d_l @ w))

    def combine(self, w, g0r, g0l) -> np.ndarray:
        return w + g0r * self.phi_r + g0l * self.phi_l

    def outward_derivatives(self, u) -> tuple[complex, complex]:
        """(g1 at x_r, g1 at x_l)."""
        return complex(self.d_r @ u), complex(-(self.d_l @ u))

    def trace_rates(self, u) -> tuple[complex, complex]:
        """(u_t at x_r, u_t at x_l) from the equation evaluated on u."""
        rate = self.operator[[-1, 0], :] @ u
        if self.nonlinearity is not None:
            rate = rate + self.nonlinearity(np.asarray(u)[[-1, 0]])
        return complex(1j * rate[0]), complex(1j * rate[1])


def build_tbc_workspace(decomp: Decomposition, config: SchemeConfig, potential=None,
                        nonlinearity=None, beta_rule: str = "series") -> TbcWorkspace:
    if len(decomp.domains) != 1 or decomp.domains[0].kind != MapKind.FINITE:
        raise DomainError("Transparent boundaries need a single finite window")
    if config.scheme != Scheme.CN:
        raise ValueError("Transparent boundaries are only available with Crank-Nicolson")
    if beta_rule not in BETA_RULES:
        raise ValueError(f"Unknown beta rule '{beta_rule}'")
    domain = decomp.domains[0]
    n = domain.n_order
    operator = assemble(decomp, potential).matrix

    step_matrix = np.eye(n + 1, dtype=complex) - 0.5j * config.h * operator
    step_matrix[0, :] = 0.0
    step_matrix[-1, :] = 0.0
    step_matrix[0, 0] = step_matrix[-1, -1] = 1.0
    lu = lu_factor(step_matrix)

    unit = np.zeros(n + 1, dtype=complex)
    unit[-1] = 1.0
    phi_r = lu_solve(lu, unit)
    phi_l = lu_solve(lu, unit[::-1].copy())

    d = diff_matrix(n)
    jac = 2.0 / (domain.x_left - domain.x_right)
    d_r = jac * d[n, :]
    d_l = jac * d[0, :]
    influence = InfluenceDecomposition(
        gamma_rr=complex(d_r @ phi_r),
        gamma_rl=complex(d_r @ phi_l),
        gamma_lr=complex(d_l @ phi_r),
        gamma_ll=complex(d_l @ phi_l),
    )
    logger.debug(f"TBC workspace N={n} h={config.h:g} beta={beta_rule}")
    return TbcWorkspace(decomp, config, operator, lu, phi_r, phi_l, d_r, d_l, influence,
                        nonlinearity, beta_rule)


# --- free equation ----------------------------------------------------------


@dataclass
class TbcLinearState:
    """Dirichlet trace histories g0(t_0..t_n) at both ends."""

    g0l: list
    g0r: list
    h: float
    beta_rule: str = "series"
    _beta: _BetaCache = None

    def __post_init__(self):
        if self._beta is None:
            self._beta = _BetaCache(self.beta_rule)

    @classmethod
    def start(cls, u0, h: float, beta_rule: str = "series") -> "TbcLinearState":
        return cls([complex(u0[0])], [complex(u0[-1])], h, beta_rule)

    @property
    def F(self) -> complex:
        return dtn_factor(self.h)

    def betas(self, k: int) -> np.ndarray:
        """beta_0..beta_k under this state's rule."""
        return self._beta.upto(k)

    @property
    def steps_done(self) -> int:
        return len(self.g0r) - 1

    def history_terms(self) -> tuple[complex, complex]:
        """v_r, v_l: the k >= 1 part of the convolution for the next level."""
        n = self.steps_done
        beta = self.betas(n + 1)[1:]
        v_r = self.F * np.dot(beta, self.g0r[::-1])
        v_l = self.F * np.dot(beta, self.g0l[::-1])
        return complex(v_r), complex(v_l)


def tbc_linear_step(u_n: np.ndarray, state: TbcLinearState, ws: TbcWorkspace,
                    step: Optional[int] = None) -> tuple[np.ndarray, TbcLinearState]:
    """One CN step of the free equation with discrete transparent boundaries."""
    w = ws.interior_solve(u_n + 0.5j * ws.h * (ws.operator @ u_n))
    influence = ws.with_interior(w)
    v_r, v_l = state.history_terms()
    c = state.F * state.betas(0)[0]
    g0r, g0l = influence.solve_traces(c, v_r, c, v_l, step=step)
    state.g0r.append(g0r)
    state.g0l.append(g0l)
    ws.stats.record(1)
    return ws.combine(w, g0r, g0l), state


# --- cubic NLS --------------------------------------------------------------


def _ab(g0: complex, g1: complex, g0_t: complex, rho: int) -> tuple[complex, complex]:
    a = 1j * rho * (g0 * np.conj(g1)).imag
    b = 0.5j * (g0_t + 1j * rho * abs(g0) ** 2 * g0)
    return complex(a), complex(b)


@dataclass
class TbcNlsState:
    """Auxiliary functions on the current level of the characteristic grid.

    L1, L2, M1, M2 hold level n at s_m = -t_n + 2 h m, m = 0..n. Only the
    current level is kept; the previous-level coefficients a, b and the
    trace histories are all later levels need.
    """

    side: str
    rho: int
    h: float
    level: int
    L1: np.ndarray
    L2: np.ndarray
    M1: np.ndarray
    M2: np.ndarray
    g0: np.ndarray
    g1: np.ndarray
    a: complex
    b: complex
    beta_rule: str = "series"
    _beta: _BetaCache = None

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError(f"Boundary side must be 'left' or 'right', got {self.side!r}")
        if self._beta is None:
            self._beta = _BetaCache(self.beta_rule)

    def betas(self, k: int) -> np.ndarray:
        """beta_0..beta_k under this state's rule."""
        return self._beta.upto(k)

    @classmethod
    def start(cls, side: str, rho: int, h: float, g0: complex, g1: complex,
              beta_rule: str = "series", g0_t: complex = 0.0) -> "TbcNlsState":
        a, b = _ab(g0, g1, g0_t, rho)
        return cls(
            side=side, rho=rho, h=h, level=0,
            L1=np.array([0.5j * g1]), L2=np.zeros(1, dtype=complex),
            M1=np.array([g0], dtype=complex), M2=np.zeros(1, dtype=complex),
            g0=np.array([g0], dtype=complex), g1=np.array([g1], dtype=complex),
            a=a, b=b, beta_rule=beta_rule,
        )

    def corner_residuals(self) -> np.ndarray:
        """Deviation from the corner conditions at both ends of the level."""
        res = [
            self.L1[-1] - 0.5j * self.g1[-1],
            self.M1[-1] - self.g0[-1],
            self.L2[0],
            self.M2[0],
        ]
        if self.level > 0:
            res += [self.M1[0], self.L1[0]]
        return np.abs(np.array(res))

    def robin(self) -> tuple[complex, complex]:
        """(c, v) with g1 = c g0 + v from the discrete DtN relation."""
        n = self.level
        beta = self.betas(n)
        F = dtn_factor(self.h)
        c = self.M2[-1] + F * beta[0]
        v = F * np.dot(beta[1:], self.M1[::-1][1:])
        return complex(c), complex(v)


def nls_aux_advance(state: TbcNlsState, g0_new: complex, g1_new: complex,
                    g0_t: Optional[complex] = None) -> TbcNlsState:
    """Advance the auxiliary system one level with the given traces.

    g0_t is the time derivative of the trace at the new level; without it
    a backward difference of the trace history is used.

    Returns a new state; the input is left untouched so the fixed-point
    loop can retry with updated traces.
    """
    n = state.level
    h, rho = state.h, state.rho
    g0, g1 = complex(state.g0[-1]), complex(state.g1[-1])
    a_old, b_old = state.a, state.b
    if g0_t is None:
        g0_t = (g0_new - g0) / h
    a_new, b_new = _ab(g0_new, g1_new, g0_t, rho)

    L1 = np.zeros(n + 2, dtype=complex)
    L2 = np.zeros(n + 2, dtype=complex)
    M1 = np.zeros(n + 2, dtype=complex)
    M2 = np.zeros(n + 2, dtype=complex)

    # corner s = t
    L1[-1] = 0.5j * g1_new
    M1[-1] = g0_new
    # dM2/dt = 2 rho Im(g0 conj(g1)) = -2i a along s = t
    M2[-1] = state.M2[n] - 1j * h * (a_new + a_old)
    L2[-1] = state.L2[n] + 0.5 * h * (
        0.5 * rho * (abs(g1_new) ** 2 + abs(g1) ** 2)
        + rho * (np.conj(b_new) * g0_new + np.conj(b_old) * g0)
        - (a_new * M2[-1] + a_old * state.M2[n])
    )

    if n >= 1:
        q = 0.5 * h
        A = np.array([
            [1.0, -q * 1j * g1_new, -q * a_new, -q * b_new],
            [q * 1j * rho * np.conj(g1_new), 1.0, -q * rho * np.conj(b_new), q * a_new],
            [0.0, -2.0 * q * g0_new, 1.0, -q * 1j * g1_new],
            [-2.0 * q * rho * np.conj(g0_new), 0.0, q * 1j * rho * np.conj(g1_new), 1.0],
        ], dtype=complex)
        same = slice(1, n + 1)
        prev = slice(0, n)
        V = np.vstack([
            state.L1[same] + q * (1j * g1 * state.L2[same] + a_old * state.M1[same] + b_old * state.M2[same]),
            state.L2[prev] + q * (-1j * rho * np.conj(g1) * state.L1[prev]
                                  + rho * np.conj(b_old) * state.M1[prev] - a_old * state.M2[prev]),
            state.M1[same] + q * (2.0 * g0 * state.L2[same] + 1j * g1 * state.M2[same]),
            state.M2[prev] + q * (2.0 * rho * np.conj(g0) * state.L1[prev]
                                  - 1j * rho * np.conj(g1) * state.M1[prev]),
        ])
        try:
            X = np.linalg.solve(A, V)
        except np.linalg.LinAlgError:
            raise StepFailure(
                f"Singular auxiliary system at level {n + 1}", step=n + 1, location=(n + 1, 1)
            ) from None
        L1[same], L2[same], M1[same], M2[same] = X

    return replace(
        state, level=n + 1, L1=L1, L2=L2, M1=M1, M2=M2,
        g0=np.append(state.g0, g0_new), g1=np.append(state.g1, g1_new),
        a=a_new, b=b_new,
    )


def dtn_nls(state: TbcNlsState, boundary: str) -> complex:
    """Outward normal derivative g1 from the current level of the aux system."""
    if boundary != state.side:
        raise ValueError(f"State belongs to the {state.side} boundary, not {boundary}")
    c, v = state.robin()
    return c * complex(state.g0[-1]) + v


def tbc_nls_step(u_n: np.ndarray, state_l: TbcNlsState, state_r: TbcNlsState, ws: TbcWorkspace,
                 step: Optional[int] = None) -> tuple[np.ndarray, TbcNlsState, TbcNlsState]:
    """One CN step of cubic NLS with nonlinear transparent boundaries.

    CN relations, boundary traces and both auxiliary systems are iterated
    together until field and traces change by less than fp_tolerance.
    The returned states are advanced with the converged traces only.
    """
    nonlinearity = ws.nonlinearity
    if nonlinearity is None:
        raise ValueError("tbc_nls_step needs a cubic nonlinearity")
    half = 0.5j * ws.h
    base = u_n + half * (ws.operator @ u_n)
    n_old = nonlinearity(u_n)

    current = np.asarray(u_n, dtype=complex)
    g0r, g0l = complex(current[-1]), complex(current[0])
    g1r, g1l = complex(state_r.g1[-1]), complex(state_l.g1[-1])
    rate_r, rate_l = ws.trace_rates(current)
    change = math.inf
    tol = ws.config.fp_tolerance
    for iteration in range(1, ws.config.fp_max_iters + 1):
        w = ws.interior_solve(base + half * (nonlinearity(current) + n_old))
        influence = ws.with_interior(w)
        next_r = nls_aux_advance(state_r, g0r, g1r, rate_r)
        next_l = nls_aux_advance(state_l, g0l, g1l, rate_l)
        c_r, v_r = next_r.robin()
        c_l, v_l = next_l.robin()
        new_g0r, new_g0l = influence.solve_traces(c_r, v_r, c_l, v_l, step=step)
        updated = ws.combine(w, new_g0r, new_g0l)
        new_g1r, new_g1l = ws.outward_derivatives(updated)

        change = float(max(
            np.max(np.abs(updated - current)),
            abs(new_g0r - g0r), abs(new_g0l - g0l),
        ))
        current = updated
        g0r, g0l, g1r, g1l = new_g0r, new_g0l, new_g1r, new_g1l
        rate_r, rate_l = ws.trace_rates(current)
        if not np.isfinite(change):
            break
        if change < tol:
            ws.stats.record(iteration)
            if iteration > ITERATION_WARNING:
                logger.warning(f"Step {step}: {iteration} boundary iterations")
            return (
                current,
                nls_aux_advance(state_l, g0l, g1l, rate_l),
                nls_aux_advance(state_r, g0r, g1r, rate_r),
            )
    raise StepFailure(
        f"Transparent boundary iteration did not converge (last change {change:.3e})",
        step=step, iterations=iteration, last_change=change,
    )


class TbcStepper:
    """Step function for propagate() that carries the boundary states."""

    def __init__(self, ws: TbcWorkspace, u0):
        self.ws = ws
        u0 = np.asarray(u0, dtype=complex)
        if ws.nonlinearity is None:
            self.linear = TbcLinearState.start(u0, ws.h, ws.beta_rule)
        else:
            rho = ws.nonlinearity.rho
            g1r, g1l = ws.outward_derivatives(u0)
            rate_r, rate_l = ws.trace_rates(u0)
            self.left = TbcNlsState.start("left", rho, ws.h, complex(u0[0]), g1l, ws.beta_rule, rate_l)
            self.right = TbcNlsState.start("right", rho, ws.h, complex(u0[-1]), g1r, ws.beta_rule, rate_r)

    def __call__(self, u, ws=None, step=None):
        if self.ws.nonlinearity is None:
            u, self.linear = tbc_linear_step(u, self.linear, self.ws, step=step)
            return u
        u, self.left, self.right = tbc_nls_step(u, self.left, self.right, self.ws, step=step)
        return u
