"""Tests for discrete transparent boundary conditions."""

import cmath
import math
import os
import sys
import time

import numpy as np
import pytest

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from boundary_tbc import (
    TbcLinearState,
    TbcNlsState,
    TbcStepper,
    beta_sequence,
    build_tbc_workspace,
    dtn_factor,
    dtn_nls,
    nls_aux_advance,
    tbc_linear_step,
)
from integrators import CubicNonlinearity, SchemeConfig, propagate
from multidomain import CompositeField, DomainError, ced_decomposition, sample_function, window_decomposition
from problems import error_delta, gaussian_solution, soliton_solution


def _workspace(nonlinearity=None, order=16, h=0.01, steps=1, rule="series"):
    decomp = window_decomposition(-2.0, 2.0, order)
    config = SchemeConfig(scheme="cn", h=h, n_steps=steps)
    return build_tbc_workspace(decomp, config, nonlinearity=nonlinearity, beta_rule=rule)


def test_beta_printed():
    """Test the printed recursion beta_{k+2} = beta_k (1 - 1/(k+1))."""
    np.testing.assert_allclose(beta_sequence(4, "printed"), [1.0, -1.0, 0.0, -0.5, 0.0, -0.375])


def test_beta_series():
    """Test the Taylor coefficients of sqrt((1 - z) / (1 + z))."""
    np.testing.assert_allclose(beta_sequence(4, "series"), [1.0, -1.0, 0.5, -0.5, 0.375, -0.375])


def test_beta_series_generating_function():
    """Test the series weights against sqrt((1 - z) / (1 + z)) at z = 0.3."""
    beta = beta_sequence(200, "series")
    z = 0.3
    assert abs(np.polyval(beta[::-1], z) - math.sqrt((1 - z) / (1 + z))) < 1e-14


def test_beta_sequence_errors():
    """Test rejection of negative length and unknown rules."""
    assert beta_sequence(0).size == 2
    with pytest.raises(ValueError):
        beta_sequence(-1)
    with pytest.raises(ValueError):
        beta_sequence(3, "exact")


def test_dtn_factor():
    """Test F = -exp(-i pi/4) sqrt(2/h)."""
    assert dtn_factor(0.5) == pytest.approx(-2.0 * cmath.exp(-0.25j * math.pi))


def test_workspace_rejects_bad_layouts():
    """Test that TBC needs one finite window, CN and a known beta rule."""
    config = SchemeConfig(scheme="cn", h=0.01, n_steps=1)
    with pytest.raises(DomainError):
        build_tbc_workspace(ced_decomposition(-2.0, 2.0, [8, 16, 8]), config)
    with pytest.raises(ValueError):
        build_tbc_workspace(window_decomposition(-2.0, 2.0, 16), SchemeConfig(scheme="irk4", h=0.01))
    with pytest.raises(ValueError):
        build_tbc_workspace(window_decomposition(-2.0, 2.0, 16), config, beta_rule="exact")


def test_boundary_responses():
    """Test that phi_r and phi_l carry unit traces at their own end only."""
    ws = _workspace()
    assert ws.phi_r[-1] == pytest.approx(1.0)
    assert abs(ws.phi_r[0]) < 1e-14
    assert ws.phi_l[0] == pytest.approx(1.0)
    assert abs(ws.phi_l[-1]) < 1e-14


def test_influence_matches_direct_derivative():
    """Test the affine trace-to-derivative map against differentiating U."""
    ws = _workspace()
    rng = np.random.default_rng(5)
    rhs = rng.standard_normal(ws.size) + 1j * rng.standard_normal(ws.size)
    w = ws.interior_solve(rhs)
    influence = ws.with_interior(w)
    g0r, g0l = 0.3 - 0.2j, -1.1 + 0.4j
    u = ws.combine(w, g0r, g0l)
    right, left = influence.derivatives(g0r, g0l)
    assert abs(right - ws.d_r @ u) < 1e-10
    assert abs(left - ws.d_l @ u) < 1e-10


def test_solve_traces_satisfies_robin_relations():
    """Test that the solved traces satisfy g1 = c g0 + v at both ends."""
    ws = _workspace()
    rng = np.random.default_rng(9)
    w = ws.interior_solve(rng.standard_normal(ws.size) + 0j)
    influence = ws.with_interior(w)
    c_r, v_r, c_l, v_l = -3.0 + 3.0j, 0.2, -3.0 + 3.0j, -0.1j
    g0r, g0l = influence.solve_traces(c_r, v_r, c_l, v_l)
    u = ws.combine(w, g0r, g0l)
    g1r, g1l = ws.outward_derivatives(u)
    assert abs(g1r - (c_r * g0r + v_r)) < 1e-10
    assert abs(g1l - (c_l * g0l + v_l)) < 1e-10
    assert u[-1] == pytest.approx(g0r)
    assert u[0] == pytest.approx(g0l)


def test_linear_step_extends_histories():
    """Test that each step appends the new boundary values to the traces."""
    ws = _workspace(order=24)
    u0 = sample_function(ws.decomposition, lambda x: np.exp(-4.0 * x**2))
    state = TbcLinearState.start(u0, ws.h)
    u1, state = tbc_linear_step(u0, state, ws, step=1)
    u2, state = tbc_linear_step(u1, state, ws, step=2)
    assert state.steps_done == 2
    assert state.g0l[0] == u0[0]
    assert state.g0r[1] == pytest.approx(u1[-1], abs=1e-14)
    assert state.g0l[2] == pytest.approx(u2[0], abs=1e-14)
    assert ws.stats.steps == 2


def test_linear_gaussian_leaves_window():
    """Test that a Gaussian crossing x_r = 5 leaves little reflection."""
    decomp = window_decomposition(-5.0, 5.0, 120)
    config = SchemeConfig.for_final_time("cn", 0.4, 1600)
    ws = build_tbc_workspace(decomp, config)
    exact = gaussian_solution()
    u0 = exact.sample(decomp, 0.0).values
    result = propagate(u0, ws, step_fn=TbcStepper(ws, u0))
    delta = error_delta(CompositeField(result.final, decomp), exact.sample(decomp, 0.4))
    assert delta < 1e-2


def test_nls_soliton_short_run():
    """Test a slow soliton with nonlinear transparent boundaries."""
    decomp = window_decomposition(-15.0, 15.0, 300)
    config = SchemeConfig.for_final_time("cn", 0.5, 100)
    ws = build_tbc_workspace(decomp, config, nonlinearity=CubicNonlinearity(-1))
    exact = soliton_solution(a=2.0, c=2.0)
    u0 = exact.sample(decomp, 0.0).values
    stepper = TbcStepper(ws, u0)
    result = propagate(u0, ws, step_fn=stepper)
    delta = error_delta(CompositeField(result.final, decomp), exact.sample(decomp, 0.5))
    assert delta < 1e-3
    assert stepper.left.level == 100
    assert stepper.right.level == 100
    assert np.max(stepper.left.corner_residuals()) <= 1e-12
    assert np.max(stepper.right.corner_residuals()) <= 1e-12


def test_nls_zero_field_stays_zero():
    """Test that zero data stays exactly zero."""
    ws = _workspace(CubicNonlinearity(-1), steps=5)
    u0 = np.zeros(ws.size, dtype=complex)
    result = propagate(u0, ws, step_fn=TbcStepper(ws, u0))
    assert np.all(result.final == 0)


def test_nls_state_start():
    """Test the corner values of level 0."""
    state = TbcNlsState.start("right", -1, 0.01, 0.5 + 0j, 0.2j)
    assert state.level == 0
    assert state.L1[0] == pytest.approx(0.5j * 0.2j)
    assert state.M1[0] == 0.5
    assert np.max(state.corner_residuals()) == 0.0
    with pytest.raises(ValueError):
        TbcNlsState.start("top", -1, 0.01, 0.0, 0.0)


def test_nls_aux_advance_is_pure():
    """Test that advancing returns a new level and leaves the input alone."""
    state = TbcNlsState.start("left", -1, 0.01, 0.5 + 0j, 0.1 + 0j)
    advanced = nls_aux_advance(state, 0.49 + 0.01j, 0.1 + 0j)
    advanced = nls_aux_advance(advanced, 0.48 + 0.02j, 0.1 + 0j)
    assert state.level == 0
    assert state.M1.size == 1
    assert advanced.level == 2
    assert advanced.M1.size == 3
    assert advanced.M1[-1] == 0.48 + 0.02j
    assert advanced.M1[0] == 0
    assert np.max(advanced.corner_residuals()) <= 1e-12


def test_dtn_nls_side_check():
    """Test that a state only serves its own boundary."""
    state = TbcNlsState.start("left", -1, 0.01, 0.5 + 0j, 0.1 + 0j)
    dtn_nls(state, "left")
    with pytest.raises(ValueError):
        dtn_nls(state, "right")


def test_linear_state_betas():
    """Test the public weight accessor used by the linear step."""
    state = TbcLinearState.start(np.zeros(3, dtype=complex), 0.01, "printed")
    np.testing.assert_allclose(state.betas(3), beta_sequence(2, "printed")[:4])
    assert state.betas(0)[0] == 1.0


@pytest.mark.parametrize("rho", [-1, 1])
def test_m2_corner_follows_trace_flux(rho):
    """Test dM2/dt = 2 rho Im(g0 conj(g1)) along the corner for both signs of rho."""
    h, levels = 0.01, 10
    g0, g1 = 0.6 + 0.2j, -0.3 + 0.5j
    state = TbcNlsState.start("right", rho, h, g0, g1)
    for _ in range(levels):
        state = nls_aux_advance(state, g0, g1, g0_t=0.0)
    flux = 2.0 * rho * (g0 * np.conj(g1)).imag
    assert state.M2[-1] == pytest.approx(flux * levels * h, abs=1e-13)


def test_aux_advance_uses_given_trace_rate():
    """Test that an explicit g0_t replaces the backward difference in b."""
    state = TbcNlsState.start("left", -1, 0.01, 0.5 + 0j, 0.1 + 0j)
    implicit = nls_aux_advance(state, 0.49 + 0.01j, 0.1 + 0j)
    explicit = nls_aux_advance(state, 0.49 + 0.01j, 0.1 + 0j, g0_t=-1.0 + 1.0j)
    g0 = 0.49 + 0.01j
    assert implicit.b == pytest.approx(0.5j * ((-1.0 + 1.0j) - 1j * abs(g0) ** 2 * g0))
    assert explicit.b == pytest.approx(implicit.b)
    other = nls_aux_advance(state, 0.49 + 0.01j, 0.1 + 0j, g0_t=2.0)
    assert other.b != implicit.b


def test_trace_rates_follow_the_equation():
    """Test u_t at both ends against i (u_xx + N(u)) for a cubic workspace."""
    ws = _workspace(CubicNonlinearity(-1), order=32)
    u = sample_function(ws.decomposition, lambda x: np.exp(-(x**2) + 1j * x))
    rate_r, rate_l = ws.trace_rates(u)
    expected = 1j * (ws.operator @ u + CubicNonlinearity(-1)(u))
    assert rate_r == pytest.approx(expected[-1], rel=1e-9, abs=1e-8)
    assert rate_l == pytest.approx(expected[0], rel=1e-9, abs=1e-8)


def _smooth_traces(amp, levels, h):
    t = h * np.arange(levels + 1)
    g0 = amp * (np.sin(3.0 * t) + 1j * t)
    g1 = amp * ((0.5 + 0.3j) * t + 0.2j * t**2)
    return g0, g1


def _relative_dtn_gap(amp, levels=20, h=0.01):
    g0, g1 = _smooth_traces(amp, levels, h)
    state = TbcNlsState.start("right", -1, h, complex(g0[0]), complex(g1[0]))
    for k in range(1, levels + 1):
        state = nls_aux_advance(state, complex(g0[k]), complex(g1[k]))
    nonlinear = dtn_nls(state, "right")
    linear = dtn_factor(h) * np.dot(beta_sequence(levels, "series")[: levels + 1], g0[::-1])
    return abs(nonlinear - linear) / abs(linear), state


def test_dtn_nls_small_amplitude_matches_linear_map():
    """Test that the nonlinear map reduces to the linear convolution to O(amplitude^2)."""
    gap_small, state = _relative_dtn_gap(1e-2)
    gap_double, _ = _relative_dtn_gap(2e-2)
    assert gap_small < 1e-3
    assert 3.0 <= gap_double / gap_small <= 5.0
    assert np.max(np.abs(state.M2)) < 1e-3
    assert np.max(np.abs(state.L2)) < 1e-3


def _level_state(n, rng):
    def noise(size):
        return 1e-3 * (rng.standard_normal(size) + 1j * rng.standard_normal(size))

    return TbcNlsState(
        side="right", rho=-1, h=1e-4, level=n,
        L1=noise(n + 1), L2=noise(n + 1), M1=noise(n + 1), M2=noise(n + 1),
        g0=noise(n + 1), g1=noise(n + 1), a=0j, b=0j,
    )


def _advance_cost(state, repeats=5, calls=3):
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        for _ in range(calls):
            nls_aux_advance(state, 1e-3 + 0j, 1e-3j)
        best = min(best, (time.perf_counter() - start) / calls)
    return best


@pytest.mark.slow
def test_aux_level_cost_grows_linearly():
    """Test that one level costs O(n), so N_t steps cost O(N_t^2) in total."""
    rng = np.random.default_rng(11)
    early = _advance_cost(_level_state(2000, rng))
    late = _advance_cost(_level_state(32000, rng))
    assert 4.0 <= late / early <= 40.0
