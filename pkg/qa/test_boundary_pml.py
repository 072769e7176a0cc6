"""Tests for perfectly matched layers."""

import os
import sys

import numpy as np
import pytest

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from boundary_pml import (
    ROTATION,
    PmlConfig,
    assemble_pml,
    build_pml_decomposition,
    deformed_block,
    layer_side,
    sigma_profile,
)
from config import config_from_mapping, load_config
from harness import resolve_preset, run, sigma_sweep
from integrators import SchemeConfig, build_workspace, propagate
from multidomain import DomainError, DomainMap, MapKind, assemble, map_to_physical, second_derivative_block
from problems import gaussian_solution


def test_rotation():
    """Test R = exp(i pi / 4)."""
    assert ROTATION == pytest.approx((1 + 1j) / np.sqrt(2))


def test_pml_config_validation():
    """Test rejection of bad width and damping."""
    with pytest.raises(ValueError):
        PmlConfig(delta=0.0)
    with pytest.raises(ValueError):
        PmlConfig(sigma0=-1.0)
    assert PmlConfig(sigma0=0.0).sigma0 == 0.0


def test_sigma_profile_values():
    """Test zero at the window edge and sigma0 delta^2 at the outer end."""
    cfg = PmlConfig(delta=0.5, sigma0=50.0)
    assert sigma_profile(5.0, cfg, "right", -5.0, 5.0) == 0.0
    assert sigma_profile(5.5, cfg, "right", -5.0, 5.0) == pytest.approx(12.5)
    assert sigma_profile(-5.25, cfg, "left", -5.0, 5.0) == pytest.approx(3.125)
    np.testing.assert_allclose(
        sigma_profile(np.array([-5.5, -5.0]), cfg, "left", -5.0, 5.0), [12.5, 0.0]
    )


def test_sigma_profile_outside_layer():
    """Test that points outside the layer are rejected."""
    cfg = PmlConfig(delta=0.5, sigma0=50.0)
    with pytest.raises(ValueError):
        sigma_profile(4.9, cfg, "right", -5.0, 5.0)
    with pytest.raises(ValueError):
        sigma_profile(-5.6, cfg, "left", -5.0, 5.0)
    with pytest.raises(ValueError):
        sigma_profile(5.0, cfg, "middle", -5.0, 5.0)


def test_layer_side():
    """Test side detection from the inner end."""
    assert layer_side(DomainMap.layer(-5.0, -5.5, 10)) == "left"
    assert layer_side(DomainMap.layer(5.0, 5.5, 10)) == "right"
    with pytest.raises(DomainError):
        layer_side(DomainMap.finite_linear(-1.0, 1.0, 10))


@pytest.mark.parametrize("layer", [DomainMap.layer(-5.0, -5.5, 16), DomainMap.layer(5.0, 5.5, 16)])
def test_undamped_layer_is_plain_second_derivative(layer):
    """Test that sigma0 = 0 reduces the layer block to d^2/dx^2."""
    block = deformed_block(layer, PmlConfig(delta=0.5, sigma0=0.0))
    expected = second_derivative_block(layer)
    scale = np.max(np.abs(expected))
    assert np.max(np.abs(block - expected)) < 1e-12 * scale


def test_deformed_block_on_quadratic():
    """Test (A d/dx)^2 of (x - 5)^2 against 2A (A' (x - 5) + A) with A = 1 / (1 + R sigma)."""
    cfg = PmlConfig(delta=0.5, sigma0=2.0)
    layer = DomainMap.layer(5.0, 5.5, 20)
    x = map_to_physical(layer, layer.points)
    sigma = cfg.sigma0 * (x - 5.0) ** 2
    a = 1.0 / (1.0 + ROTATION * sigma)
    da = -ROTATION * 2.0 * cfg.sigma0 * (x - 5.0) * a**2
    expected = 2.0 * a * (da * (x - 5.0) + a)
    np.testing.assert_allclose(deformed_block(layer, cfg) @ (x - 5.0) ** 2, expected, rtol=1e-8, atol=1e-8)


def test_layout_structure():
    """Test domain ends, kinds and window index."""
    layout = build_pml_decomposition(-5.0, 5.0, PmlConfig(delta=0.5, sigma0=50.0), [20, 120, 50])
    domains = layout.decomposition.domains
    assert [d.kind for d in domains] == [MapKind.LAYER, MapKind.FINITE, MapKind.LAYER]
    assert (domains[0].x_left, domains[0].x_right) == (-5.5, -5.0)
    assert (domains[2].x_left, domains[2].x_right) == (5.0, 5.5)
    assert layout.window_index == 1
    assert layout.decomposition.total_size == 21 + 121 + 51


def test_layout_needs_three_orders():
    """Test that the layer/window/layer chain needs exactly three orders."""
    with pytest.raises(DomainError):
        build_pml_decomposition(-5.0, 5.0, PmlConfig(), [20, 120])


def test_dirichlet_rows():
    """Test Dirichlet rows at the outer ends of both layers."""
    layout = build_pml_decomposition(-5.0, 5.0, PmlConfig(), [10, 30, 10])
    total = layout.decomposition.total_size
    assert [r.index for r in layout.boundary_rows] == [0, total - 1]
    for r in layout.boundary_rows:
        assert r.row[r.index] == 1.0
        assert np.count_nonzero(r.row) == 1


def test_assemble_pml_rows():
    """Test that the assembled operator carries matching and Dirichlet rows."""
    layout = build_pml_decomposition(-5.0, 5.0, PmlConfig(), [10, 30, 10])
    op = assemble_pml(layout)
    assert sorted(op.tau_indices.tolist()) == [0, 10, 11, 41, 42, 52]
    assert np.allclose(op.matrix[11:42, 11:42], second_derivative_block(layout.decomposition.domains[1]))


def _load_preset(name):
    return load_config(resolve_preset(name))


def _gaussian_pml(**extra):
    values = {
        "problem.id": "gaussian",
        "boundary.kind": "pml",
        "domain.orders": "20,120,50",
        "pml.delta": "0.5",
        "pml.sigma0": "50",
        "time.scheme": "cn",
    }
    values.update({k.replace("__", "."): str(v) for k, v in extra.items()})
    return config_from_mapping(values)


def test_layer_absorbs_the_packet(clean_environ):
    """Test that the whole grid holds < 1e-3 of the initial peak once the packet has left."""
    config = _gaussian_pml(time__final=1.2, time__steps=2400, observe__stride=2400)
    result = run(config, write=False)
    assert result.ok
    assert np.max(np.abs(result.final.values)) < 1e-3


def test_undamped_layers_are_a_dirichlet_problem():
    """Test that sigma0 = 0 propagates exactly like plain blocks with Dirichlet ends."""
    layout = build_pml_decomposition(-5.0, 5.0, PmlConfig(delta=0.5, sigma0=0.0), [20, 120, 20])
    decomp = layout.decomposition
    plain = assemble(decomp, blocks=[second_derivative_block(d) for d in decomp.domains],
                     extra_rows=layout.boundary_rows)
    config = SchemeConfig.for_final_time("cn", 0.05, 50)
    u0 = gaussian_solution().sample(decomp, 0.0).values

    damped = propagate(u0, build_workspace(assemble_pml(layout), config)).final
    dirichlet = propagate(u0, build_workspace(plain, config)).final
    assert np.max(np.abs(damped - dirichlet)) < 1e-10
    assert abs(damped[0]) < 1e-14 and abs(damped[-1]) < 1e-14


@pytest.mark.slow
def test_linear_error_grows_after_entry(clean_environ):
    """Test Delta(0.5) > Delta(0.3) on the linear benchmark."""
    result = run(_load_preset("linear-pml"), write=False)
    assert result.ok
    early = result.report.peak(t_min=0.2995, t_max=0.3005)
    late = result.report.peak(t_min=0.4995, t_max=0.5005)
    assert np.isfinite(early) and np.isfinite(late)
    assert late > early


@pytest.mark.slow
def test_weakest_damping_grows_most(clean_environ, tmp_path):
    """Test that sigma0 = 40 has the largest post-entry error of 40, 50, 60."""
    report = sigma_sweep(_load_preset("linear-pml"), [40, 50, 60], jobs=3, output_dir=tmp_path)
    assert all(r.status == "ok" for r in report.runs)
    peaks = dict(zip(report.values, (r.peak_error for r in report.runs)))
    assert peaks["40.0"] > peaks["50.0"]
    assert peaks["40.0"] > peaks["60.0"]
