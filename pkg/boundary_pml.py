"""Perfectly matched layers around the window [x_l, x_r].

Each layer is a finite Chebyshev domain of width delta in which d/dx is
replaced by (1 / (1 + R sigma(x))) d/dx with R = exp(i pi / 4) and a
quadratic damping profile starting at the window edge. The outer ends of
the layers carry Dirichlet-zero rows.
"""

import cmath
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cheb_core import diff_matrix
from multidomain import (
    CompositeOperator,
    Decomposition,
    DomainError,
    DomainMap,
    MapKind,
    TauRow,
    assemble,
    map_to_physical,
    second_derivative_block,
)

logger = logging.getLogger("ced-schrodinger")

ROTATION = cmath.exp(0.25j * cmath.pi)

# Slack when checking that a point lies inside a layer.
_EDGE_SLACK = 1e-12


@dataclass(frozen=True)
class PmlConfig:
    """Layer width and damping amplitude, shared by both layers."""

    delta: float = 0.5
    sigma0: float = 50.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"PML width must be positive, got {self.delta}")
        if self.sigma0 < 0:
            raise ValueError(f"PML damping must be >= 0, got {self.sigma0}")

    @property
    def rotation(self) -> complex:
        return ROTATION


def sigma_profile(x, cfg: PmlConfig, side: str, x_l: float, x_r: float):
    """Damping sigma0 (x - x_edge)^2 inside the left or right layer."""
    x = np.asarray(x, dtype=float)
    if side == "left":
        edge, lo, hi = x_l, x_l - cfg.delta, x_l
    elif side == "right":
        edge, lo, hi = x_r, x_r, x_r + cfg.delta
    else:
        raise ValueError(f"Layer side must be 'left' or 'right', got {side!r}")
    slack = _EDGE_SLACK * max(1.0, abs(lo), abs(hi))
    if np.any(x < lo - slack) or np.any(x > hi + slack):
        raise ValueError(f"Point(s) outside the {side} layer [{lo}, {hi}]")
    sigma = cfg.sigma0 * (x - edge) ** 2
    return float(sigma) if sigma.ndim == 0 else sigma


def layer_side(layer: DomainMap) -> str:
    if layer.kind != MapKind.LAYER:
        raise DomainError(f"Expected a layer, got a {layer.kind.value} domain")
    return "right" if layer.x_inner == layer.x_left else "left"


def deformed_block(layer: DomainMap, cfg: PmlConfig) -> np.ndarray:
    """diag(A) Dx diag(A) Dx with A = 1 / (1 + R sigma) on the layer grid."""
    side = layer_side(layer)
    x = map_to_physical(layer, layer.points)
    sigma = sigma_profile(x, cfg, side, layer.x_inner, layer.x_inner)
    a = 1.0 / (1.0 + cfg.rotation * sigma)
    dx = (2.0 / (layer.x_left - layer.x_right)) * diff_matrix(layer.n_order)
    return a[:, None] * (dx @ (a[:, None] * dx))


@dataclass
class PmlLayout:
    """Three-domain layer/window/layer chain with its blocks and outer rows."""

    decomposition: Decomposition
    config: PmlConfig
    blocks: list = field(default_factory=list)
    boundary_rows: list = field(default_factory=list)

    @property
    def window_index(self) -> int:
        return 1


def build_pml_decomposition(x_l: float, x_r: float, cfg: PmlConfig, orders: Sequence[int]) -> PmlLayout:
    """[x_l - delta, x_l] | [x_l, x_r] | [x_r, x_r + delta] with Dirichlet ends."""
    if len(orders) != 3:
        raise DomainError(f"PML layout needs three orders (layer, window, layer), got {len(orders)}")
    left = DomainMap.layer(x_l, x_l - cfg.delta, orders[0])
    window = DomainMap.finite_linear(x_l, x_r, orders[1])
    right = DomainMap.layer(x_r, x_r + cfg.delta, orders[2])
    decomp = Decomposition((left, window, right))

    blocks = [deformed_block(left, cfg), second_derivative_block(window), deformed_block(right, cfg)]

    total = decomp.total_size
    rows = []
    for index, label in ((0, "dirichlet@left"), (total - 1, "dirichlet@right")):
        row = np.zeros(total)
        row[index] = 1.0
        rows.append(TauRow(index, row, 0.0, label))

    logger.debug(f"PML layout {decomp.describe()} delta={cfg.delta:g} sigma0={cfg.sigma0:g}")
    return PmlLayout(decomp, cfg, blocks, rows)


def assemble_pml(layout: PmlLayout, potential=None) -> CompositeOperator:
    return assemble(layout.decomposition, potential, blocks=layout.blocks, extra_rows=layout.boundary_rows)
