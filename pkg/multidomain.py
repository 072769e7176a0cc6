"""Whole-line discretization on a chain of Chebyshev domains.

A Decomposition is an ordered chain of DomainMaps running from left to
right in x. Every domain uses the same local ordering: node j = 0 sits at
the left (smaller x) end, node j = N at the right end, so the composite
vector is ordered by increasing x. Exterior domains are compactified with
s = 1/x, which puts x = -inf at node 0 of the left domain and x = +inf at
node N of the right domain.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.interpolate import barycentric_interpolate

from cheb_core import (
    RESIDUE_TOLERANCE,
    clenshaw_curtis,
    clenshaw_curtis_weights,
    collocation_points,
    diff_matrix,
    divide_by_factor,
    from_coefficients,
    to_coefficients,
)

logger = logging.getLogger("ced-schrodinger")


class DomainError(ValueError):
    """Invalid domain map, decomposition or composite vector."""


class NonDecayingFieldError(DomainError):
    """A whole-line integral was requested for a field that does not vanish at infinity."""


class MapKind(str, Enum):
    """Kinds of domain maps."""

    FINITE = "finite"
    COMPACT_LEFT = "compactified-left"
    COMPACT_RIGHT = "compactified-right"
    LAYER = "layer"

    @property
    def compactified(self) -> bool:
        return self in (MapKind.COMPACT_LEFT, MapKind.COMPACT_RIGHT)


@dataclass(frozen=True)
class DomainMap:
    """Map from the Chebyshev coordinate l in [-1, 1] to physical x.

    x_left/x_right are the physical ends (infinite for compactified maps).
    For layers, x_inner is the end shared with the computational window.
    """

    kind: MapKind
    n_order: int
    x_left: float
    x_right: float
    x_inner: Optional[float] = None

    def __post_init__(self):
        if self.n_order < 1:
            raise DomainError(f"Domain order must be >= 1, got {self.n_order}")
        if self.kind == MapKind.COMPACT_LEFT and not self.x_right < 0:
            raise DomainError(f"Left compactification needs x_l < 0, got {self.x_right}")
        if self.kind == MapKind.COMPACT_RIGHT and not self.x_left > 0:
            raise DomainError(f"Right compactification needs x_r > 0, got {self.x_left}")
        if self.kind in (MapKind.FINITE, MapKind.LAYER) and not self.x_left < self.x_right:
            raise DomainError(f"Finite domain needs x_left < x_right, got [{self.x_left}, {self.x_right}]")
        if self.kind == MapKind.LAYER and self.x_inner not in (self.x_left, self.x_right):
            raise DomainError(f"Layer inner end {self.x_inner} is not one of its ends")

    @classmethod
    def finite_linear(cls, x_left: float, x_right: float, n_order: int) -> "DomainMap":
        return cls(MapKind.FINITE, int(n_order), float(x_left), float(x_right))

    @classmethod
    def compactified_left(cls, x_l: float, n_order: int) -> "DomainMap":
        return cls(MapKind.COMPACT_LEFT, int(n_order), -math.inf, float(x_l))

    @classmethod
    def compactified_right(cls, x_r: float, n_order: int) -> "DomainMap":
        return cls(MapKind.COMPACT_RIGHT, int(n_order), float(x_r), math.inf)

    @classmethod
    def layer(cls, x_inner: float, x_outer: float, n_order: int) -> "DomainMap":
        if x_inner == x_outer:
            raise DomainError("Layer needs x_inner != x_outer")
        lo, hi = sorted((float(x_inner), float(x_outer)))
        return cls(MapKind.LAYER, int(n_order), lo, hi, float(x_inner))

    @property
    def size(self) -> int:
        return self.n_order + 1

    @property
    def points(self) -> np.ndarray:
        return collocation_points(self.n_order)

    @property
    def finite_end(self) -> float:
        """The finite boundary of a compactified domain."""
        if self.kind == MapKind.COMPACT_LEFT:
            return self.x_right
        if self.kind == MapKind.COMPACT_RIGHT:
            return self.x_left
        raise DomainError(f"{self.kind.value} domain has two finite ends")

    @property
    def infinity_node(self) -> Optional[int]:
        """Local index of the node at infinity, if any."""
        if self.kind == MapKind.COMPACT_LEFT:
            return 0
        if self.kind == MapKind.COMPACT_RIGHT:
            return self.n_order
        return None

    @property
    def factor_sign(self) -> int:
        """Sign in (l + sign), the factor vanishing at the infinity end."""
        if self.kind == MapKind.COMPACT_LEFT:
            return -1
        if self.kind == MapKind.COMPACT_RIGHT:
            return 1
        raise DomainError(f"{self.kind.value} domain has no infinity end")

    def s_values(self) -> np.ndarray:
        """s = 1/x on the grid of a compactified domain (0 at infinity)."""
        l = self.points
        if self.kind == MapKind.COMPACT_LEFT:
            return (1.0 - l) / (2.0 * self.x_right)
        if self.kind == MapKind.COMPACT_RIGHT:
            return (1.0 + l) / (2.0 * self.x_left)
        raise DomainError(f"{self.kind.value} domain is not compactified")

    @property
    def dl_ds(self) -> float:
        if self.kind == MapKind.COMPACT_LEFT:
            return -2.0 * self.x_right
        if self.kind == MapKind.COMPACT_RIGHT:
            return 2.0 * self.x_left
        raise DomainError(f"{self.kind.value} domain is not compactified")

    def dl_dx(self, l=None) -> np.ndarray:
        """Jacobian dl/dx at local coordinates l (the grid by default)."""
        l = self.points if l is None else np.asarray(l, dtype=float)
        if self.kind.compactified:
            if self.kind == MapKind.COMPACT_LEFT:
                return (1.0 - l) ** 2 / (2.0 * self.x_right)
            return -((1.0 + l) ** 2) / (2.0 * self.x_left)
        return np.full_like(l, 2.0 / (self.x_left - self.x_right), dtype=float)

    def derivative_matrix(self) -> np.ndarray:
        """Physical first derivative d/dx on this domain's grid."""
        return self.dl_dx()[:, None] * diff_matrix(self.n_order)


def map_to_physical(domain: DomainMap, l):
    """Physical x for local coordinate(s) l; the infinity end maps to +-inf."""
    l = np.asarray(l, dtype=float)
    with np.errstate(divide="ignore"):
        if domain.kind == MapKind.COMPACT_LEFT:
            x = np.where(l == 1.0, -np.inf, 2.0 * domain.x_right / (1.0 - l))
        elif domain.kind == MapKind.COMPACT_RIGHT:
            x = np.where(l == -1.0, np.inf, 2.0 * domain.x_left / (1.0 + l))
        else:
            x = domain.x_left * (1.0 + l) / 2.0 + domain.x_right * (1.0 - l) / 2.0
    return float(x) if x.ndim == 0 else x


def map_to_local(domain: DomainMap, x):
    """Inverse of map_to_physical."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        if domain.kind == MapKind.COMPACT_LEFT:
            l = 1.0 - 2.0 * domain.x_right / x
        elif domain.kind == MapKind.COMPACT_RIGHT:
            l = 2.0 * domain.x_left / x - 1.0
        else:
            l = (2.0 * x - domain.x_left - domain.x_right) / (domain.x_left - domain.x_right)
    return float(l) if l.ndim == 0 else l


@dataclass(frozen=True)
class Decomposition:
    """Ordered chain of domains covering (part of) the real line."""

    domains: tuple

    def __post_init__(self):
        object.__setattr__(self, "domains", tuple(self.domains))
        if not self.domains:
            raise DomainError("Decomposition needs at least one domain")
        for left, right in zip(self.domains, self.domains[1:]):
            if left.x_right != right.x_left:
                raise DomainError(
                    f"Domains do not share a boundary: {left.x_right} != {right.x_left}"
                )

    @property
    def sizes(self) -> list[int]:
        return [d.size for d in self.domains]

    @property
    def offsets(self) -> list[int]:
        return [int(o) for o in np.concatenate(([0], np.cumsum(self.sizes)[:-1]))]

    @property
    def total_size(self) -> int:
        return int(sum(self.sizes))

    def slices(self) -> list[slice]:
        return [slice(o, o + n) for o, n in zip(self.offsets, self.sizes)]

    def split(self, values) -> list[np.ndarray]:
        values = np.asarray(values)
        if values.shape[0] != self.total_size:
            raise DomainError(f"Composite vector has length {values.shape[0]}, expected {self.total_size}")
        return [values[s] for s in self.slices()]

    def physical_points(self) -> np.ndarray:
        return np.concatenate([map_to_physical(d, d.points) for d in self.domains])

    def describe(self) -> str:
        parts = [f"{d.kind.value}[{d.x_left:g},{d.x_right:g}]:N={d.n_order}" for d in self.domains]
        return f"{' | '.join(parts)} (total {self.total_size})"

    def is_symmetric(self) -> bool:
        """True when the chain is its own mirror image under x -> -x."""
        for d, m in zip(self.domains, reversed(self.domains)):
            if d.n_order != m.n_order or d.x_left != -m.x_right or d.x_right != -m.x_left:
                return False
        return True

    def parity_permutation(self) -> np.ndarray:
        """Global index map x_j -> -x_j; only defined for symmetric chains."""
        if not self.is_symmetric():
            raise DomainError("Parity permutation needs a symmetric decomposition")
        return np.arange(self.total_size)[::-1].copy()


def ced_decomposition(x_l: float, x_r: float, orders: Sequence[int]) -> Decomposition:
    """Compactified exterior domains around one or more finite domains.

    orders[0] and orders[-1] belong to (-inf, x_l] and [x_r, inf); the
    orders in between split [x_l, x_r] into equal finite domains.
    """
    if len(orders) < 3:
        raise DomainError(f"CED layout needs at least three orders, got {len(orders)}")
    cuts = np.linspace(x_l, x_r, len(orders) - 1)
    cuts[0], cuts[-1] = x_l, x_r
    domains = [DomainMap.compactified_left(x_l, orders[0])]
    for a, b, n in zip(cuts, cuts[1:], orders[1:-1]):
        domains.append(DomainMap.finite_linear(a, b, n))
    domains.append(DomainMap.compactified_right(x_r, orders[-1]))
    return Decomposition(tuple(domains))


def window_decomposition(x_l: float, x_r: float, order: int) -> Decomposition:
    """Single finite domain [x_l, x_r]."""
    return Decomposition((DomainMap.finite_linear(x_l, x_r, order),))


@dataclass
class CompositeField:
    """Values of a field on every node of a decomposition."""

    values: np.ndarray
    decomposition: Decomposition

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.decomposition.total_size,):
            raise DomainError(
                f"Field has shape {self.values.shape}, expected ({self.decomposition.total_size},)"
            )

    def __len__(self) -> int:
        return self.values.size

    def split(self) -> list[np.ndarray]:
        return self.decomposition.split(self.values)

    def domain_values(self, index: int) -> np.ndarray:
        return self.split()[index]

    def evaluate(self, x) -> np.ndarray:
        """Barycentric interpolation at physical points x (finite x only)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(x.shape, dtype=complex)
        found = np.zeros(x.shape, dtype=bool)
        for domain, values in zip(self.decomposition.domains, self.split()):
            inside = ~found & (x >= domain.x_left) & (x <= domain.x_right)
            if not inside.any():
                continue
            l = map_to_local(domain, x[inside])
            out[inside] = barycentric_interpolate(domain.points, values, l)
            found |= inside
        if not found.all():
            raise DomainError(f"Points outside the decomposition: {x[~found]}")
        return out


@dataclass(frozen=True)
class TauRow:
    """One row of a step matrix replaced by a boundary or matching condition."""

    index: int
    row: np.ndarray
    rhs: complex = 0.0
    label: str = ""

    def residual(self, values) -> complex:
        return complex(np.dot(self.row, values) - self.rhs)


@dataclass
class CompositeOperator:
    """Dense spatial operator plus the tau rows that replace some of its rows."""

    matrix: np.ndarray
    tau_rows: list = field(default_factory=list)
    decomposition: Optional[Decomposition] = None

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def tau_indices(self) -> np.ndarray:
        return np.array([r.index for r in self.tau_rows], dtype=int)

    def substitute(self, step_matrix: np.ndarray) -> np.ndarray:
        """Copy of step_matrix with the tau rows swapped in."""
        out = np.array(step_matrix, dtype=complex)
        for r in self.tau_rows:
            out[r.index, :] = r.row
        return out

    def zero_tau_entries(self, vector: np.ndarray) -> np.ndarray:
        vector = np.array(vector, dtype=complex)
        if self.tau_rows:
            vector[self.tau_indices] = 0.0
        return vector

    def tau_rhs(self, vector: np.ndarray) -> np.ndarray:
        """Copy of vector with tau positions set to their condition values."""
        vector = np.array(vector, dtype=complex)
        for r in self.tau_rows:
            vector[r.index] = r.rhs
        return vector

    def residuals(self, values) -> np.ndarray:
        return np.array([r.residual(values) for r in self.tau_rows], dtype=complex)

    def apply(self, values) -> np.ndarray:
        return self.matrix @ values


def second_derivative_block(domain: DomainMap) -> np.ndarray:
    """d^2/dx^2 on one domain's grid.

    Finite maps use the constant jacobian. Compactified maps use
    s^4 d_ss + 2 s^3 d_s in s = 1/x, so the row at s = 0 is zero.
    """
    d = diff_matrix(domain.n_order)
    if domain.kind.compactified:
        s = domain.s_values()
        a = domain.dl_ds
        block = (s**4 * a**2)[:, None] * (d @ d) + (2.0 * s**3 * a)[:, None] * d
        return block.astype(complex)
    scale = 2.0 / (domain.x_left - domain.x_right)
    return (scale**2 * (d @ d)).astype(complex)


def _endpoint_jacobian(domain: DomainMap, side: str) -> float:
    l = 1.0 if side == "left" else -1.0
    return float(domain.dl_dx(np.array([l]))[0])


def matching_rows(decomp: Decomposition) -> list[TauRow]:
    """Value and derivative continuity at every interior boundary.

    For the interface between domains a (left) and b (right) the value row
    replaces the last node of a and the derivative row the first node of b.
    """
    if len(decomp.domains) < 2:
        raise DomainError("Matching needs at least two domains")
    rows = []
    total = decomp.total_size
    offsets = decomp.offsets
    for k, (a, b) in enumerate(zip(decomp.domains, decomp.domains[1:])):
        oa, ob = offsets[k], offsets[k + 1]
        value = np.zeros(total)
        value[oa + a.n_order] = 1.0
        value[ob] = -1.0
        deriv = np.zeros(total)
        deriv[oa : oa + a.size] = _endpoint_jacobian(a, "right") * diff_matrix(a.n_order)[a.n_order, :]
        deriv[ob : ob + b.size] -= _endpoint_jacobian(b, "left") * diff_matrix(b.n_order)[0, :]
        x = a.x_right
        rows.append(TauRow(oa + a.n_order, value, 0.0, f"value@{x:g}"))
        rows.append(TauRow(ob, deriv, 0.0, f"derivative@{x:g}"))
    return rows


def assemble(
    decomp: Decomposition,
    potential=None,
    blocks: Optional[Sequence[np.ndarray]] = None,
    extra_rows: Iterable[TauRow] = (),
) -> CompositeOperator:
    """Block-diagonal second-derivative operator plus diagonal potential.

    blocks overrides the per-domain second-derivative blocks (layers use
    deformed ones). Tau rows are recorded, not substituted.
    """
    total = decomp.total_size
    matrix = np.zeros((total, total), dtype=complex)
    if blocks is None:
        blocks = [second_derivative_block(d) for d in decomp.domains]
    if len(blocks) != len(decomp.domains):
        raise DomainError(f"Got {len(blocks)} blocks for {len(decomp.domains)} domains")
    for s, block in zip(decomp.slices(), blocks):
        matrix[s, s] = block
    if potential is not None:
        potential = np.asarray(potential)
        if potential.shape != (total,):
            raise DomainError(f"Potential has shape {potential.shape}, expected ({total},)")
        matrix[np.diag_indices(total)] += potential

    tau_rows = matching_rows(decomp) if len(decomp.domains) > 1 else []
    tau_rows.extend(extra_rows)
    indices = [r.index for r in tau_rows]
    if len(set(indices)) != len(indices):
        raise DomainError(f"Tau rows collide: {sorted(indices)}")
    return CompositeOperator(matrix, tau_rows, decomp)


def sample_function(decomp: Decomposition, func: Callable, at_infinity=None) -> np.ndarray:
    """Samples func(x) on every finite node; infinity nodes get at_infinity(x=+-inf)."""
    x = decomp.physical_points()
    out = np.empty(x.shape, dtype=complex)
    finite = np.isfinite(x)
    out[finite] = func(x[finite])
    if (~finite).any():
        if at_infinity is None:
            raise DomainError("Sampling needs a value at infinity for compactified domains")
        out[~finite] = [at_infinity(v) for v in x[~finite]]
    return out


def _domain_integral(domain: DomainMap, values: np.ndarray) -> complex:
    if not domain.kind.compactified:
        half = (domain.x_right - domain.x_left) / 2.0
        return half * clenshaw_curtis(values, clenshaw_curtis_weights(domain.n_order))

    sign = domain.factor_sign
    scale = max(float(np.max(np.abs(values))), 1.0)
    coeffs = to_coefficients(values)
    for _ in range(2):
        coeffs, residue = divide_by_factor(coeffs, sign)
        if abs(residue) > RESIDUE_TOLERANCE * scale:
            raise NonDecayingFieldError(
                f"Integrand does not vanish at infinity in {domain.kind.value} domain "
                f"(residue {abs(residue):.3e})"
            )
    quotient = from_coefficients(coeffs)
    return 2.0 * abs(domain.finite_end) * clenshaw_curtis(quotient, clenshaw_curtis_weights(domain.n_order))


def whole_line_integral(decomp: Decomposition, values, window: str = "whole_line") -> complex:
    """Integral of composite samples over x.

    window="whole_line" integrates every domain; "computational" keeps
    only the finite domains between the layers or exterior domains.
    Compactified domains use dx = dl / (dl/dx), done by two coefficient
    divisions by the factor vanishing at infinity.
    """
    if window not in ("whole_line", "computational"):
        raise ValueError(f"Unknown integration window: {window}")
    total = 0.0 + 0.0j
    for domain, part in zip(decomp.domains, decomp.split(values)):
        if window == "computational" and domain.kind != MapKind.FINITE:
            continue
        total += _domain_integral(domain, part)
    return total


def whole_line_l2(field: CompositeField, window: str = "whole_line") -> float:
    """Squared L2 norm: integral of |u|^2 dx."""
    return float(whole_line_integral(field.decomposition, np.abs(field.values) ** 2, window).real)


def physical_derivative(decomp: Decomposition, values) -> np.ndarray:
    """du/dx on every node, domain by domain (0 at infinity nodes)."""
    return np.concatenate(
        [d.derivative_matrix() @ part for d, part in zip(decomp.domains, decomp.split(values))]
    )
