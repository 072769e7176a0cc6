"""Chebyshev machinery on the reference interval [-1, 1].

Collocation grids, differentiation matrices, value/coefficient transforms,
Clenshaw-Curtis quadrature and coefficient-space division by (l + 1) or
(l - 1). Everything here works on plain numpy arrays; grid-dependent
matrices are cached per order since they never change.
"""

import logging
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as npcheb
from scipy.fft import dct

logger = logging.getLogger("ced-schrodinger")

# Relative size of a boundary residue below which a field counts as vanishing
# at the root of the division factor.
RESIDUE_TOLERANCE = 1e-8


def _check_order(n: int) -> int:
    n = int(n)
    if n < 1:
        raise ValueError(f"Chebyshev order must be >= 1, got {n}")
    return n


@lru_cache(maxsize=64)
def _points(n: int) -> np.ndarray:
    j = np.arange(n + 1)
    # sin form keeps the grid exactly symmetric with exact +-1 and 0
    points = np.sin(np.pi * (n - 2 * j) / (2 * n))
    points[0] = 1.0
    points[-1] = -1.0
    points.setflags(write=False)
    return points


def collocation_points(n: int) -> np.ndarray:
    """Chebyshev-Gauss-Lobatto points l_j = cos(j*pi/N), j = 0..N.

    The sequence is strictly decreasing with l_0 = 1 and l_N = -1 set exactly.
    The returned array is read-only and shared between callers.
    """
    return _points(_check_order(n))


@lru_cache(maxsize=64)
def _diff_matrix(n: int) -> np.ndarray:
    x = _points(n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c = c * (-1.0) ** np.arange(n + 1)
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(n + 1))
    # negative-sum trick: rows of D annihilate constants to rounding
    d -= np.diag(d.sum(axis=1))
    d.setflags(write=False)
    return d


def diff_matrix(n: int) -> np.ndarray:
    """Differentiation matrix of the degree-N interpolant on the Chebyshev grid."""
    return _diff_matrix(_check_order(n))


@lru_cache(maxsize=64)
def _cc_weights(n: int) -> np.ndarray:
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    inner = theta[1:-1]
    v = np.ones(n - 1)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n**2 - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k**2 - 1)
        v -= np.cos(n * inner) / (n**2 - 1)
    else:
        w[0] = w[n] = 1.0 / n**2
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k**2 - 1)
    w[1:-1] = 2.0 * v / n
    w.setflags(write=False)
    return w


def clenshaw_curtis_weights(n: int) -> np.ndarray:
    """Clenshaw-Curtis weights for the N+1 point grid; they sum to 2."""
    return _cc_weights(_check_order(n))


def clenshaw_curtis(values, weights=None) -> complex:
    """Integrate grid samples over [-1, 1]."""
    values = np.asarray(values)
    if weights is None:
        weights = clenshaw_curtis_weights(values.size - 1)
    weights = np.asarray(weights)
    if weights.shape != values.shape:
        raise ValueError(f"Length mismatch: {values.size} values, {weights.size} weights")
    return complex(np.dot(weights, values))


def _dct1(x: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(x):
        return dct(x.real, type=1) + 1j * dct(x.imag, type=1)
    return dct(x, type=1)


def to_coefficients(values) -> np.ndarray:
    """Chebyshev coefficients a_n with sum a_n T_n(l_j) = values[j]."""
    values = np.asarray(values)
    n = _check_order(values.size - 1)
    a = _dct1(values) / n
    a[0] /= 2.0
    a[n] /= 2.0
    return a


def from_coefficients(coeffs) -> np.ndarray:
    """Grid values of sum a_n T_n; inverse of to_coefficients."""
    a = np.asarray(coeffs)
    a = a.astype(np.result_type(a, float))
    n = _check_order(a.size - 1)
    a[0] *= 2.0
    a[n] *= 2.0
    return _dct1(a) / 2.0


def multiply_by_factor(b, sign: int) -> np.ndarray:
    """Coefficients of (l + sign) * sum b_n T_n; one entry longer than b."""
    b = np.asarray(b)
    _check_sign(sign)
    out = np.zeros(b.size + 1, dtype=np.result_type(b, float))
    # chebmulx trims trailing zeros, so its result can be shorter
    product = npcheb.chebmulx(b)
    out[: product.size] = product
    out[: b.size] += sign * b
    return out


def divide_by_factor(a, sign: int) -> tuple[np.ndarray, complex]:
    """Divide sum a_n T_n by (l + sign) in coefficient space.

    The value of the series at the root l = -sign is subtracted first, so
    every input is admissible. Returns the quotient (same length as a, last
    entry zero) and that residue; callers treat a large residue as a field
    that does not vanish at the root.
    """
    a = np.asarray(a)
    a = a.astype(np.result_type(a, float))
    _check_sign(sign)
    n = a.size - 1
    if n < 1:
        raise ValueError("Need at least two coefficients to divide")
    residue = npcheb.chebval(-sign, a)
    a[0] -= residue

    b = np.zeros(n + 2, dtype=a.dtype)
    for k in range(n, 1, -1):
        b[k - 1] = 2.0 * (a[k] - sign * b[k]) - b[k + 1]
    b[0] = a[1] - sign * b[1] - 0.5 * b[2]
    return b[: n + 1], complex(residue)


def tail_magnitude(values, count: int = 2) -> float:
    """Largest modulus among the last `count` Chebyshev coefficients."""
    a = to_coefficients(values)
    return float(np.max(np.abs(a[-count:])))


def _check_sign(sign: int) -> None:
    if sign not in (1, -1):
        raise ValueError(f"Factor sign must be +1 or -1, got {sign}")
