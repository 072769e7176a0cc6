"""Sampling observers and the error time series they fill."""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from cheb_core import tail_magnitude, to_coefficients
from multidomain import CompositeField, Decomposition
from problems import (
    ExactSolution,
    energy_functional,
    error_delta,
    error_delta_inf,
    mass,
)

logger = logging.getLogger("ced-schrodinger")

# Trailing coefficients above this mean a domain is under-resolved.
TAIL_WARNING = 1e-12

BASE_COLUMNS = ("t", "delta", "delta_inf", "delta_E")
EXTRA_COLUMNS = ("delta_initial", "mass")

_ROMAN = ((10, "X"), (9, "IX"), (5, "V"), (4, "IV"), (1, "I"))


def domain_label(index: int) -> str:
    """Roman numeral for the domain at 0-based index (I, II, III, ...)."""
    number = index + 1
    out = ""
    for value, letters in _ROMAN:
        while number >= value:
            out += letters
            number -= value
    return out


@dataclass
class ErrorSample:
    """One row of the time series; nan where a quantity is undefined."""

    t: float
    delta: float = math.nan
    delta_inf: float = math.nan
    delta_E: float = math.nan
    delta_initial: float = math.nan
    mass: float = math.nan
    tail_coeff: list = field(default_factory=list)

    def row(self) -> list[float]:
        return [self.t, self.delta, self.delta_inf, self.delta_E, *self.tail_coeff, self.delta_initial, self.mass]


@dataclass
class ErrorReport:
    """Time series of error norms and coefficient decay, one sample per row."""

    domain_count: int
    norm: str = "delta"
    samples: list = field(default_factory=list)

    @property
    def columns(self) -> list[str]:
        tails = (f"tail_coeff_{domain_label(k)}" for k in range(self.domain_count))
        return [*BASE_COLUMNS, *tails, *EXTRA_COLUMNS]

    def __len__(self) -> int:
        return len(self.samples)

    def add(self, sample: ErrorSample) -> None:
        if len(sample.tail_coeff) != self.domain_count:
            raise ValueError(f"Sample has {len(sample.tail_coeff)} tail values, expected {self.domain_count}")
        if self.samples and not sample.t > self.samples[-1].t:
            raise ValueError(f"Sample time {sample.t} does not follow {self.samples[-1].t}")
        self.samples.append(sample)

    def column(self, name: str) -> np.ndarray:
        index = self.columns.index(name)
        return np.array([s.row()[index] for s in self.samples], dtype=float)

    def times(self) -> np.ndarray:
        return self.column("t")

    def rows(self) -> list[list[float]]:
        return [s.row() for s in self.samples]

    @property
    def final(self) -> Optional[ErrorSample]:
        return self.samples[-1] if self.samples else None

    def final_error(self) -> float:
        """Last value of the report's error norm column."""
        if not self.samples:
            return math.nan
        return float(self.column(self.norm)[-1])

    def peak(self, name: Optional[str] = None, t_min: float = -math.inf, t_max: float = math.inf) -> float:
        """Largest value of a column over t_min <= t <= t_max (nan if none)."""
        name = name or self.norm
        if not self.samples:
            return math.nan
        t = self.times()
        values = self.column(name)
        mask = (t >= t_min) & (t <= t_max) & np.isfinite(values)
        return float(values[mask].max()) if mask.any() else math.nan


@dataclass
class CoefficientSnapshot:
    """Chebyshev coefficients of every domain at one sample time."""

    t: float
    coefficients: list

    @classmethod
    def of(cls, t: float, values: CompositeField) -> "CoefficientSnapshot":
        return cls(float(t), [to_coefficients(part) for part in values.split()])


def restrict(values: CompositeField, index: int) -> CompositeField:
    """The part of a field on one domain, as a single-domain field."""
    decomp = Decomposition((values.decomposition.domains[index],))
    return CompositeField(values.domain_values(index), decomp)


class SampleObserver:
    """Fills an ErrorReport from (step, t, u) callbacks.

    With window_index set (PML), errors and mass are taken on that domain
    only; otherwise on the whole decomposition.
    """

    def __init__(self, decomposition: Decomposition, exact: Optional[ExactSolution] = None,
                 norm: str = "delta", window_index: Optional[int] = None, energy: bool = False,
                 report: Optional[ErrorReport] = None):
        if norm not in ("delta", "delta_inf"):
            raise ValueError(f"Unknown error norm '{norm}'")
        self.decomposition = decomposition
        self.exact = exact
        self.norm = norm
        self.window_index = window_index
        self.energy = energy
        self.report = report or ErrorReport(len(decomposition.domains), norm)
        self.initial_norm = math.nan
        self.initial_energy = math.nan
        self.initial_snapshot: Optional[CoefficientSnapshot] = None
        self._last: Optional[tuple[float, CompositeField]] = None
        self._warned = set()

    def _window(self, values: CompositeField) -> CompositeField:
        if self.window_index is None:
            return values
        return restrict(values, self.window_index)

    def __call__(self, step: int, t: float, u: np.ndarray) -> ErrorSample:
        current = CompositeField(u, self.decomposition)
        sample = ErrorSample(t=float(t))
        window = self._window(current)
        l2 = self.norm == "delta"

        if l2:
            sample.mass = mass(window)
            if step == 0:
                self.initial_norm = math.sqrt(sample.mass)

        if self.exact is not None:
            reference = self._window(self.exact.sample(self.decomposition, t))
            sample.delta_inf = error_delta_inf(window, reference)
            if l2:
                sample.delta = error_delta(window, reference)
                if self.initial_norm > 0:
                    diff = CompositeField(window.values - reference.values, window.decomposition)
                    sample.delta_initial = math.sqrt(max(mass(diff), 0.0)) / self.initial_norm

        if self.energy:
            e = energy_functional(current)
            if step == 0:
                self.initial_energy = e
            if self.initial_energy != 0 and math.isfinite(self.initial_energy):
                sample.delta_E = abs(1.0 - e / self.initial_energy)

        sample.tail_coeff = [tail_magnitude(part) for part in current.split()]
        for k, tail in enumerate(sample.tail_coeff):
            if tail > TAIL_WARNING and k not in self._warned:
                self._warned.add(k)
                logger.warning(f"Domain {domain_label(k)}: trailing Chebyshev coefficient {tail:.2e} at t={t:g}")

        self.report.add(sample)
        if step == 0:
            self.initial_snapshot = CoefficientSnapshot.of(t, current)
        self._last = (float(t), CompositeField(np.array(current.values), self.decomposition))
        logger.debug(
            f"t={t:.6g} {self.norm}={getattr(sample, self.norm):.3e} "
            f"tail={max(sample.tail_coeff):.1e}"
        )
        return sample

    def snapshots(self) -> list[CoefficientSnapshot]:
        """Coefficients at t = 0 and at the last sample taken."""
        out = [self.initial_snapshot] if self.initial_snapshot is not None else []
        if self._last is not None and (not out or self._last[0] > out[0].t):
            out.append(CoefficientSnapshot.of(*self._last))
        return out
