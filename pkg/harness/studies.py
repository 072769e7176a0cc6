"""Convergence studies and parameter sweeps.

Each run is independent. With jobs > 1 runs are fanned out to worker
processes as dotted-key mappings; results are collected and summarized
here, in submission order.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from config import ConfigError, ExperimentConfig, config_from_mapping, to_mapping, with_overrides

from .output import write_summary_json, write_table_csv
from .runner import run

logger = logging.getLogger("ced-schrodinger")

# Errors below this are treated as round-off, not discretization error.
ERROR_FLOOR = 1e-13


@dataclass
class RunOutcome:
    """The part of a RunResult a study needs."""

    name: str
    status: str
    h: float
    steps: int
    final_error: float
    peak_error: float
    times: list = field(default_factory=list)
    errors: list = field(default_factory=list)


def crossing_time(config: ExperimentConfig) -> float:
    """When the wave first reaches x_r (0 if it never does)."""
    p, x_r = config.problem, config.domain.x_r
    if p.id == "gaussian":
        speed = 16.0 + p.boost
    elif p.id == "soliton":
        speed = p.soliton_c + p.boost
    else:
        return 0.0
    return x_r / speed if speed > 0 else 0.0


def _run_mapping(mapping: dict, source: Optional[str], output_dir: Optional[str], t_min: float) -> RunOutcome:
    config = config_from_mapping(mapping, source=source)
    result = run(config, output_dir=output_dir, write=output_dir is not None)
    report = result.report
    return RunOutcome(
        name=result.name,
        status=result.status,
        h=config.time.h,
        steps=config.time.steps,
        final_error=result.final_error() if result.ok else math.nan,
        peak_error=report.peak(t_min=t_min),
        times=report.times().tolist(),
        errors=report.column(report.norm).tolist(),
    )


def run_many(configs: Sequence[ExperimentConfig], jobs: int = 1, output_dir=None,
             t_min: float = -math.inf) -> list[RunOutcome]:
    """Run configs in order, or concurrently with jobs worker processes."""
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    output_dir = str(output_dir) if output_dir else None
    tasks = [(to_mapping(c), c.source, output_dir, t_min) for c in configs]
    if jobs == 1 or len(tasks) == 1:
        return [_run_mapping(*task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_mapping, *task) for task in tasks]
        return [f.result() for f in futures]


def estimate_order(h: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(h)."""
    h = np.asarray(h, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if h.size < 2 or h.size != errors.size:
        raise ValueError("Order estimate needs at least two (h, error) pairs")
    if np.any(h <= 0) or np.any(errors <= 0):
        raise ValueError("Order estimate needs positive step sizes and errors")
    slope, _ = np.polyfit(np.log(h), np.log(errors), 1)
    return float(slope)


@dataclass
class ConvergenceReport:
    """Final-time error per resolution and the fitted order."""

    scheme: str
    norm: str
    runs: list
    order: float = math.nan
    degenerate: bool = False
    reason: str = ""

    @property
    def columns(self) -> list[str]:
        return ["steps", "h", "error", "status"]

    def rows(self) -> list[list]:
        return [[r.steps, r.h, r.final_error, r.status] for r in self.runs]


def convergence_study(config: ExperimentConfig, resolutions: Sequence[int], jobs: int = 1,
                      output_dir=None) -> ConvergenceReport:
    """Run config at each step count and fit the observed order.

    The fit is flagged degenerate when a run failed, an error sits at the
    round-off floor, or errors do not decrease with h.
    """
    resolutions = sorted({int(n) for n in resolutions})
    if len(resolutions) < 2:
        raise ConfigError("A convergence study needs at least two distinct resolutions")
    configs = [
        with_overrides(config, {"time.steps": str(n), "output.name": f"{config.name}_nt{n}"})
        for n in resolutions
    ]
    outcomes = run_many(configs, jobs=jobs, output_dir=output_dir)
    report = ConvergenceReport(config.time.scheme, config.error_norm, outcomes)

    usable = [o for o in outcomes if o.status == "ok" and np.isfinite(o.final_error) and o.final_error > 0]
    reasons = []
    if len(usable) < len(outcomes):
        reasons.append("failed or zero-error runs")
    if any(o.final_error < ERROR_FLOOR for o in usable):
        reasons.append("errors at the round-off floor")
    errors = [o.final_error for o in usable]
    if any(b >= a for a, b in zip(errors, errors[1:])):
        reasons.append("errors do not decrease with h")
    if len(usable) >= 2:
        report.order = estimate_order([o.h for o in usable], errors)
    else:
        reasons.append("fewer than two usable runs")
    if reasons:
        report.degenerate = True
        report.reason = "; ".join(reasons)
        logger.warning(f"Degenerate convergence fit for {config.name}: {report.reason}")
    logger.info(f"{config.name}: observed order {report.order:.2f} over N_t={resolutions}")

    if output_dir is not None:
        base = Path(output_dir)
        write_table_csv(report.columns, report.rows(), base / f"{config.name}_convergence.csv")
        write_summary_json({
            "name": config.name,
            "scheme": report.scheme,
            "norm": report.norm,
            "order": report.order,
            "degenerate": report.degenerate,
            "reason": report.reason,
            "runs": [{"steps": o.steps, "h": o.h, "error": o.final_error, "status": o.status} for o in outcomes],
        }, base / f"{config.name}_convergence.json")
    return report


@dataclass
class SweepReport:
    """One outcome per parameter value and the value with the smallest peak error."""

    param: str
    values: list
    runs: list
    t_min: float = 0.0
    best: Optional[str] = None

    @property
    def columns(self) -> list[str]:
        return [self.param, "final_error", "peak_error", "status"]

    def rows(self) -> list[list]:
        return [[v, r.final_error, r.peak_error, r.status] for v, r in zip(self.values, self.runs)]


def parameter_sweep(config: ExperimentConfig, param: str, values: Sequence, jobs: int = 1,
                    output_dir=None, t_min: Optional[float] = None) -> SweepReport:
    """Run config once per value of a dotted key.

    The peak error is taken over samples with t >= t_min, by default the
    time the wave reaches the right edge of the window.
    """
    values = [str(v) for v in values]
    if not values:
        raise ConfigError("A sweep needs at least one value")
    t_min = crossing_time(config) if t_min is None else t_min
    safe = param.replace(".", "-")
    configs = [
        with_overrides(config, {param: v, "output.name": f"{config.name}_{safe}-{v}"})
        for v in values
    ]
    outcomes = run_many(configs, jobs=jobs, output_dir=output_dir, t_min=t_min)
    report = SweepReport(param, values, outcomes, t_min)

    peaks = [o.peak_error if o.status == "ok" else math.nan for o in outcomes]
    if any(np.isfinite(peaks)):
        report.best = values[int(np.nanargmin(peaks))]
        logger.info(f"{config.name}: best {param}={report.best} (peak error after t={t_min:g})")
    else:
        logger.warning(f"{config.name}: no successful run in the {param} sweep")

    if output_dir is not None:
        base = Path(output_dir)
        write_table_csv(report.columns, report.rows(), base / f"{config.name}_sweep.csv")
        write_summary_json({
            "name": config.name,
            "param": param,
            "t_min": t_min,
            "best": report.best,
            "runs": [
                {"value": v, "final_error": o.final_error, "peak_error": o.peak_error, "status": o.status}
                for v, o in zip(values, outcomes)
            ],
        }, base / f"{config.name}_sweep.json")
    return report


def sigma_sweep(config: ExperimentConfig, sigma_values: Sequence[float], jobs: int = 1,
                output_dir=None, t_min: Optional[float] = None) -> SweepReport:
    """PML damping sweep over pml.sigma0."""
    if config.boundary.kind != "pml":
        raise ConfigError("A sigma0 sweep needs boundary.kind=pml")
    return parameter_sweep(config, "pml.sigma0", [repr(float(s)) for s in sigma_values],
                           jobs=jobs, output_dir=output_dir, t_min=t_min)
