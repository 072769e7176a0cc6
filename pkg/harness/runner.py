"""Experiment construction and execution."""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

from boundary_pml import PmlConfig, assemble_pml, build_pml_decomposition
from boundary_tbc import TbcStepper, TbcWorkspace, build_tbc_workspace
from config import ExperimentConfig, to_mapping
from integrators import (
    IterationStats,
    SchemeConfig,
    StepFailure,
    StepWorkspace,
    build_workspace,
    propagate,
)
from multidomain import (
    CompositeField,
    Decomposition,
    assemble,
    ced_decomposition,
    window_decomposition,
)
from problems import (
    ExactSolution,
    PotentialSpec,
    galilei_boost,
    gaussian_solution,
    peregrine_solution,
    perturbed_peregrine_initial,
    soliton_solution,
)

from .observers import ErrorReport, SampleObserver
from .output import write_coefficient_snapshots, write_field_dump, write_report_csv, write_summary_json

logger = logging.getLogger("ced-schrodinger")


@dataclass
class Experiment:
    """Everything needed to propagate one configured run."""

    config: ExperimentConfig
    decomposition: Decomposition
    potential: PotentialSpec
    exact: Optional[ExactSolution]
    initial: CompositeField
    workspace: Union[StepWorkspace, TbcWorkspace]
    step_fn: Optional[Callable] = None
    window_index: Optional[int] = None

    @property
    def window(self) -> str:
        return "whole_line" if self.config.boundary.kind == "ced" else "computational"


@dataclass
class RunResult:
    """Outcome of run(): the report, final field and written files."""

    name: str
    status: str
    report: ErrorReport
    final: Optional[CompositeField] = None
    stats: IterationStats = field(default_factory=IterationStats)
    wall_time: float = 0.0
    failure: Optional[dict] = None
    outputs: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def final_error(self) -> float:
        return self.report.final_error()


def build_problem(config: ExperimentConfig) -> tuple[PotentialSpec, Optional[ExactSolution]]:
    """Potential and exact solution (None for the perturbed breather)."""
    p = config.problem
    if p.id == "gaussian":
        potential, exact = PotentialSpec.zero(), gaussian_solution()
    elif p.id == "soliton":
        potential, exact = PotentialSpec.cubic(p.rho), soliton_solution(p.soliton_a, p.soliton_c)
    elif p.id == "peregrine":
        potential, exact = PotentialSpec.cubic(p.rho), peregrine_solution()
    else:
        potential, exact = PotentialSpec.cubic(p.rho), None
    if exact is not None and p.boost:
        exact = galilei_boost(exact, p.boost)
    return potential, exact


def scheme_config(config: ExperimentConfig) -> SchemeConfig:
    t = config.time
    return SchemeConfig.for_final_time(
        t.scheme, t.final, t.steps, fp_tolerance=t.fp_tolerance, fp_max_iters=t.fp_max_iters,
    )


def build_experiment(config: ExperimentConfig) -> Experiment:
    """Decomposition, operator, prefactored workspace and initial data."""
    d, kind = config.domain, config.boundary.kind
    potential, exact = build_problem(config)
    scheme = scheme_config(config)
    nonlinearity = potential.nonlinearity()
    window_index = None

    if kind == "ced":
        decomp = ced_decomposition(d.x_l, d.x_r, d.orders)
        operator = assemble(decomp, potential.diagonal(decomp))
    elif kind == "pml":
        layout = build_pml_decomposition(d.x_l, d.x_r, PmlConfig(config.pml.delta, config.pml.sigma0), d.orders)
        decomp = layout.decomposition
        operator = assemble_pml(layout, potential.diagonal(decomp))
        window_index = layout.window_index
    else:
        decomp = window_decomposition(d.x_l, d.x_r, d.orders[0])
        operator = None

    if config.problem.id == "perturbed-peregrine":
        initial = perturbed_peregrine_initial(decomp, config.problem.amplitude)
    else:
        initial = exact.sample(decomp, 0.0)

    if operator is None:
        workspace = build_tbc_workspace(decomp, scheme, potential.diagonal(decomp), nonlinearity,
                                        config.tbc.beta_rule)
        step_fn = TbcStepper(workspace, initial.values)
    else:
        workspace = build_workspace(operator, scheme, nonlinearity)
        step_fn = None

    logger.info(f"{config.name}: {kind} {decomp.describe()}")
    return Experiment(config, decomp, potential, exact, initial, workspace, step_fn, window_index)


def _output_paths(config: ExperimentConfig, output_dir: Optional[Path]) -> dict:
    base = Path(output_dir or config.output.dir)
    name = config.name
    paths = {
        "report": base / f"{name}.csv",
        "summary": base / f"{name}.json",
        "coefficients": base / f"{name}_coeffs.csv",
    }
    if config.output.field_dump:
        paths["field"] = base / f"{name}_field.csv"
    return paths


def run(config: ExperimentConfig, output_dir: Optional[Union[str, Path]] = None, write: bool = True) -> RunResult:
    """Propagate a configured experiment and write its results.

    A StepFailure does not propagate: the samples taken so far are still
    written and the result (and JSON summary) carry status "failed" with
    the failure diagnostics.
    """
    experiment = build_experiment(config)
    observer = SampleObserver(
        experiment.decomposition,
        experiment.exact,
        norm=config.error_norm,
        window_index=experiment.window_index,
        energy=config.observe.energy,
    )
    ws = experiment.workspace
    result = RunResult(config.name, "ok", observer.report, stats=ws.stats)

    logger.info(f"{config.name}: {config.time.scheme} h={ws.h:g} steps={config.time.steps}")
    start = time.perf_counter()
    try:
        outcome = propagate(experiment.initial.values, ws, [observer],
                            stride=config.observe.stride, step_fn=experiment.step_fn)
        result.final = CompositeField(outcome.final, experiment.decomposition)
    except StepFailure as e:
        result.status = "failed"
        result.failure = e.diagnostics()
        logger.error(f"{config.name}: run failed at step {e.step}: {e}")
    result.wall_time = time.perf_counter() - start

    result.summary = build_summary(config, experiment, result)
    if write:
        paths = _output_paths(config, Path(output_dir) if output_dir else None)
        result.outputs["report"] = write_report_csv(result.report, paths["report"])
        snapshots = observer.snapshots()
        if snapshots:
            result.outputs["coefficients"] = write_coefficient_snapshots(snapshots, paths["coefficients"])
        if result.final is not None and "field" in paths:
            exact = experiment.exact.sample(experiment.decomposition, config.time.final) if experiment.exact else None
            result.outputs["field"] = write_field_dump(result.final, exact, paths["field"])
        result.summary["outputs"] = {k: str(v) for k, v in result.outputs.items()}
        result.outputs["summary"] = write_summary_json(result.summary, paths["summary"])

    logger.info(f"{config.name}: {result.status} in {result.wall_time:.2f}s, final {config.error_norm}={result.final_error():.3e}")
    return result


def build_summary(config: ExperimentConfig, experiment: Experiment, result: RunResult) -> dict:
    report = result.report
    final = report.final
    summary = {
        "name": config.name,
        "status": result.status,
        "config": to_mapping(config),
        "decomposition": {
            "description": experiment.decomposition.describe(),
            "orders": [dm.n_order for dm in experiment.decomposition.domains],
            "total_size": experiment.decomposition.total_size,
        },
        "scheme": config.time.scheme,
        "h": experiment.workspace.h,
        "steps": config.time.steps,
        "final_time": config.time.final,
        "error_norm": config.error_norm,
        "window": experiment.window,
        "samples": len(report),
        "wall_time": result.wall_time,
        "iterations": result.stats.as_dict(),
        "final": {name: value for name, value in zip(report.columns, final.row())} if final else {},
        "max": {name: report.peak(name) for name in ("delta", "delta_inf", "delta_E")},
        "environment": dict(config.environment),
    }
    if result.failure is not None:
        summary["failure"] = result.failure
    return summary
