"""Experiment harness: presets, observers, runs and studies."""

from .base import PRESETS_DIR, list_presets, preset_description, resolve_preset
from .observers import CoefficientSnapshot, ErrorReport, ErrorSample, SampleObserver, domain_label
from .output import (
    read_report_csv,
    write_coefficient_snapshots,
    write_field_dump,
    write_report_csv,
    write_summary_json,
)
from .runner import Experiment, RunResult, build_experiment, build_problem, run
from .studies import (
    ConvergenceReport,
    SweepReport,
    convergence_study,
    crossing_time,
    estimate_order,
    parameter_sweep,
    sigma_sweep,
)

__all__ = ["PRESETS_DIR", "list_presets", "preset_description", "resolve_preset", "CoefficientSnapshot", "ErrorReport", "ErrorSample", "SampleObserver", "domain_label", "read_report_csv", "write_coefficient_snapshots", "write_field_dump", "write_report_csv", "write_summary_json", "Experiment", "RunResult", "build_experiment", "build_problem", "run", "ConvergenceReport", "SweepReport", "convergence_study", "crossing_time", "estimate_order", "parameter_sweep", "sigma_sweep"]
