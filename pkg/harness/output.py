"""CSV and JSON writers for run results."""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Optional

import numpy as np

from multidomain import CompositeField, map_to_physical

from .observers import CoefficientSnapshot, ErrorReport, domain_label

logger = logging.getLogger("ced-schrodinger")

FIELD_COLUMNS = ("domain", "x", "re_u", "im_u", "re_exact", "im_exact")
COEFFICIENT_COLUMNS = ("t", "domain", "n", "re_a", "im_a", "abs_a")


def format_float(value) -> str:
    """Shortest string that reads back to the same float."""
    return repr(float(value))


def write_report_csv(report: ErrorReport, path: Path) -> Path:
    """One row per sample, header from report.columns."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(report.columns)
        for row in report.rows():
            writer.writerow([format_float(v) for v in row])
    logger.debug(f"Wrote {len(report)} samples to {path}")
    return path


def read_report_csv(path: Path) -> tuple[list[str], np.ndarray]:
    """Header and float rows of a file written by write_report_csv."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def write_table_csv(columns: list[str], rows: list[list], path: Path) -> Path:
    """Small summary tables (convergence, sweeps)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return path


def write_field_dump(values: CompositeField, exact: Optional[CompositeField], path: Path) -> Path:
    """Final field per node with its exact counterpart (nan when unknown)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    reference = exact.split() if exact is not None else None
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(FIELD_COLUMNS)
        for k, (domain, part) in enumerate(zip(values.decomposition.domains, values.split())):
            x = map_to_physical(domain, domain.points)
            ref = reference[k] if reference is not None else np.full(part.shape, complex(math.nan, math.nan))
            for xj, uj, ej in zip(x, part, ref):
                writer.writerow([
                    domain_label(k), format_float(xj),
                    format_float(uj.real), format_float(uj.imag),
                    format_float(ej.real), format_float(ej.imag),
                ])
    logger.debug(f"Wrote field dump to {path}")
    return path


def write_coefficient_snapshots(snapshots: list[CoefficientSnapshot], path: Path) -> Path:
    """Every Chebyshev coefficient of every domain, one row per (t, domain, n)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(COEFFICIENT_COLUMNS)
        for snapshot in snapshots:
            for k, coeffs in enumerate(snapshot.coefficients):
                for n, a in enumerate(np.asarray(coeffs, dtype=complex)):
                    writer.writerow([
                        format_float(snapshot.t), domain_label(k), n,
                        format_float(a.real), format_float(a.imag), format_float(abs(a)),
                    ])
    logger.debug(f"Wrote {len(snapshots)} coefficient snapshots to {path}")
    return path


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def write_summary_json(summary: dict, path: Path) -> Path:
    """Run metadata; non-finite floats become null."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(_jsonable(summary), f, indent=2, sort_keys=True)
        f.write("\n")
    return path
