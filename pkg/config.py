"""Experiment configuration loader.

Experiments are flat key=value files with dotted keys:

    problem.id=gaussian
    boundary.kind=ced
    domain.orders=20,120,600
    time.scheme=cn

Files are parsed with python-dotenv. CEDSCHRO_* environment variables
(CEDSCHRO_TIME__STEPS=1000 sets time.steps) and explicit overrides are
applied on top, in that order.
"""

import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from dotenv import dotenv_values

logger = logging.getLogger("ced-schrodinger")

ENV_PREFIX = "CEDSCHRO_"

PROBLEMS = ("gaussian", "soliton", "peregrine", "perturbed-peregrine")
BOUNDARIES = ("ced", "pml", "tbc")
SCHEMES = ("cn", "irk4")
ERROR_NORMS = ("auto", "delta", "delta_inf")
BETA_RULES = ("printed", "series")

# Problems on a unit background: not square integrable, no PML/TBC.
BACKGROUND_PROBLEMS = ("peregrine", "perturbed-peregrine")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ProblemConfig:
    """Equation and initial data."""

    id: str = "gaussian"
    soliton_a: float = 2.0
    soliton_c: float = 15.0
    amplitude: float = 0.1
    rho: int = -1
    boost: float = 0.0


@dataclass
class DomainConfig:
    """Computational window and per-domain Chebyshev orders."""

    x_l: float = -5.0
    x_r: float = 5.0
    orders: list[int] = field(default_factory=list)


@dataclass
class BoundaryConfig:
    """Boundary treatment."""

    kind: str = "ced"


@dataclass
class TimeConfig:
    """Time integration settings."""

    scheme: str = "cn"
    final: float = 0.5
    steps: int = 1000
    fp_tolerance: float = 1e-8
    fp_max_iters: int = 200

    @property
    def h(self) -> float:
        return self.final / self.steps


@dataclass
class PmlSettings:
    """Layer width and damping amplitude (PML runs only)."""

    delta: Optional[float] = None
    sigma0: Optional[float] = None


@dataclass
class TbcSettings:
    """Convolution weights of the discrete DtN map (TBC runs only)."""

    beta_rule: str = "series"


@dataclass
class ObserverConfig:
    """What is sampled during a run and how often."""

    stride: int = 1
    error: str = "auto"
    energy: bool = False


@dataclass
class OutputConfig:
    """Where results go."""

    dir: str = "results"
    name: str = ""
    field_dump: bool = True


@dataclass
class ExperimentConfig:
    """Main configuration container."""

    problem: ProblemConfig = field(default_factory=ProblemConfig)
    domain: DomainConfig = field(default_factory=DomainConfig)
    boundary: BoundaryConfig = field(default_factory=BoundaryConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    pml: PmlSettings = field(default_factory=PmlSettings)
    tbc: TbcSettings = field(default_factory=TbcSettings)
    observe: ObserverConfig = field(default_factory=ObserverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    source: Optional[str] = None
    # CEDSCHRO_* values that were applied, by dotted key
    environment: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        if self.output.name:
            return self.output.name
        if self.source:
            return Path(self.source).stem
        return f"{self.problem.id}-{self.boundary.kind}-{self.time.scheme}"

    @property
    def is_linear(self) -> bool:
        return self.problem.id == "gaussian"

    @property
    def has_background(self) -> bool:
        return self.problem.id in BACKGROUND_PROBLEMS

    @property
    def error_norm(self) -> str:
        """delta or delta_inf, with "auto" resolved by the problem."""
        if self.observe.error != "auto":
            return self.observe.error
        return "delta_inf" if self.has_background else "delta"

    def validate(self) -> None:
        """Raise ConfigError on any inconsistency."""
        p, d, b, t = self.problem, self.domain, self.boundary, self.time

        if p.id not in PROBLEMS:
            raise ConfigError(f"Unknown problem.id '{p.id}' (expected one of: {', '.join(PROBLEMS)})")
        if b.kind not in BOUNDARIES:
            raise ConfigError(f"Unknown boundary.kind '{b.kind}' (expected one of: {', '.join(BOUNDARIES)})")
        if t.scheme not in SCHEMES:
            raise ConfigError(f"Unknown time.scheme '{t.scheme}' (expected one of: {', '.join(SCHEMES)})")
        if p.rho not in (1, -1):
            raise ConfigError(f"problem.rho must be 1 or -1, got {p.rho}")
        if p.id != "gaussian" and p.rho != -1:
            raise ConfigError(f"Problem '{p.id}' is a focusing solution and needs problem.rho=-1")
        if not p.soliton_a > 0:
            raise ConfigError(f"problem.soliton_a must be positive, got {p.soliton_a}")
        for key, value in (("problem.soliton_c", p.soliton_c), ("problem.amplitude", p.amplitude),
                           ("problem.boost", p.boost)):
            if not math.isfinite(value):
                raise ConfigError(f"{key} must be finite, got {value}")
        if p.boost != 0.0 and self.has_background:
            raise ConfigError("problem.boost is only defined for decaying problems")

        if not d.orders:
            raise ConfigError("domain.orders is required")
        if any(n < 1 for n in d.orders):
            raise ConfigError(f"domain.orders must all be >= 1, got {d.orders}")
        if not d.x_l < d.x_r:
            raise ConfigError(f"domain.x_l must be < domain.x_r, got {d.x_l} >= {d.x_r}")

        if b.kind == "ced":
            if len(d.orders) < 3:
                raise ConfigError(f"CED needs at least three domain orders, got {len(d.orders)}")
            if not (d.x_l < 0 < d.x_r):
                raise ConfigError(f"CED needs x_l < 0 < x_r, got [{d.x_l}, {d.x_r}]")
        elif self.has_background:
            raise ConfigError(f"Problem '{p.id}' lives on a unit background and needs boundary.kind=ced")
        if b.kind == "pml":
            if len(d.orders) != 3:
                raise ConfigError(f"PML needs exactly three domain orders (layer, window, layer), got {len(d.orders)}")
            if self.pml.delta is None or self.pml.sigma0 is None:
                raise ConfigError("PML needs pml.delta and pml.sigma0")
            if not self.pml.delta > 0:
                raise ConfigError(f"pml.delta must be positive, got {self.pml.delta}")
            if self.pml.sigma0 < 0:
                raise ConfigError(f"pml.sigma0 must be >= 0, got {self.pml.sigma0}")
        if b.kind == "tbc":
            if len(d.orders) != 1:
                raise ConfigError(f"TBC uses a single window order, got {len(d.orders)} orders")
            if t.scheme != "cn":
                raise ConfigError("TBC is only available with time.scheme=cn")
            if self.tbc.beta_rule not in BETA_RULES:
                raise ConfigError(f"Unknown tbc.beta_rule '{self.tbc.beta_rule}'")

        if not t.final > 0:
            raise ConfigError(f"time.final must be positive, got {t.final}")
        if t.steps < 1:
            raise ConfigError(f"time.steps must be >= 1, got {t.steps}")
        if not t.fp_tolerance > 0:
            raise ConfigError(f"time.fp_tolerance must be positive, got {t.fp_tolerance}")
        if t.fp_max_iters < 1:
            raise ConfigError(f"time.fp_max_iters must be >= 1, got {t.fp_max_iters}")

        o = self.observe
        if o.stride < 1:
            raise ConfigError(f"observe.stride must be >= 1, got {o.stride}")
        if o.error not in ERROR_NORMS:
            raise ConfigError(f"Unknown observe.error '{o.error}' (expected one of: {', '.join(ERROR_NORMS)})")
        if o.error == "delta" and self.has_background:
            raise ConfigError(f"Problem '{p.id}' is not square integrable; use observe.error=delta_inf")
        if o.energy and b.kind != "ced":
            raise ConfigError("observe.energy needs the whole line (boundary.kind=ced)")


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_orders(value: str) -> list[int]:
    return [int(part) for part in value.replace(" ", "").split(",") if part]


def _parse_int(value: str) -> int:
    # Accept 1e4-style step counts.
    number = float(value)
    if not number.is_integer():
        raise ValueError(f"not an integer: {value!r}")
    return int(number)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# key -> (section, attribute, parser, owning boundary kind or None)
_KEYS = {
    "problem.id": ("problem", "id", str.strip, None),
    "problem.soliton_a": ("problem", "soliton_a", float, None),
    "problem.soliton_c": ("problem", "soliton_c", float, None),
    "problem.amplitude": ("problem", "amplitude", float, None),
    "problem.rho": ("problem", "rho", _parse_int, None),
    "problem.boost": ("problem", "boost", float, None),
    "domain.x_l": ("domain", "x_l", float, None),
    "domain.x_r": ("domain", "x_r", float, None),
    "domain.orders": ("domain", "orders", _parse_orders, None),
    "boundary.kind": ("boundary", "kind", lambda v: v.strip().lower(), None),
    "time.scheme": ("time", "scheme", lambda v: v.strip().lower(), None),
    "time.final": ("time", "final", float, None),
    "time.steps": ("time", "steps", _parse_int, None),
    "time.fp_tolerance": ("time", "fp_tolerance", float, None),
    "time.fp_max_iters": ("time", "fp_max_iters", _parse_int, None),
    "pml.delta": ("pml", "delta", float, "pml"),
    "pml.sigma0": ("pml", "sigma0", float, "pml"),
    "tbc.beta_rule": ("tbc", "beta_rule", lambda v: v.strip().lower(), "tbc"),
    "observe.stride": ("observe", "stride", _parse_int, None),
    "observe.error": ("observe", "error", lambda v: v.strip().lower(), None),
    "observe.energy": ("observe", "energy", _parse_bool, None),
    "output.dir": ("output", "dir", str.strip, None),
    "output.name": ("output", "name", str.strip, None),
    "output.field_dump": ("output", "field_dump", _parse_bool, None),
}

CONFIG_KEYS = tuple(_KEYS)


def config_from_mapping(values: dict, source: Optional[str] = None) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from dotted key/value strings."""
    config = ExperimentConfig(source=source)
    for key, raw in values.items():
        key = key.strip().lower()
        if key not in _KEYS:
            raise ConfigError(f"Unknown config key '{key}'")
        if raw is None:
            raise ConfigError(f"Config key '{key}' has no value")
        section, attr, parser, _ = _KEYS[key]
        try:
            value = parser(str(raw))
        except ValueError as e:
            raise ConfigError(f"Bad value for {key}: {e}") from None
        setattr(getattr(config, section), attr, value)

    kind = config.boundary.kind
    for key in values:
        owner = _KEYS[key.strip().lower()][3]
        if owner is not None and owner != kind:
            raise ConfigError(f"Key '{key}' is not allowed with boundary.kind={kind}")

    config.validate()
    return config


def to_mapping(config: ExperimentConfig) -> dict[str, str]:
    """Dotted key/value strings that rebuild config via config_from_mapping."""
    out = {}
    for key, (section, attr, _, owner) in _KEYS.items():
        if owner is not None and owner != config.boundary.kind:
            continue
        value = getattr(getattr(config, section), attr)
        if value is None:
            continue
        out[key] = _format(value)
    return out


def with_overrides(config: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    """Copy of config with some dotted keys replaced."""
    mapping = to_mapping(config)
    replaced = {k.strip().lower(): v for k, v in overrides.items()}
    mapping.update(replaced)
    updated = config_from_mapping(mapping, source=config.source)
    updated.environment = {k: v for k, v in config.environment.items() if k not in replaced}
    return updated


def parse_overrides(items: Optional[Iterable[str]]) -> dict[str, str]:
    """Turn ["time.steps=100", ...] into a dict."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"Override must look like key=value, got '{item}'")
        key, value = item.split("=", 1)
        out[key.strip().lower()] = value.strip()
    return out


def environment_overrides(environ: Optional[dict] = None) -> dict[str, str]:
    """Dotted keys from CEDSCHRO_* variables."""
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower().replace("__", ".")
        out[key] = value
    return out


def load_config(path: Union[str, Path], overrides: Optional[dict] = None) -> ExperimentConfig:
    """Load an experiment file.

    Args:
        path: Path to the key=value file
        overrides: Dotted keys that win over the file and the environment

    Returns:
        Validated ExperimentConfig.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")

    values = dict(dotenv_values(path))
    explicit = {k.strip().lower(): v for k, v in (overrides or {}).items()}
    applied = {k: v for k, v in environment_overrides().items() if k not in explicit}
    for key, value in sorted(applied.items()):
        logger.info(f"Environment override {ENV_PREFIX}{key.upper().replace('.', '__')}: {key}={value}")
    values.update(applied)
    values.update(explicit)

    config = config_from_mapping(values, source=str(path))
    config.environment = applied
    logger.debug(f"Loaded config from {path}")
    return config
