#!/usr/bin/env python3
"""ced-schrodinger - Entry point."""

import argparse
import logging
import sys

from config import ConfigError, load_config, parse_overrides
from harness import (
    convergence_study,
    list_presets,
    parameter_sweep,
    preset_description,
    resolve_preset,
    run,
    sigma_sweep,
)
from multidomain import DomainError

__version__ = "0.1.0"

logger = logging.getLogger("ced-schrodinger")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def setup_logging(verbose=False, log_file=None):
    """Configure logging."""
    level = logging.DEBUG if verbose else logging.INFO
    fmt = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    handlers = []

    if log_file:
        handlers.append(logging.FileHandler(log_file))
    else:
        handlers.append(logging.StreamHandler())

    logging.basicConfig(level=level, format=fmt, handlers=handlers)


def parse_args(argv=None):
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        prog="ced-schrodinger",
        description="Whole-line Schrodinger solver: compactified exterior domains, PML and TBC",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s presets                                   List bundled experiments
  %(prog)s run linear-ced                            Run a bundled preset
  %(prog)s run my.conf --set time.steps=10000        Override a config key
  %(prog)s sweep linear-pml --values 40 50 60        Tune the PML damping
  %(prog)s converge linear-ced --resolutions 1000 3000 10000 --jobs 3
        """,
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="store_true",
        help="Enable verbose (debug) logging",
    )
    parser.add_argument(
        "--log-file",
        metavar="FILE",
        help="Path to log file (default: stderr)",
    )

    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    def add_config_args(sub):
        sub.add_argument("config", metavar="CONFIG", help="Config file path or bundled preset name")
        sub.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="Override a config key (repeatable)",
        )
        sub.add_argument(
            "--output-dir",
            metavar="DIR",
            help="Directory for result files (default: output.dir from the config)",
        )

    run_cmd = commands.add_parser("run", help="Run one experiment")
    add_config_args(run_cmd)

    sweep_cmd = commands.add_parser("sweep", help="Run one experiment per parameter value")
    add_config_args(sweep_cmd)
    sweep_cmd.add_argument(
        "--param",
        default="pml.sigma0",
        metavar="KEY",
        help="Dotted config key to vary (default: pml.sigma0)",
    )
    sweep_cmd.add_argument("--values", nargs="+", required=True, metavar="VALUE", help="Values to try")
    sweep_cmd.add_argument("--jobs", type=int, default=1, metavar="N", help="Worker processes (default: 1)")

    converge_cmd = commands.add_parser("converge", help="Estimate the order of convergence in time")
    add_config_args(converge_cmd)
    converge_cmd.add_argument(
        "--resolutions",
        nargs="+",
        type=int,
        required=True,
        metavar="N_T",
        help="Step counts to run",
    )
    converge_cmd.add_argument("--jobs", type=int, default=1, metavar="N", help="Worker processes (default: 1)")

    commands.add_parser("presets", help="List bundled presets")
    return parser.parse_args(argv)


def _load(args):
    path = resolve_preset(args.config)
    config = load_config(path, parse_overrides(args.set))
    logger.info(f"Loaded config from {path}")
    return config


def cmd_run(args):
    config = _load(args)
    result = run(config, output_dir=args.output_dir)
    print(f"{result.name}: {result.status}")
    final = result.report.final
    if final is not None:
        print(f"  t={final.t:g} {result.report.norm}={result.final_error():.6e}")
    print(f"  iterations: mean {result.stats.mean:.2f}, max {result.stats.max}")
    for kind, path in result.outputs.items():
        print(f"  {kind}: {path}")
    if not result.ok:
        print(f"FAILED: {result.failure['message']} (step {result.failure['step']})", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_sweep(args):
    config = _load(args)
    output_dir = args.output_dir or config.output.dir
    if args.param == "pml.sigma0":
        try:
            values = [float(v) for v in args.values]
        except ValueError as e:
            raise ConfigError(f"Bad pml.sigma0 value: {e}") from None
        report = sigma_sweep(config, values, jobs=args.jobs, output_dir=output_dir)
    else:
        report = parameter_sweep(config, args.param, args.values, jobs=args.jobs, output_dir=output_dir)
    print(f"{config.name}: {args.param} sweep, peak error after t={report.t_min:g}")
    for value, outcome in zip(report.values, report.runs):
        print(f"  {args.param}={value}: peak {outcome.peak_error:.6e} final {outcome.final_error:.6e} [{outcome.status}]")
    print(f"  best: {report.best}")
    if any(o.status != "ok" for o in report.runs):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_converge(args):
    config = _load(args)
    output_dir = args.output_dir or config.output.dir
    report = convergence_study(config, args.resolutions, jobs=args.jobs, output_dir=output_dir)
    print(f"{config.name}: {report.scheme} convergence ({report.norm})")
    for outcome in report.runs:
        print(f"  N_t={outcome.steps} h={outcome.h:.3e} error={outcome.final_error:.6e} [{outcome.status}]")
    print(f"  order: {report.order:.3f}" + (f" (degenerate: {report.reason})" if report.degenerate else ""))
    if any(o.status != "ok" for o in report.runs):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_presets(args):
    for name in list_presets():
        print(f"{name:24s} {preset_description(name)}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "converge": cmd_converge,
    "presets": cmd_presets,
}


def main(argv=None):
    """Main entry point."""
    args = parse_args(argv)
    setup_logging(verbose=args.verbose, log_file=args.log_file)
    logger.debug(f"ced-schrodinger v{__version__} command={args.command}")

    try:
        code = COMMANDS[args.command](args)
    except (ConfigError, DomainError) as e:
        logger.error(f"Configuration error: {e}")
        print(f"Error: {e}", file=sys.stderr)
        code = EXIT_CONFIG
    sys.exit(code)


if __name__ == "__main__":
    main()
