"""Command-line entry point.

Subcommands mirror the experiment families: `manufactured`,
`resolution-sweep`, `param-sweep`, and `ode-study`.  Each accepts
`--config <path>` (flat key = value file), per-key overrides such as
`--alpha 0.5`, and `--out <dir>`.  Exit codes: 0 success, 2 configuration
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys
import time

from .config import ConfigError, parse_kv_file
from . import experiments, reporting


def _add_experiment_options(sub: argparse.ArgumentParser, cls) -> None:
    for key, spec in cls.FIELDS.items():
        sub.add_argument(
            "--" + key.replace("_", "-"),
            dest=f"key_{key}",
            metavar="VALUE",
            help=spec.help,
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pagd",
        description="Preconditioned (accelerated) gradient descent experiments "
        "on periodic spectral grids.",
    )
    subparsers = parser.add_subparsers(dest="experiment", required=True)
    for name, cls in experiments.EXPERIMENTS.items():
        sub = subparsers.add_parser(name, help=f"run the {name} experiment")
        sub.add_argument("--config", metavar="PATH", help="flat key = value file")
        sub.add_argument("--out", metavar="DIR", default="pagd-out",
                         help="output directory (default: pagd-out)")
        sub.add_argument("--plots", action=argparse.BooleanOptionalAction,
                         default=True, help="render PNG figures next to the CSVs")
        _add_experiment_options(sub, cls)
    return parser


_RUNNERS = {
    "manufactured": (experiments.run_manufactured, reporting.emit_manufactured),
    "resolution-sweep": (experiments.run_resolution_sweep, reporting.emit_resolution_sweep),
    "param-sweep": (experiments.run_param_sweep, reporting.emit_param_sweep),
    "ode-study": (experiments.run_ode_study, reporting.emit_ode_study),
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cls = experiments.EXPERIMENTS[args.experiment]
    overrides = {
        key: value
        for key in cls.FIELDS
        if (value := getattr(args, f"key_{key}")) is not None
    }
    try:
        file_values = parse_kv_file(args.config) if args.config else {}
        cfg = experiments.build_config(cls, file_values, overrides)
    except (ConfigError, OSError) as exc:
        print(f"pagd: configuration error: {exc}", file=sys.stderr)
        return 2

    runner, emitter = _RUNNERS[args.experiment]
    started = time.perf_counter()
    result = runner(cfg)
    elapsed = time.perf_counter() - started

    try:
        written = emitter(result, args.out, plots=args.plots,
                          timings={"run": elapsed})
    except OSError as exc:
        print(f"pagd: I/O error: {exc}", file=sys.stderr)
        return 3

    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
