"""Command-line entry point: ``nudgeda run|convergence|plotdata``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import ConfigInvalidError, NudgeDAError
from .harness import (CONVERGENCE_KINDS, PLOT_KINDS, PRESETS, ExperimentConfig, RunReport,
                      emit_plot_data, parse_override, preset, run_convergence, run_experiment)

SEED_ENV = "NUDGEDA_SEED"


def _apply_seed_env(cfg: ExperimentConfig) -> ExperimentConfig:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "" or "seed" not in cfg.parameters:
        return cfg
    try:
        seed = int(raw)
    except ValueError as exc:
        raise ConfigInvalidError(f"{SEED_ENV}={raw!r} is not an integer") from exc
    return cfg.with_overrides(seed=seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nudgeda", description="Nudging-based state and force recovery.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a JSON-configured experiment")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--config", help="path to an ExperimentConfig JSON file")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                     help="override one parameter (value parsed as JSON when possible)")
    run.add_argument("--out", help="output directory")

    conv = sub.add_parser("convergence", help="refinement study of a building block")
    conv.add_argument("--kind", choices=CONVERGENCE_KINDS, required=True)
    conv.add_argument("--levels", type=int, default=3)
    conv.add_argument("--out", help="output directory")

    plot = sub.add_parser("plotdata", help="write plot-ready CSVs from a run report")
    plot.add_argument("--report", required=True, help="path to report.json")
    plot.add_argument("--what", choices=PLOT_KINDS, required=True)
    plot.add_argument("--out", help="output directory (default: <run>/plotdata)")
    return parser


def _summary(report: RunReport) -> str:
    lines = [f"{report.config['experiment']}: {report.wall_time:.1f} s -> {report.output_dir}"]
    for k, v in sorted(report.terminal_errors.items()):
        if isinstance(v, dict):
            continue
        lines.append(f"  {k} = {v:.6g}")
    for k, v in sorted(report.decay_rates.items()):
        lines.append(f"  rate {k} = {v:.4g}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            overrides = dict(parse_override(s) for s in args.overrides)
            if args.preset:
                cfg = preset(args.preset, args.out, **overrides)
            else:
                cfg = ExperimentConfig.from_json(args.config)
                cfg = ExperimentConfig(cfg.experiment, {**cfg.parameters, **overrides},
                                       args.out or cfg.output_dir)
            report = run_experiment(_apply_seed_env(cfg))
            print(_summary(report))
        elif args.command == "convergence":
            report = run_convergence(args.kind, args.levels, args.out)
            print(_summary(report))
        else:
            report = RunReport.read(args.report)
            for path in emit_plot_data(report, args.what, args.out):
                print(path)
    except ConfigInvalidError as exc:
        print(f"nudgeda: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except NudgeDAError as exc:
        print(f"nudgeda: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
