"""Command-line entry point.

Subcommands: run, trials, slope-study, sobolev-study, patchsize-study,
catalog.  Flags mirror the RunConfig fields; a config file can seed the
defaults and individual flags override it.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from . import simulate, studies
from .config import RunConfig, load_config, render_config
from .pipeline import StageError, render_report, render_trial_summary, \
    run_pipeline, run_trials, write_artifacts


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="config file (key = value lines)")
    parser.add_argument("--input", help="scenario name or grid file")
    parser.add_argument("--noise-percent", type=float, dest="noise_percent")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--nx", type=int)
    parser.add_argument("--nt", type=int)
    parser.add_argument("--downsample-x", type=int, dest="downsample_x")
    parser.add_argument("--n-p", type=int, dest="n_p")
    parser.add_argument("--beta", type=float)
    parser.add_argument("--r-threshold", type=float, dest="r_threshold")
    parser.add_argument("--k-max", type=int, dest="k_max")
    parser.add_argument("--trim-threshold", type=float,
                        dest="trim_threshold")
    parser.add_argument("--m0", type=int)
    parser.add_argument("--reg", type=float)
    parser.add_argument("--n-basis", type=int, dest="n_basis")
    parser.add_argument("--lam", type=float)
    parser.add_argument("--levels", help="comma-separated confidence levels")
    parser.add_argument("--trials", type=int)
    parser.add_argument("--denoise-window", type=int, dest="denoise_window")
    parser.add_argument("--denoise-window-t", type=int, dest="denoise_window_t")
    parser.add_argument("--denoise-passes", type=int, dest="denoise_passes")
    parser.add_argument("--output-dir", dest="output_dir")


def _build_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    for f in dataclasses.fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is None:
            continue
        if f.name == "levels":
            value = tuple(float(v) for v in value.split(",") if v.strip())
        setattr(config, f.name, value)
    return config.validate()


def _emit(config: RunConfig, name: str, text: str):
    sys.stdout.write(text)
    if config.output_dir:
        os.makedirs(config.output_dir, exist_ok=True)
        path = os.path.join(config.output_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="phaseident",
        description="Identify two-phase PDEs and their phase boundary "
                    "from space-time data.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
            ("run", "single pipeline run"),
            ("trials", "repeated runs under distinct seeds"),
            ("slope-study", "boundary-slope sweep"),
            ("sobolev-study", "peak discrepancy vs local Sobolev norm"),
            ("patchsize-study", "patch size effect on CEE and JSC")):
        p = sub.add_parser(name, help=helptext)
        _add_config_flags(p)
    sub.add_parser("catalog", help="list built-in scenarios")

    args = parser.parse_args(argv)
    if args.command == "catalog":
        for sc in simulate.catalog():
            kind = "two-phase" if sc.two_phase else "single-phase"
            print(f"{sc.name:>18}  {kind}  {sc.nx}x{sc.nt}  "
                  f"x in [{sc.x_min:g}, {sc.x_max:g}]  T = {sc.t_max:g}")
        return 0

    try:
        config = _build_config(args)
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "run":
            result = run_pipeline(config)
            write_artifacts(result)
            sys.stdout.write(render_report(result))
        elif args.command == "trials":
            summary = run_trials(config)
            _emit(config, "trials.txt", render_trial_summary(summary, config))
        elif args.command == "slope-study":
            rows = studies.slope_study(config)
            _emit(config, "slope_study.txt", studies.render_slope_study(rows))
        elif args.command == "sobolev-study":
            rows = studies.sobolev_study(config)
            _emit(config, "sobolev_study.txt",
                  studies.render_sobolev_study(rows))
        elif args.command == "patchsize-study":
            rows = studies.patchsize_study(config)
            _emit(config, "patchsize_study.txt",
                  studies.render_patchsize_study(rows))
    except StageError as exc:
        print(f"pipeline error {exc}", file=sys.stderr)
        print("resolved config:", file=sys.stderr)
        print(render_config(config), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
