"""Command-line interface.

Verbs:

- ``simulate``: generate a scenario and write its sensor stream CSV.
- ``calibrate``: run the calibration pipeline on a CSV (or an inline
  simulated scenario) and write the report plus plot-data CSVs.
- ``selftest``: run the built-in invariant suite.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import Config, dump_config, load_config
from .exceptions import GyrocalError


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key=value config file")
    p.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--motion", choices=(
        "static", "handheld", "phoning", "dangling", "pocket", "belt", "backpack"
    ), help="override the motion mode")
    p.add_argument("--env", choices=("outdoor", "indoor"), help="override the magnetic environment")


def _build_config(args: argparse.Namespace) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "motion", None):
        cfg.motion = args.motion
    if getattr(args, "env", None):
        cfg.env = args.env
    return cfg


def _cmd_simulate(args: argparse.Namespace) -> int:
    from .io import write_stream_csv
    from .simulator import simulate_scenario

    cfg = _build_config(args)
    _, stream = simulate_scenario(cfg.scenario(), with_mag=not args.no_mag)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out = args.out_dir / f"scenario_{cfg.motion}_{cfg.env}_seed{cfg.seed}.csv"
    write_stream_csv(out, stream)
    (args.out_dir / "scenario_config.txt").write_text(dump_config(cfg))
    print(f"wrote {out}")
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    from .io import read_stream_csv
    from .metrics import emit_plot_data
    from .pipeline import run_pipeline

    cfg = _build_config(args)
    stream = read_stream_csv(args.input) if args.input else None
    report = run_pipeline(cfg, stream=stream, use_mag=not args.no_mag)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    text = report.to_text()
    (args.out_dir / "report.txt").write_text(text)
    paths = emit_plot_data(report, args.out_dir)
    sys.stdout.write(text)
    for kind, path in paths.items():
        print(f"wrote {kind}: {path}")
    return 0


def _cmd_selftest(args: argparse.Namespace) -> int:
    from .selftest import run_selftest

    return run_selftest(verbose=True)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="gyrocal",
        description="Autonomous MEMS gyro calibration from natural pedestrian motion",
    )
    parser.add_argument("--version", action="version", version=f"gyrocal {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a scenario sensor-stream CSV")
    _add_common(p_sim)
    p_sim.add_argument("--no-mag", action="store_true", help="omit magnetometer columns")
    p_sim.set_defaults(func=_cmd_simulate)

    p_cal = sub.add_parser("calibrate", help="run calibration on a CSV or simulated scenario")
    _add_common(p_cal)
    p_cal.add_argument("--in", dest="input", type=Path, help="input stream CSV (default: simulate)")
    p_cal.add_argument("--no-mag", action="store_true", help="disable magnetometer updates")
    p_cal.set_defaults(func=_cmd_calibrate)

    p_st = sub.add_parser("selftest", help="run the built-in invariant suite")
    p_st.set_defaults(func=_cmd_selftest)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GyrocalError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
