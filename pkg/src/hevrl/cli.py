"""Command-line experiment runner.

Subcommands: train-source, train-target, grid, rollout, report, plots.
Flag > config file > profile default; every run writes a manifest that
reproduces it byte-for-byte.  Exit code 0 on success, otherwise a one-line
``error:<category>: <message>`` on stderr with a category-specific code.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, resolve_config
from .cycles import CycleError
from .explore import NoiseSpecError
from .powertrain import PowerLimitError
from .runner import (
    emit_plots,
    run_grid,
    run_report,
    run_rollout,
    run_train_source,
    run_train_target,
)
from .transfer import CheckpointError, MetricError, TransferError

#: (exception class, category, exit code); checked in order.
_ERROR_MAP = (
    (ConfigError, "config", 2),
    (NoiseSpecError, "config", 2),
    (CycleError, "data", 3),
    (MetricError, "data", 3),
    (CheckpointError, "checkpoint", 4),
    (TransferError, "checkpoint", 4),
    (PowerLimitError, "training", 5),
    (FileNotFoundError, "io", 6),
    (OSError, "io", 6),
    (RuntimeError, "training", 5),
    (ValueError, "config", 2),
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI config file (a manifest re-runs a run)")
    parser.add_argument("--seed", type=int, help="master seed (mandatory unless in config)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--profile", choices=("paper", "desk"), help="settings preset")
    parser.add_argument("--cycles", help="comma list of cycle files or packaged names")
    parser.add_argument("--speed-unit", choices=("mps", "kmph"), help="unit of cycle files")
    parser.add_argument("--noise", help="noise spec, e.g. Gaussian_AS(0.06) or TFS")
    parser.add_argument("--sigma2-action", type=float, help="override action-noise variance")
    parser.add_argument("--sigma2-param", type=float, help="override parameter-noise variance")
    parser.add_argument("--episodes", type=int, help="override episode count")
    parser.add_argument("--jobs", type=int, help="parallel grid cells")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hevrl",
        description="Hybrid-vehicle energy-management workbench: train, transfer, evaluate.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)

    p = sub.add_parser("train-source", help="train a fresh agent on the source cycles")
    _add_common(p)

    p = sub.add_parser("train-target", help="train on the target cycle, scratch or transferred")
    _add_common(p)
    p.add_argument("--checkpoint", help="source checkpoint to transfer from (omit for TFS)")

    p = sub.add_parser("grid", help="run the full (target noise) x (source init) grid")
    _add_common(p)
    p.add_argument("--sources", help="comma list: TFS and/or label=checkpoint entries")
    p.add_argument("--target-noises", help="comma list of noise specs for the target axis")

    p = sub.add_parser("rollout", help="trace one episode under a fixed policy")
    _add_common(p)
    p.add_argument("--checkpoint", help="checkpoint whose actor drives the rollout")
    p.add_argument("--constant-u", type=float, help="constant action instead of a network")
    p.add_argument("--cycle-index", type=int, help="which configured cycle to roll")

    p = sub.add_parser("report", help="recompute JP/AP/TT for an existing curve file")
    _add_common(p)
    p.add_argument("--curve", help="curve CSV (episode,return)")

    p = sub.add_parser("plots", help="merge run curves into plot data (and optional PNG)")
    p.add_argument("--config", help="INI config file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--runs", help="comma list of run directories")
    p.add_argument("--png", action="store_true", help="also render an overlay chart")

    return parser


def _overrides_from_args(args: argparse.Namespace) -> dict[str, dict[str, str]]:
    def put(section: str, key: str, value) -> None:
        if value is not None:
            overrides.setdefault(section, {})[key] = str(value)

    overrides: dict[str, dict[str, str]] = {}
    put("run", "seed", getattr(args, "seed", None))
    put("run", "out", getattr(args, "out", None))
    put("run", "profile", getattr(args, "profile", None))
    put("run", "jobs", getattr(args, "jobs", None))
    put("cycles", "paths", getattr(args, "cycles", None))
    put("cycles", "speed_unit", getattr(args, "speed_unit", None))
    put("noise", "spec", getattr(args, "noise", None))
    put("noise", "sigma2_action", getattr(args, "sigma2_action", None))
    put("noise", "sigma2_param", getattr(args, "sigma2_param", None))
    put("hyperparams", "episodes", getattr(args, "episodes", None))
    if args.mode == "rollout":
        put("rollout", "checkpoint", getattr(args, "checkpoint", None))
        put("rollout", "constant_u", getattr(args, "constant_u", None))
        put("rollout", "cycle_index", getattr(args, "cycle_index", None))
    else:
        put("transfer", "checkpoint", getattr(args, "checkpoint", None))
    put("grid", "sources", getattr(args, "sources", None))
    put("grid", "target_noises", getattr(args, "target_noises", None))
    put("report", "curve", getattr(args, "curve", None))
    put("plots", "runs", getattr(args, "runs", None))
    if getattr(args, "png", False):
        put("plots", "png", "true")
    return overrides


def _dispatch(args: argparse.Namespace) -> int:
    cfg = resolve_config(args.mode, args.config, _overrides_from_args(args))
    if args.mode == "train-source":
        result = run_train_source(cfg)
        print(f"trained {len(result.curve)} episodes -> {result.out}")
    elif args.mode == "train-target":
        result = run_train_target(cfg)
        print(f"trained {len(result.curve)} episodes -> {result.out}")
        if result.report is not None:
            print(result.report.row(result.target_noise, result.source_init))
    elif args.mode == "grid":
        grid = run_grid(cfg)
        print(f"grid: {len(grid.rows)} cells ok, {len(grid.errors)} failed -> {grid.out}")
        for row in grid.rows:
            print(row)
    elif args.mode == "rollout":
        trace = run_rollout(cfg)
        print(f"trace -> {trace}")
    elif args.mode == "report":
        report = run_report(cfg)
        tt = "nc" if report.tt is None else report.tt
        print(f"jp={report.jp!r} ap={report.ap!r} tt={tt}")
    elif args.mode == "plots":
        runs = [r for r in cfg.raw["plots"]["runs"].split(",") if r.strip()]
        out = cfg.out / "plot_data.csv"
        missing = emit_plots([r.strip() for r in runs], out, png=cfg.raw["plots"]["png"] == "true")
        print(f"plot data -> {out}" + (f" ({len(missing)} curves missing)" if missing else ""))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except Exception as exc:
        for klass, category, code in _ERROR_MAP:
            if isinstance(exc, klass):
                print(f"error:{category}: {exc}", file=sys.stderr)
                return code
        print(f"error:internal: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
