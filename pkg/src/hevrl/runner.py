"""Experiment orchestration: seeded runs, the transfer grid, and emitters.

Every run writes its fully resolved manifest before any compute, then a
``episode,return`` curve file and mode-specific artifacts (checkpoint,
report row, trace).  Float fields are written with ``repr`` so files are
byte-identical across re-runs of the same manifest.

Grid cells are seeded by a counter-free derivation from the master seed and
the two cell labels (CRC32 of each label feeds a SeedSequence), so adding or
removing a cell never perturbs any other cell's seed.
"""

from __future__ import annotations

import csv
import logging
import re
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ddpg, transfer
from .config import CANONICAL_LABELS, ExperimentConfig, write_manifest
from .cycles import resolve_cycle
from .ddpg import Agent, make_agent, train
from .env import CycleEnv, State, normalize_state, rollout
from .explore import NoiseSpec
from .net import forward
from .transfer import (
    REPORT_HEADER,
    AdaptationReport,
    MetricError,
    load_checkpoint,
    save_checkpoint,
    transfer_init,
)

log = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.ini"
CURVE_FILE = "curve.csv"
CHECKPOINT_FILE = "checkpoint.ckpt"
REPORT_FILE = "report.csv"
TRACE_FILE = "trace.csv"
SUMMARY_FILE = "summary.csv"


def derive_rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Two independent, reproducible streams: (agent init/replay, exploration)."""
    agent_ss, explore_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(agent_ss), np.random.default_rng(explore_ss)


def cell_seed(master_seed: int, target_label: str, source_label: str) -> int:
    """Stable per-cell seed; independent of the grid's size or ordering."""
    ss = np.random.SeedSequence(
        [master_seed, zlib.crc32(target_label.encode()), zlib.crc32(source_label.encode())]
    )
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _slug(label: str) -> str:
    return re.sub(r"[^\w.+-]+", "_", label).strip("_")


def build_env(cfg: ExperimentConfig) -> CycleEnv:
    cycles = [resolve_cycle(spec, cfg.speed_unit, cfg.dt) for spec in cfg.cycle_specs]
    return CycleEnv(cycles, cfg.build_driveline(), cfg.build_reward())


def write_curve(curve: list[float], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("episode,return\n")
        for episode, value in enumerate(curve):
            fh.write(f"{episode},{float(value)!r}\n")


def read_curve(path: str | Path) -> list[float]:
    values = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [c.strip().lower() for c in header[:2]] != ["episode", "return"]:
            raise ValueError(f"{path}: expected header 'episode,return'")
        for row in reader:
            if row:
                values.append(float(row[1]))
    return values


def _write_report_csv(report: AdaptationReport | None, target_noise: str, source_init: str, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(REPORT_HEADER) + "\n")
        if report is not None:
            fh.write(report.row(target_noise, source_init) + "\n")


def adapted_report(curve: list[float], w) -> AdaptationReport | None:
    """build_report with windows clamped to the curve length.

    The configured windows assume the profile's episode count; when a run is
    shortened (e.g. --episodes during smoke tests) the report is computed
    over what exists instead of failing.  Curves shorter than 20 episodes get
    no convergence detection (tt = None); empty curves get no report.
    """
    n = len(curve)
    if n == 0:
        return None
    jp_window = min(w.jp_window, n)
    ap_end = min(w.ap_end, n)
    ap_start = min(w.ap_start, ap_end - 1)
    report = AdaptationReport(
        jp=transfer.jumpstart(curve, jp_window),
        ap=transfer.asymptotic(curve, ap_start, ap_end),
        tt=(
            transfer.time_to_threshold(curve, min(w.tt_window, n), w.band, ap_start, ap_end)
            if n >= 20
            else None
        ),
        curve=tuple(float(r) for r in curve),
    )
    return report


@dataclass
class RunResult:
    out: Path
    curve: list[float]
    report: AdaptationReport | None = None
    target_noise: str = ""
    source_init: str = ""


def run_train_source(cfg: ExperimentConfig) -> RunResult:
    """Train a fresh agent on the source cycles and checkpoint it."""
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(cfg, out / MANIFEST_FILE)

    env = build_env(cfg)
    hp = cfg.build_hyperparams()
    noise = cfg.build_noise()
    agent_rng, explore_rng = derive_rngs(cfg.seed)
    agent = make_agent(
        hp, agent_rng,
        actor_arch=ddpg.actor_specs(cfg.hidden),
        critic_arch=ddpg.critic_specs(cfg.hidden),
    )
    curve = train(agent, env, noise, hp.episodes, explore_rng)
    write_curve(curve, out / CURVE_FILE)
    save_checkpoint(
        agent,
        {
            "noise": noise.label(),
            "cycles": ";".join(cfg.cycle_specs),
            "seed": str(cfg.seed),
            "episodes": str(hp.episodes),
            "profile": cfg.profile,
        },
        out / CHECKPOINT_FILE,
    )
    return RunResult(out=out, curve=curve, source_init=noise.label())


def run_train_target(cfg: ExperimentConfig) -> RunResult:
    """Train on the target cycles, from scratch (TFS) or from a checkpoint."""
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(cfg, out / MANIFEST_FILE)

    env = build_env(cfg)
    hp = cfg.build_hyperparams()
    noise = cfg.build_noise()
    agent_rng, explore_rng = derive_rngs(cfg.seed)
    if cfg.checkpoint is not None:
        source = load_checkpoint(cfg.checkpoint)
        agent = transfer_init(source, hp, agent_rng, networks=cfg.transfer_networks)
        source_init = source.meta.get("noise", "unknown")
    else:
        agent = make_agent(
            hp, agent_rng,
            actor_arch=ddpg.actor_specs(cfg.hidden),
            critic_arch=ddpg.critic_specs(cfg.hidden),
        )
        source_init = "TFS"

    curve = train(agent, env, noise, hp.episodes, explore_rng)
    write_curve(curve, out / CURVE_FILE)

    report = adapted_report(curve, cfg.metric_windows())
    _write_report_csv(report, noise.label(), source_init, out / REPORT_FILE)
    save_checkpoint(
        agent,
        {
            "noise": noise.label(),
            "source_init": source_init,
            "cycles": ";".join(cfg.cycle_specs),
            "seed": str(cfg.seed),
            "episodes": str(hp.episodes),
            "profile": cfg.profile,
        },
        out / CHECKPOINT_FILE,
    )
    return RunResult(
        out=out, curve=curve, report=report,
        target_noise=noise.label(), source_init=source_init,
    )


def _canonical_index(label: str) -> tuple[int, str]:
    for k, prefix in enumerate(CANONICAL_LABELS):
        if label == prefix or label.startswith(prefix + "("):
            return k, label
    return len(CANONICAL_LABELS), label


def _grid_cell_config(
    cfg: ExperimentConfig, target_noise: str, source_label: str, source_path: str
) -> ExperimentConfig:
    cell_dir = cfg.out / "cells" / f"{_slug(target_noise)}__{_slug(source_label)}"
    return cfg.derived(
        {
            "run": {
                "seed": str(cell_seed(cfg.seed, target_noise, source_label)),
                "out": str(cell_dir),
            },
            "noise": {"spec": target_noise},
            "transfer": {"checkpoint": source_path},
        },
        mode="train-target",
    )


def _run_grid_cell(args: tuple) -> tuple[str, str, str, str]:
    """Worker for one grid cell; returns (target, source, row_or_None, error)."""
    mode, raw, target_noise, source_label = args
    cfg = ExperimentConfig(mode=mode, raw=raw)
    try:
        result = run_train_target(cfg)
        if result.report is None:
            return target_noise, source_label, "", "empty curve (0 episodes)"
        row = result.report.row(result.target_noise, source_label)
        return target_noise, source_label, row, ""
    except Exception as exc:  # cell failures must not sink the grid
        return target_noise, source_label, "", f"{type(exc).__name__}: {exc}"


@dataclass
class GridResult:
    out: Path
    rows: list[str]
    errors: list[tuple[str, str, str]]


def run_grid(cfg: ExperimentConfig) -> GridResult:
    """Run every (target noise) x (source init) cell and write one summary."""
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(cfg, out / MANIFEST_FILE)

    cells = []
    for target_noise in cfg.grid_target_noises:
        canonical = NoiseSpec.parse(target_noise).label()
        for source_label, source_path in cfg.grid_sources:
            cell_cfg = _grid_cell_config(cfg, canonical, source_label, source_path)
            cells.append((cell_cfg.mode, cell_cfg.raw, canonical, source_label))

    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(_run_grid_cell, cells))
    else:
        outcomes = [_run_grid_cell(c) for c in cells]

    outcomes.sort(key=lambda o: (_canonical_index(o[0]), _canonical_index(o[1])))
    rows, errors = [], []
    with open(out / SUMMARY_FILE, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(REPORT_HEADER) + ",status\n")
        for target_noise, source_label, row, error in outcomes:
            if error:
                errors.append((target_noise, source_label, error))
                status = error.replace(",", ";").replace("\n", " ")
                fh.write(f"{target_noise},{source_label},,,,{status}\n")
            else:
                rows.append(row)
                fh.write(row + ",ok\n")
    if errors:
        log.warning("grid finished with %d failed cells", len(errors))
    return GridResult(out=out, rows=rows, errors=errors)


def run_rollout(cfg: ExperimentConfig) -> Path:
    """Roll a fixed policy over a cycle and write the step trace."""
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(cfg, out / MANIFEST_FILE)

    env = build_env(cfg)
    section = cfg.raw["rollout"]
    cycle_index = int(section["cycle_index"])
    agent_rng, _ = derive_rngs(cfg.seed)

    if section["checkpoint"].strip():
        ckpt = load_checkpoint(section["checkpoint"].strip())
        agent = transfer.agent_from_checkpoint(ckpt, cfg.build_hyperparams(), agent_rng)

        def policy(state: State) -> float:
            return float(forward(agent.actor, normalize_state(state))[0])

    elif section["constant_u"].strip():
        u_const = float(section["constant_u"])

        def policy(state: State) -> float:
            return u_const

    else:
        agent = make_agent(
            cfg.build_hyperparams(), agent_rng,
            actor_arch=ddpg.actor_specs(cfg.hidden),
            critic_arch=ddpg.critic_specs(cfg.hidden),
        )

        def policy(state: State) -> float:
            return float(forward(agent.actor, normalize_state(state))[0])

    episode = rollout(policy, env, cycle_index)
    trace_path = out / TRACE_FILE
    episode.write_csv(trace_path)
    return trace_path


def run_report(cfg: ExperimentConfig) -> AdaptationReport:
    """Recompute JP/AP/TT for an existing curve file."""
    curve_path = cfg.raw["report"]["curve"].strip()
    if not curve_path:
        raise ValueError("report.curve must point at a curve file")
    curve = read_curve(curve_path)
    report = adapted_report(curve, cfg.metric_windows())
    if report is None:
        raise MetricError(f"{curve_path}: empty curve, nothing to report")
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(cfg, out / MANIFEST_FILE)
    _write_report_csv(report, cfg.build_noise().label(), "TFS", out / REPORT_FILE)
    return report


def emit_plots(run_dirs: list[str | Path], out_path: str | Path, png: bool = False) -> list[str]:
    """Merge run curves into one long-format file `series,episode,return`.

    Series are named by run directory and ordered by name.  Missing curves
    are reported (and returned) but do not abort; partial output is allowed.
    Set `png` to also render an overlay chart next to the output file.
    """
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    series = []
    missing = []
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        curve_path = run_dir / CURVE_FILE if run_dir.is_dir() else run_dir
        if not curve_path.exists():
            missing.append(str(curve_path))
            continue
        series.append((run_dir.name if run_dir.is_dir() else run_dir.stem, read_curve(curve_path)))
    series.sort(key=lambda item: item[0])

    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("series,episode,return\n")
        for name, curve in series:
            for episode, value in enumerate(curve):
                fh.write(f"{name},{episode},{value!r}\n")

    if png and series:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(8, 5))
        for name, curve in series:
            ax.plot(range(len(curve)), curve, label=name, linewidth=1.2)
        ax.set_xlabel("episode")
        ax.set_ylabel("return")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(out_path.with_suffix(".png"), dpi=130)
        plt.close(fig)

    for path in missing:
        log.warning("no curve found at %s", path)
    return missing
