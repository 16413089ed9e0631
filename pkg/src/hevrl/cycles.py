"""Driving-cycle ingestion, validation, and synthesis.

A driving cycle is a time-indexed vehicle speed trace on a uniform grid
(default 1 Hz, matching standard cycle tabulations).  Per-step acceleration
is derived by forward difference so that ``acc[k]`` describes the transition
from sample ``k`` to ``k+1``; the final sample carries ``acc = 0``.

Cycle files are plain CSV with a ``time,speed`` header.  The speed unit must
be declared explicitly (``mps`` or ``kmph``); silent unit bugs are the
dominant failure mode for cycle data, so there is no auto-detection.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np

log = logging.getLogger(__name__)

KMPH_TO_MPS = 1.0 / 3.6

SPEED_UNITS = ("mps", "kmph")


class CycleError(ValueError):
    """Base error for cycle loading and validation."""


class CycleFormatError(CycleError):
    """Malformed cycle file (bad header, non-numeric row, ...)."""


class CycleValidationError(CycleError):
    """Physically invalid trace (negative speed, non-monotone time)."""


@dataclass(frozen=True)
class CycleSample:
    """One sample: time [s], speed [m/s], acceleration [m/s^2]."""

    t: float
    v: float
    acc: float


@dataclass(frozen=True)
class DrivingCycle:
    """Uniformly sampled speed trace with derived acceleration.

    Immutable after construction; safe to share across threads.
    """

    name: str
    dt: float
    t: np.ndarray
    v: np.ndarray
    acc: np.ndarray

    def __post_init__(self):
        for arr in (self.t, self.v, self.acc):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def samples(self) -> list[CycleSample]:
        return [
            CycleSample(float(t), float(v), float(a))
            for t, v, a in zip(self.t, self.v, self.acc)
        ]

    @property
    def n_steps(self) -> int:
        """Number of environment transitions this cycle supports."""
        return len(self.t) - 1


@dataclass(frozen=True)
class CycleStats:
    duration: float
    distance: float
    v_max: float
    v_mean: float


def _derive_acc(v: np.ndarray, dt: float) -> np.ndarray:
    acc = np.zeros_like(v)
    if len(v) > 1:
        acc[:-1] = np.diff(v) / dt
    return acc


def cycle_from_speeds(name: str, v: Iterable[float], dt: float = 1.0) -> DrivingCycle:
    """Build a cycle from a uniformly sampled speed sequence in m/s."""
    v = np.asarray(list(v), dtype=float)
    if dt <= 0:
        raise CycleValidationError(f"dt must be positive, got {dt}")
    if v.size == 0:
        raise CycleValidationError("cycle must contain at least one sample")
    if np.any(v < 0):
        k = int(np.argmax(v < 0))
        raise CycleValidationError(f"negative speed {v[k]} at sample {k}")
    if v[0] != 0.0:
        log.warning("cycle %r does not start at rest (v[0] = %.3f m/s)", name, v[0])
    t = np.arange(v.size, dtype=float) * dt
    return DrivingCycle(name=name, dt=dt, t=t, v=v, acc=_derive_acc(v, dt))


def load_cycle(
    path: str | Path,
    speed_unit: str,
    dt: float = 1.0,
    name: str | None = None,
) -> DrivingCycle:
    """Load a ``time,speed`` CSV and resample it onto a uniform grid.

    Parameters
    ----------
    path : str or Path
        CSV file with a header line ``time,speed`` and one sample per row.
        UTF-8, LF or CRLF.
    speed_unit : {"mps", "kmph"}
        Unit of the speed column.  Must be given explicitly.
    dt : float
        Target sample interval in seconds.  Non-uniform input is linearly
        interpolated onto ``t[0] + k*dt``.
    name : str, optional
        Cycle name; defaults to the file stem.

    Raises
    ------
    CycleFormatError
        Missing/bad header or a non-numeric row (reported with its line
        number).
    CycleValidationError
        Negative speed or non-monotone time.
    """
    if speed_unit not in SPEED_UNITS:
        raise CycleValidationError(
            f"speed_unit must be one of {SPEED_UNITS}, got {speed_unit!r}"
        )
    if dt <= 0:
        raise CycleValidationError(f"dt must be positive, got {dt}")
    path = Path(path)
    times: list[float] = []
    speeds: list[float] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CycleFormatError(f"{path}: empty file") from None
        cols = [c.strip().lower() for c in header]
        if cols[:2] != ["time", "speed"]:
            raise CycleFormatError(
                f"{path}: expected header 'time,speed', got {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise CycleFormatError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                times.append(float(row[0]))
                speeds.append(float(row[1]))
            except ValueError:
                raise CycleFormatError(
                    f"{path}:{lineno}: non-numeric row {','.join(row)!r}"
                ) from None
    if not times:
        raise CycleFormatError(f"{path}: no samples")
    t_raw = np.asarray(times)
    v_raw = np.asarray(speeds)
    if np.any(np.diff(t_raw) <= 0):
        k = int(np.argmax(np.diff(t_raw) <= 0))
        raise CycleValidationError(
            f"{path}: time not strictly increasing at row {k + 2} (t = {t_raw[k + 1]})"
        )
    if np.any(v_raw < 0):
        k = int(np.argmax(v_raw < 0))
        raise CycleValidationError(f"{path}: negative speed at row {k + 2}")
    if speed_unit == "kmph":
        v_raw = v_raw * KMPH_TO_MPS

    n = int(np.floor((t_raw[-1] - t_raw[0]) / dt + 1e-9)) + 1
    t = t_raw[0] + np.arange(n, dtype=float) * dt
    v = np.interp(t, t_raw, v_raw)
    # Re-base so the cycle clock starts at zero regardless of the file's origin.
    t = t - t[0]
    return cycle_from_speeds(name or path.stem, v, dt)


def resample(cycle: DrivingCycle, dt: float) -> DrivingCycle:
    """Linearly resample a cycle to a new uniform interval."""
    if dt <= 0:
        raise CycleValidationError(f"dt must be positive, got {dt}")
    n = int(np.floor((cycle.t[-1] - cycle.t[0]) / dt + 1e-9)) + 1
    t = cycle.t[0] + np.arange(n, dtype=float) * dt
    v = np.interp(t, cycle.t, cycle.v)
    return cycle_from_speeds(cycle.name, v, dt)


def cycle_stats(cycle: DrivingCycle) -> CycleStats:
    """Duration [s], distance [m] (sum of v[k]*dt), max and mean speed [m/s]."""
    return CycleStats(
        duration=float(cycle.t[-1] - cycle.t[0]),
        distance=float(np.sum(cycle.v) * cycle.dt),
        v_max=float(np.max(cycle.v)),
        v_mean=float(np.mean(cycle.v)),
    )


def synth_trapezoid(
    v_peak: float, t_rise: float, t_hold: float, t_fall: float, dt: float = 1.0
) -> DrivingCycle:
    """Synthesize a 0 -> v_peak -> v_peak -> 0 trapezoidal speed profile.

    Desk-scale test cycle: the rise and fall are linear ramps, so derived
    acceleration is exact and the distance equals the trapezoid area.
    """
    if dt <= 0:
        raise CycleValidationError(f"dt must be positive, got {dt}")
    if v_peak <= 0:
        raise CycleValidationError(f"v_peak must be positive, got {v_peak}")
    for label, dur in (("t_rise", t_rise), ("t_hold", t_hold), ("t_fall", t_fall)):
        if dur < dt:
            raise CycleValidationError(f"{label} must be >= dt, got {dur} < {dt}")
    knots_t = np.array([0.0, t_rise, t_rise + t_hold, t_rise + t_hold + t_fall])
    knots_v = np.array([0.0, v_peak, v_peak, 0.0])
    n = int(np.floor(knots_t[-1] / dt + 1e-9)) + 1
    t = np.arange(n, dtype=float) * dt
    v = np.interp(t, knots_t, knots_v)
    name = f"trapezoid_{v_peak:g}mps"
    return cycle_from_speeds(name, v, dt)


# -- packaged cycle data -------------------------------------------------------

#: Named cycles shipped with the package (all stored in m/s at 1 Hz).
PACKAGED_CYCLES = ("nedc", "nedc_excerpt", "urban", "urban_excerpt", "trapezoid")


def packaged_cycle_path(name: str) -> Path:
    """Filesystem path of a packaged cycle CSV (see ``PACKAGED_CYCLES``)."""
    if name not in PACKAGED_CYCLES:
        raise CycleError(f"unknown packaged cycle {name!r}; have {PACKAGED_CYCLES}")
    return Path(resources.files("hevrl.data") / "cycles" / f"{name}.csv")


def resolve_cycle(spec: str, speed_unit: str = "mps", dt: float = 1.0) -> DrivingCycle:
    """Load either a packaged cycle (by bare name) or a user CSV (by path)."""
    if spec in PACKAGED_CYCLES:
        return load_cycle(packaged_cycle_path(spec), "mps", dt=dt, name=spec)
    return load_cycle(spec, speed_unit, dt=dt)
