#!/usr/bin/env python3
"""Regenerate the packaged cycle CSVs (deterministic, no fetched data).

* nedc          -- built exactly from the regulation's piecewise segments:
                   four ECE-15 urban cycles followed by the EUDC, 1 Hz,
                   speeds converted km/h -> m/s.  1181 samples, 1180 s.
* nedc_excerpt  -- NEDC t in [49, 117] rebased to 0 (the second urban hump:
                   accelerate to 32 km/h, cruise, brake, idle).  Desk-scale
                   target cycle.
* urban         -- synthetic stop-and-go urban profile (three hills, peak
                   16 m/s).  NOT a published table; it stands in for
                   empirical urban cycles that cannot be redistributed here.
* urban_excerpt -- first hill of `urban` (100 s).  Desk-scale source cycle.
* trapezoid     -- 0 -> 12 m/s -> 0 ramp/hold/ramp, 21 samples.
* ftp75         -- derived from data/cycles/udds.csv when the user has
                   placed the published table there (cold + transient phases
                   then the first 505 s again as the hot phase; soak
                   omitted).  Skipped otherwise.

Usage: python scripts/make_cycles.py [--out DIR]
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "hevrl" / "data" / "cycles"

# (duration s, speed at segment start km/h, speed at segment end km/h)
ECE15_SEGMENTS = [
    (11, 0, 0), (4, 0, 15), (8, 15, 15), (5, 15, 0), (21, 0, 0),
    (12, 0, 32), (24, 32, 32), (11, 32, 0), (21, 0, 0),
    (26, 0, 50), (12, 50, 50), (8, 50, 35), (13, 35, 35), (12, 35, 0), (7, 0, 0),
]  # 195 s

EUDC_SEGMENTS = [
    (20, 0, 0), (41, 0, 70), (50, 70, 70), (8, 70, 50), (69, 50, 50),
    (13, 50, 70), (50, 70, 70), (35, 70, 100), (30, 100, 100),
    (20, 100, 120), (10, 120, 120), (34, 120, 0), (20, 0, 0),
]  # 400 s

# Synthetic urban profile knots: (t s, v m/s).
URBAN_KNOTS = [
    (0, 0.0), (15, 0.0), (25, 8.5), (40, 11.0), (55, 9.0), (70, 12.5),
    (85, 12.5), (100, 0.0), (115, 0.0), (130, 13.5), (160, 13.5),
    (175, 7.0), (190, 10.0), (205, 0.0), (220, 0.0), (240, 16.0),
    (270, 16.0), (290, 0.0), (300, 0.0),
]


def _segments_to_knots(segments) -> tuple[np.ndarray, np.ndarray]:
    knot_t, knot_v = [0.0], [segments[0][1] / 3.6]
    t = 0.0
    for duration, _, v_end in segments:
        t += duration
        knot_t.append(t)
        knot_v.append(v_end / 3.6)
    return np.array(knot_t), np.array(knot_v)


def nedc_trace() -> tuple[np.ndarray, np.ndarray]:
    knot_t, knot_v = [], []
    offset = 0.0
    for _ in range(4):
        t, v = _segments_to_knots(ECE15_SEGMENTS)
        knot_t.extend(t + offset)
        knot_v.extend(v)
        offset += t[-1]
    t, v = _segments_to_knots(EUDC_SEGMENTS)
    knot_t.extend(t + offset)
    knot_v.extend(v)
    grid = np.arange(0.0, knot_t[-1] + 0.5, 1.0)
    return grid, np.interp(grid, knot_t, knot_v)


def write_cycle(path: Path, t: np.ndarray, v: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time", "speed"])
        for ti, vi in zip(t, v):
            writer.writerow([f"{ti:g}", repr(float(vi))])
    print(f"wrote {path} ({len(t)} samples, max {v.max():.2f} m/s)")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = parser.parse_args()
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)

    t, v = nedc_trace()
    write_cycle(out / "nedc.csv", t, v)

    lo, hi = 49, 117
    write_cycle(out / "nedc_excerpt.csv", t[lo : hi + 1] - t[lo], v[lo : hi + 1])

    knot_t = np.array([k[0] for k in URBAN_KNOTS], dtype=float)
    knot_v = np.array([k[1] for k in URBAN_KNOTS], dtype=float)
    grid = np.arange(0.0, knot_t[-1] + 0.5, 1.0)
    urban = np.interp(grid, knot_t, knot_v)
    write_cycle(out / "urban.csv", grid, urban)
    write_cycle(out / "urban_excerpt.csv", grid[:101], urban[:101])

    trap_t = np.array([0.0, 6.0, 14.0, 20.0])
    trap_v = np.array([0.0, 12.0, 12.0, 0.0])
    grid = np.arange(0.0, 20.5, 1.0)
    write_cycle(out / "trapezoid.csv", grid, np.interp(grid, trap_t, trap_v))

    udds = out / "udds.csv"
    if udds.exists():
        times, speeds = [], []
        with open(udds, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                if row:
                    times.append(float(row[0]))
                    speeds.append(float(row[1]))
        hot = speeds[1:506]
        t_all = np.arange(len(speeds) + len(hot), dtype=float)
        write_cycle(out / "ftp75.csv", t_all, np.array(speeds + hot))
    else:
        print(f"note: {udds} not present; skipped ftp75 derivation")


if __name__ == "__main__":
    main()
