"""Per-step vehicle states: trace ingestion, synthetic scenarios, prediction.

A *schedule* maps a step index to the vehicles alive at that step. Speed
and heading come from forward differences of the resampled positions; the
last sample of a vehicle falls back to the backward difference.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import TextIO, Union

import numpy as np

from .model import Point, VehicleState

Schedule = dict[int, list[VehicleState]]

TRACE_HEADER = ("time", "vehicle_id", "x", "y")

_GRID_EPS = 1e-9


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    time: float
    vehicle_id: str
    x: float
    y: float


@dataclass(frozen=True)
class SyntheticScenarioSpec:
    """Desk-scale traffic generator settings.

    ``straight_road`` vehicles start at ``origin`` and drive ``length``
    meters along ``heading`` (radians). ``ring_road`` vehicles join a ring
    of ``radius`` around ``center`` at an entry angle and circulate
    counter-clockwise for a dwell drawn from ``dwell``. ``entry_angles`` and
    ``entry_weights`` concentrate ring entries at fixed points; when empty,
    entry angles are uniform. Inter-arrival steps are drawn uniformly from
    ``spawn_interval`` (0 spawns several vehicles in one step).
    """

    kind: str = "ring_road"
    vehicle_count: int = 50
    speed: tuple[float, float] = (8.0, 14.0)
    spawn_interval: tuple[int, int] = (6, 18)
    rng_seed: int = 0
    step_duration: float = 1.0
    length: float = 300.0
    origin: Point = (0.0, 0.0)
    heading: float = 0.0
    radius: float = 40.0
    center: Point = (100.0, 100.0)
    dwell: tuple[int, int] = (20, 60)
    entry_angles: tuple[float, ...] = ()
    entry_weights: tuple[float, ...] = ()
    start_step: int = 0

    def __post_init__(self):
        if self.kind not in ("straight_road", "ring_road"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.vehicle_count < 0:
            raise ValueError("vehicle_count must be >= 0")
        if self.length <= 0 or self.radius <= 0:
            raise ValueError("geometry must be positive")
        lo, hi = self.speed
        if not 0 < lo <= hi:
            raise ValueError("speed range needs 0 < low <= high")
        lo, hi = self.spawn_interval
        if not 0 <= lo <= hi:
            raise ValueError("spawn_interval needs 0 <= low <= high")
        lo, hi = self.dwell
        if not 1 <= lo <= hi:
            raise ValueError("dwell needs 1 <= low <= high")
        if self.step_duration <= 0:
            raise ValueError("step_duration must be > 0")
        if self.entry_weights and len(self.entry_weights) != len(self.entry_angles):
            raise ValueError("entry_weights must match entry_angles")


def _kinematics(positions: list[Point], step_duration: float) -> list[tuple[float, Point]]:
    out = []
    n = len(positions)
    for i in range(n):
        if n == 1:
            out.append((0.0, (0.0, 0.0)))
            continue
        a, b = (positions[i], positions[i + 1]) if i + 1 < n else (positions[i - 1], positions[i])
        dx, dy = b[0] - a[0], b[1] - a[1]
        norm = math.hypot(dx, dy)
        if norm == 0.0:
            out.append((0.0, (0.0, 0.0)))
        else:
            out.append((norm / step_duration, (dx / norm, dy / norm)))
    return out


def _tracks_to_schedule(
    tracks: dict[str, tuple[int, list[Point]]], step_duration: float, onboard_capacity: float
) -> Schedule:
    schedule: Schedule = defaultdict(list)
    for vid, (first_step, positions) in tracks.items():
        for k, (pos, (speed, heading)) in enumerate(
            zip(positions, _kinematics(positions, step_duration))
        ):
            schedule[first_step + k].append(
                VehicleState(vid, pos, speed, heading, onboard_capacity=onboard_capacity)
            )
    return {step: sorted(vs, key=lambda v: v.vehicle_id) for step, vs in sorted(schedule.items())}


def read_trace(source: Union[TextIO, str]) -> list[TraceRecord]:
    """Parse ``time,vehicle_id,x,y`` rows. Line numbers in errors are 1-based."""
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    records: list[TraceRecord] = []
    header = next(reader, None)
    if header is None:
        return records
    if tuple(h.strip() for h in header) != TRACE_HEADER:
        raise TraceError(f"line 1: expected header {','.join(TRACE_HEADER)}")
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise TraceError(f"line {line}: expected 4 fields, got {len(row)}")
        try:
            t, x, y = float(row[0]), float(row[2]), float(row[3])
        except ValueError as exc:
            raise TraceError(f"line {line}: {exc}") from None
        vid = row[1].strip()
        if not vid:
            raise TraceError(f"line {line}: empty vehicle_id")
        if not (math.isfinite(t) and math.isfinite(x) and math.isfinite(y)):
            raise TraceError(f"line {line}: non-finite value")
        if t < 0:
            raise TraceError(f"line {line}: time must be >= 0")
        records.append(TraceRecord(t, vid, x, y))
    return records


def ingest_trace(
    source: Union[TextIO, str], step_duration: float, onboard_capacity: float = 1.3
) -> Schedule:
    """Resample a position trace onto the uniform step grid.

    Step ``k`` sits at time ``k * step_duration``. A vehicle lives on every
    grid step between its first and last record; positions in between are
    linearly interpolated in x and y.
    """
    per_vehicle: dict[str, list[TraceRecord]] = defaultdict(list)
    for rec in read_trace(source):
        per_vehicle[rec.vehicle_id].append(rec)

    tracks: dict[str, tuple[int, list[Point]]] = {}
    for vid, recs in per_vehicle.items():
        for a, b in zip(recs, recs[1:]):
            if not b.time > a.time:
                raise TraceError(f"vehicle {vid}: non-monotone time at t={b.time}")
        times = np.array([r.time for r in recs])
        xs = np.array([r.x for r in recs])
        ys = np.array([r.y for r in recs])
        first = math.ceil(times[0] / step_duration - _GRID_EPS)
        last = math.floor(times[-1] / step_duration + _GRID_EPS)
        if last < first:
            continue
        grid = np.arange(first, last + 1) * step_duration
        grid = np.clip(grid, times[0], times[-1])
        px = np.interp(grid, times, xs)
        py = np.interp(grid, times, ys)
        tracks[vid] = (first, [(float(x), float(y)) for x, y in zip(px, py)])
    return _tracks_to_schedule(tracks, step_duration, onboard_capacity)


def _straight_track(spec: SyntheticScenarioSpec, speed: float) -> list[Point]:
    advance = speed * spec.step_duration
    steps = max(1, math.ceil(spec.length / advance - _GRID_EPS))
    ux, uy = math.cos(spec.heading), math.sin(spec.heading)
    x0, y0 = spec.origin
    return [(x0 + ux * advance * k, y0 + uy * advance * k) for k in range(steps)]


def _ring_track(spec: SyntheticScenarioSpec, speed: float, theta0: float, dwell: int) -> list[Point]:
    omega = speed * spec.step_duration / spec.radius
    cx, cy = spec.center
    return [
        (cx + spec.radius * math.cos(theta0 + omega * k), cy + spec.radius * math.sin(theta0 + omega * k))
        for k in range(dwell)
    ]


def synthetic_tracks(spec: SyntheticScenarioSpec) -> dict[str, tuple[int, list[Point]]]:
    rng = np.random.default_rng(spec.rng_seed)
    tracks = {}
    step = spec.start_step
    width = len(str(max(spec.vehicle_count - 1, 0)))
    for i in range(spec.vehicle_count):
        if i > 0:
            step += int(rng.integers(spec.spawn_interval[0], spec.spawn_interval[1] + 1))
        speed = float(rng.uniform(*spec.speed))
        vid = f"v{i:0{width}d}"
        if spec.kind == "straight_road":
            tracks[vid] = (step, _straight_track(spec, speed))
            continue
        if spec.entry_angles:
            weights = np.asarray(spec.entry_weights or [1.0] * len(spec.entry_angles), dtype=float)
            theta0 = float(spec.entry_angles[rng.choice(len(weights), p=weights / weights.sum())])
        else:
            theta0 = float(rng.uniform(0.0, 2 * math.pi))
        dwell = int(rng.integers(spec.dwell[0], spec.dwell[1] + 1))
        tracks[vid] = (step, _ring_track(spec, speed, theta0, dwell))
    return tracks


def generate_synthetic(spec: SyntheticScenarioSpec, onboard_capacity: float = 1.3) -> Schedule:
    """Deterministic schedule for ``spec`` (same seed, same schedule)."""
    return _tracks_to_schedule(synthetic_tracks(spec), spec.step_duration, onboard_capacity)


def write_trace(schedule: Schedule, out: TextIO, step_duration: float = 1.0) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for step in sorted(schedule):
        for v in schedule[step]:
            writer.writerow([repr(step * step_duration), v.vehicle_id, repr(v.position[0]), repr(v.position[1])])


def predict_position(v: VehicleState, horizon: float, step_duration: float) -> Point:
    """Linear dead-reckoning ``horizon`` steps ahead."""
    reach = v.speed * horizon * step_duration
    return (v.position[0] + v.direction[0] * reach, v.position[1] + v.direction[1] * reach)


def load_schedule(source, step_duration: float, onboard_capacity: float = 1.3) -> Schedule:
    """Resolve a trace path, a synthetic spec, or an in-memory schedule."""
    if source is None:
        return {}
    if isinstance(source, SyntheticScenarioSpec):
        if source.step_duration != step_duration:
            source = replace(source, step_duration=step_duration)
        return generate_synthetic(source, onboard_capacity)
    if isinstance(source, dict):
        return source
    with open(source, newline="", encoding="utf-8") as fh:
        return ingest_trace(fh, step_duration, onboard_capacity)
