"""Load fairness, QoS statistics, handover counters and result export."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

STEP_COLUMNS = ("step", "gini", "qos_min", "qos_q25", "qos_avg", "qos_q75", "vehicle_count")
TRIGGERS = ("RANGE", "LOAD_BALANCING", "OVERLOAD")
OUTCOMES = ("SUCCESS", "FAILED")
EVENT_COLUMNS = ("step", "vehicle_id", "source", "target", "trigger", "outcome", "target_utilization")


def gini(loads: Sequence[float]) -> float:
    """Gini coefficient of uncapped RSU loads; 0 when every RSU is idle."""
    x = np.asarray(loads, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("no enabled RSUs")
    mu = x.mean()
    if mu == 0.0:
        return 0.0
    # sorted form of the pairwise double sum: sum_ij |xi - xj| = 2 sum_i (2i - n - 1) x_(i)
    xs = np.sort(x)
    ranks = np.arange(1, n + 1)
    pair_sum = 2.0 * np.sum((2 * ranks - n - 1) * xs)
    # cancellation can leave -1e-17 for equal loads
    return max(0.0, float(pair_sum / (2.0 * n * n * mu)))


@dataclass(frozen=True)
class QosSnapshot:
    qos_min: float
    qos_q25: float
    qos_avg: float
    qos_q75: float
    vehicle_count: int


def summarize_qos(values: Iterable[float]) -> QosSnapshot:
    """Min, mean and linear-interpolation quartiles; all 1.0 for no vehicles."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        return QosSnapshot(1.0, 1.0, 1.0, 1.0, 0)
    q25, q75 = np.percentile(v, [25, 75])
    return QosSnapshot(float(v.min()), float(q25), float(v.mean()), float(q75), int(v.size))


def qos_snapshot(state, alpha: float) -> QosSnapshot:
    """QoS statistics over every live vehicle of a simulation state.

    Vehicles left with no enabled RSU at all score 0.
    """
    from .qos import QosParams, vehicle_qos

    params = QosParams(alpha)
    enabled = [r for r in state.rsus.values() if r.enabled]
    values = []
    for vid in sorted(state.vehicles):
        rid = state.connections.get(vid)
        if rid is None and not enabled:
            values.append(0.0)
            continue
        rsu = state.rsus[rid] if rid is not None else None
        values.append(vehicle_qos(state.vehicles[vid], rsu, params, enabled))
    return summarize_qos(values)


def empty_counters() -> dict[str, dict[str, int]]:
    return {t: {o: 0 for o in OUTCOMES} for t in TRIGGERS}


def classify_and_count(event_log) -> dict[str, dict[str, int]]:
    counts = empty_counters()
    for ev in event_log:
        counts[_name(ev.trigger)][_name(ev.outcome)] += 1
    return counts


def _name(x) -> str:
    return getattr(x, "value", x)


@dataclass
class MetricsSeries:
    steps: list[int] = field(default_factory=list)
    gini: list[float] = field(default_factory=list)
    qos_min: list[float] = field(default_factory=list)
    qos_q25: list[float] = field(default_factory=list)
    qos_avg: list[float] = field(default_factory=list)
    qos_q75: list[float] = field(default_factory=list)
    vehicle_count: list[int] = field(default_factory=list)
    handovers: dict[str, dict[str, int]] = field(default_factory=empty_counters)
    messages: dict[str, int] = field(default_factory=lambda: {"cam": 0, "load_share": 0, "handover": 0})

    def record(self, step: int, g: float, snap: QosSnapshot) -> None:
        self.steps.append(step)
        self.gini.append(g)
        self.qos_min.append(snap.qos_min)
        self.qos_q25.append(snap.qos_q25)
        self.qos_avg.append(snap.qos_avg)
        self.qos_q75.append(snap.qos_q75)
        self.vehicle_count.append(snap.vehicle_count)

    def __len__(self) -> int:
        return len(self.steps)

    def rows(self):
        return zip(self.steps, self.gini, self.qos_min, self.qos_q25, self.qos_avg, self.qos_q75, self.vehicle_count)

    @property
    def total_handovers(self) -> int:
        return sum(sum(by_outcome.values()) for by_outcome in self.handovers.values())

    @property
    def failed_handovers(self) -> int:
        return sum(by_outcome["FAILED"] for by_outcome in self.handovers.values())

    def _occupied(self, values: list[float]) -> list[float]:
        return [x for x, n in zip(values, self.vehicle_count) if n > 0]

    def summary(self, gini_aggregate: str = "mean") -> dict[str, float]:
        """Run-level figures: mean Gini, mean of per-step avg/min QoS over
        steps with at least one vehicle, and handover totals."""
        g = [x for x in self.gini if not math.isnan(x)]
        agg = {"mean": np.mean, "median": np.median, "max": np.max}[gini_aggregate]
        avg = self._occupied(self.qos_avg)
        mins = self._occupied(self.qos_min)
        return {
            "handovers": self.total_handovers,
            "failed": self.failed_handovers,
            "qos_avg": float(np.mean(avg)) if avg else 1.0,
            "qos_min": float(np.mean(mins)) if mins else 1.0,
            "gini": float(agg(g)) if g else 0.0,
        }

    def to_dict(self) -> dict:
        return {
            "steps": [dict(zip(STEP_COLUMNS, row)) for row in self.rows()],
            "handovers": self.handovers,
            "messages": self.messages,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsSeries":
        series = cls()
        for row in data["steps"]:
            series.record(
                row["step"], row["gini"], QosSnapshot(row["qos_min"], row["qos_q25"], row["qos_avg"], row["qos_q75"], row["vehicle_count"])
            )
        series.handovers = {t: dict(data["handovers"][t]) for t in TRIGGERS}
        series.messages = dict(data["messages"])
        return series


def export(series: MetricsSeries, fmt: str) -> bytes:
    """Serialize ``series`` as ``csv`` (per-step rows) or ``json`` (everything)."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(STEP_COLUMNS)
        for row in series.rows():
            writer.writerow([repr(x) if isinstance(x, float) else x for x in row])
        return buf.getvalue().encode("utf-8")
    if fmt == "json":
        return (json.dumps(series.to_dict(), indent=2) + "\n").encode("utf-8")
    raise ValueError(f"unknown format {fmt!r}; expected 'csv' or 'json'")


def parse_csv(data: bytes) -> list[dict]:
    rows = []
    for rec in csv.DictReader(io.StringIO(data.decode("utf-8"))):
        rows.append(
            {k: (int(v) if k in ("step", "vehicle_count") else float(v)) for k, v in rec.items()}
        )
    return rows


def export_events(event_log) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EVENT_COLUMNS)
    for ev in event_log:
        writer.writerow(
            [ev.step, ev.vehicle_id, ev.source, ev.target, _name(ev.trigger), _name(ev.outcome), repr(ev.target_utilization)]
        )
    return buf.getvalue().encode("utf-8")


def result_stem(scenario: str, strategy: str, interval) -> str:
    return f"{scenario}_{strategy}_{interval}"
