"""Exhaustive grid search over MACH parameters with normalized scoring.

Each cell is an independent, identically seeded run. Raw scores are
normalized per column against the best observed value, so the best cell in
every column scores exactly 1:

* handovers and gini are lower-better: ``min / observed``
* qos_avg and qos_min are higher-better: ``observed / max``

``0 / 0`` is taken as 1.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

from joblib import Parallel, delayed
from sklearn.model_selection import ParameterGrid

from .engine import run
from .mobility import Schedule, load_schedule
from .model import SimConfig, StrategyParams, validate_config

log = logging.getLogger(__name__)

SCORE_COLUMNS = ("handovers", "qos_avg", "qos_min", "gini")
LOWER_BETTER = frozenset({"handovers", "gini"})
RESULT_COLUMNS = (
    "overload",
    "hysteresis",
    "suitability",
    "leaving",
    "handovers",
    "qos_avg",
    "qos_min",
    "gini",
    "eval_sum",
    "eval_product",
)

# short grid keys used in result tables
ALIASES = {
    "overload": "overload_threshold",
    "hysteresis": "hysteresis",
    "suitability": "min_suitability",
    "leaving": "leaving_threshold",
    "interval": "load_share_interval",
}


@dataclass(frozen=True)
class SweepResult:
    params: StrategyParams
    raw: Optional[dict[str, float]]
    normalized: Optional[dict[str, float]] = None
    eval_sum: float = math.nan
    eval_product: float = math.nan
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        return 1.0 if num == 0.0 else math.inf
    return num / den


def normalize(raws: Sequence[Mapping[str, float]]) -> list[dict[str, float]]:
    """Per-column normalized scores for a list of raw score dicts."""
    if not raws:
        raise ValueError("nothing to normalize")
    out: list[dict[str, float]] = [{} for _ in raws]
    for col in SCORE_COLUMNS:
        values = [float(r[col]) for r in raws]
        if col in LOWER_BETTER:
            best = min(values)
            scores = [_ratio(best, v) for v in values]
        else:
            best = max(values)
            scores = [1.0 if best == 0.0 else v / best for v in values]
        for row, s in zip(out, scores):
            row[col] = s
    return out


def resolve_grid(grid: Mapping[str, Sequence]) -> dict[str, list]:
    """Map short grid keys onto StrategyParams fields and validate every value."""
    if not grid:
        raise ValueError("grid is empty")
    fields = set(StrategyParams.__dataclass_fields__)
    out = {}
    for key, values in grid.items():
        name = ALIASES.get(key, key)
        if name not in fields:
            raise ValueError(f"unknown grid parameter {key!r}")
        values = list(values)
        if not values:
            raise ValueError(f"grid parameter {key!r} has no values")
        for v in values:
            StrategyParams(**{name: v})
        out[name] = values
    return out


def _cell(cfg: SimConfig, schedule: Schedule, gini_aggregate: str) -> dict[str, float]:
    _, series = run(cfg, schedule)
    s = series.summary(gini_aggregate)
    return {k: s[k] for k in SCORE_COLUMNS}


def _safe_cell(cfg, schedule, gini_aggregate):
    try:
        return _cell(cfg, schedule, gini_aggregate), None
    except Exception as exc:  # a broken cell must not sink the sweep
        return None, f"{type(exc).__name__}: {exc}"


def run_sweep(
    base_cfg: SimConfig,
    grid: Mapping[str, Sequence],
    schedule: Optional[Schedule] = None,
    n_jobs: int = 1,
    gini_aggregate: str = "mean",
) -> list[SweepResult]:
    """Run every grid combination with MACH and return results best first.

    Cells that raise are kept with ``error`` set and sorted last.
    """
    base_cfg = validate_config(replace(base_cfg, strategy="mach"))
    if schedule is None:
        schedule = load_schedule(base_cfg.trace_source, base_cfg.step_duration, base_cfg.vehicle_capacity)
    combos = list(ParameterGrid(resolve_grid(grid)))
    params = [replace(base_cfg.params, **combo) for combo in combos]
    cfgs = [replace(base_cfg, params=p) for p in params]
    log.info("sweep: %d cells", len(cfgs))
    outcomes = Parallel(n_jobs=n_jobs)(delayed(_safe_cell)(c, schedule, gini_aggregate) for c in cfgs)

    ok = [i for i, (raw, _) in enumerate(outcomes) if raw is not None]
    normed = normalize([outcomes[i][0] for i in ok]) if ok else []
    results = []
    for i, norm in zip(ok, normed):
        results.append(
            SweepResult(params[i], outcomes[i][0], norm, math.fsum(norm.values()), math.prod(norm.values()))
        )
    for i, (raw, err) in enumerate(outcomes):
        if raw is None:
            results.append(SweepResult(params[i], None, error=err))
    return rank(results)


def rank(results: Sequence[SweepResult]) -> list[SweepResult]:
    def key(r: SweepResult):
        if r.failed:
            return (1, 0.0, 0.0)
        return (0, -r.eval_sum, -r.eval_product)

    return sorted(results, key=key)


def results_csv(results: Sequence[SweepResult]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS + ("error",))
    for r in results:
        p = r.params
        head = [repr(p.overload_threshold), repr(p.hysteresis), repr(p.min_suitability), repr(p.leaving_threshold)]
        if r.failed:
            writer.writerow(head + [""] * 6 + [r.error])
            continue
        raw = r.raw
        writer.writerow(
            head
            + [
                int(raw["handovers"]),
                repr(raw["qos_avg"]),
                repr(raw["qos_min"]),
                repr(raw["gini"]),
                repr(r.eval_sum),
                repr(r.eval_product),
                "",
            ]
        )
    return buf.getvalue().encode("utf-8")
