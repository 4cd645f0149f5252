"""Scenario files: TOML documents mapping onto :class:`SimConfig`.

See ``scenarios/reference.toml`` for a commented example of every key.
Relative trace paths resolve against the scenario file's directory.
"""

from __future__ import annotations

import math
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .mobility import SyntheticScenarioSpec
from .model import (
    ORACLE,
    ConfigError,
    FailureEvent,
    RsuSpec,
    SimConfig,
    StrategyParams,
    TaskLoadModel,
    validate_config,
)
from .qos import derive_alpha

BUNDLED = ("sparse4", "dense9", "fail3", "congested")


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("machsim") / "scenarios" / f"{name}.toml"))


def resolve_scenario(ref: Union[str, Path]) -> Path:
    """A scenario path, or the name of a bundled scenario."""
    path = Path(ref)
    if path.exists():
        return path
    if str(ref) in BUNDLED or str(ref) == "reference":
        return bundled_path(str(ref))
    raise FileNotFoundError(f"scenario file not found: {ref}")


def parse_interval(value: Any, path: str = "strategy.load_share_interval"):
    if isinstance(value, str):
        if value.lower() == ORACLE:
            return ORACLE
        try:
            value = int(value)
        except ValueError:
            raise ConfigError(path, f"expected an integer or 'oracle', got {value!r}") from None
    return value


def _point(value, path: str) -> tuple[float, float]:
    try:
        x, y = value
        return (float(x), float(y))
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a pair [x, y]") from None


def _radians(table: dict, key: str, default: float) -> float:
    if f"{key}_deg" in table:
        return math.radians(float(table[f"{key}_deg"]))
    return float(table.get(key, default))


def synthetic_from_table(table: dict, seed: int, path: str = "trace.synthetic") -> SyntheticScenarioSpec:
    kw: dict[str, Any] = {"rng_seed": int(table.get("seed", seed))}
    for key in ("kind",):
        if key in table:
            kw[key] = table[key]
    for key in ("vehicle_count", "start_step"):
        if key in table:
            kw[key] = int(table[key])
    for key in ("length", "radius"):
        if key in table:
            kw[key] = float(table[key])
    for key in ("speed", "spawn_interval", "dwell"):
        if key in table:
            lo, hi = table[key]
            kw[key] = (lo, hi) if key == "speed" else (int(lo), int(hi))
    for key in ("origin", "center"):
        if key in table:
            kw[key] = _point(table[key], f"{path}.{key}")
    kw["heading"] = _radians(table, "heading", 0.0)
    if "entry_angles_deg" in table:
        kw["entry_angles"] = tuple(math.radians(a) for a in table["entry_angles_deg"])
    elif "entry_angles" in table:
        kw["entry_angles"] = tuple(float(a) for a in table["entry_angles"])
    if "entry_weights" in table:
        kw["entry_weights"] = tuple(float(w) for w in table["entry_weights"])
    try:
        return SyntheticScenarioSpec(**kw)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def config_from_dict(doc: dict, base_dir: Optional[Path] = None, name: str = "scenario") -> SimConfig:
    sim = doc.get("simulation", {})
    strat = doc.get("strategy", {})
    load = doc.get("load", {})
    infra = doc.get("rsus", {})
    qos = doc.get("qos", {})
    seed = int(sim.get("seed", 42))

    scale = float(infra.get("capacity_scale", 1.0))
    if not scale > 0:
        raise ConfigError("rsus.capacity_scale", "capacity_scale must be > 0")
    default_radius = float(infra.get("coverage_radius", 70.0))
    default_capacity = float(infra.get("capacity", 65.0))
    rsus = []
    for i, unit in enumerate(infra.get("units", [])):
        path = f"rsus.units[{i}]"
        if "id" not in unit:
            raise ConfigError(f"{path}.id", "missing id")
        try:
            rsus.append(
                RsuSpec(
                    str(unit["id"]),
                    _point(unit.get("position"), f"{path}.position"),
                    float(unit.get("coverage_radius", default_radius)),
                    float(unit.get("capacity", default_capacity)) * scale,
                    bool(unit.get("enabled", True)),
                )
            )
        except ConfigError as exc:
            raise ConfigError(f"{path}.{exc.path}", exc.message) from None

    try:
        params = StrategyParams(
            leaving_threshold=float(strat.get("leaving_threshold", 0.0)),
            overload_threshold=float(strat.get("overload_threshold", 0.7)),
            hysteresis=float(strat.get("hysteresis", 0.05)),
            min_suitability=float(strat.get("min_suitability", 0.3)),
            load_share_interval=parse_interval(strat.get("load_share_interval", 1)),
            lookahead=int(strat.get("lookahead", 10)),
        )
    except ConfigError as exc:
        raise ConfigError(exc.path.replace("params", "strategy", 1), exc.message) from None

    dyn = load.get("dynamic_range", [1.9, 3.0])
    load_model = TaskLoadModel(
        per_frame_load=float(load.get("per_frame_gflop", 79.72)),
        frame_rate=float(load.get("frame_rate", 30.0)),
        local_fraction=float(load.get("local_fraction", 0.7)),
        dynamic_range=None if not load.get("dynamic", True) or not dyn else (float(dyn[0]), float(dyn[1])),
        rng_seed=int(load.get("seed", seed)),
        resample=str(load.get("resample", "lifetime")),
    )

    if "ref_distance" in qos:
        alpha = derive_alpha(float(qos["ref_distance"]), float(qos.get("ref_qos", 0.5)), float(qos.get("ref_radius", default_radius)))
    else:
        alpha = float(qos.get("alpha", 0.0231))

    failures = []
    for i, f in enumerate(doc.get("failures", [])):
        try:
            failures.append(FailureEvent(str(f["rsu_id"]), int(f.get("disable_at", 0)), f.get("enable_at")))
        except KeyError:
            raise ConfigError(f"failures[{i}].rsu_id", "missing rsu_id") from None

    trace = doc.get("trace", {})
    if "synthetic" in trace:
        source: Any = synthetic_from_table(trace["synthetic"], seed, "trace.synthetic")
    elif "path" in trace:
        p = Path(trace["path"])
        source = p if p.is_absolute() or base_dir is None else base_dir / p
    else:
        source = None

    cfg = SimConfig(
        rsus=tuple(rsus),
        duration=int(sim.get("duration", 600)),
        step_duration=float(sim.get("step_duration", 1.0)),
        strategy=str(strat.get("name", "mach")),
        params=params,
        qos_alpha=alpha,
        cam_interval=int(sim.get("cam_interval", 1)),
        trace_source=source,
        rng_seed=seed,
        load_model=load_model,
        vehicle_capacity=float(load.get("vehicle_capacity", 1.3)),
        failures=tuple(failures),
        name=str(sim.get("name", name)),
    )
    return validate_config(cfg)


def read_toml(path: Union[str, Path]) -> dict:
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(str(path), f"invalid TOML: {exc}") from None


def load_scenario(ref: Union[str, Path], capacity_scale: Optional[float] = None) -> SimConfig:
    """Parse a scenario file. ``capacity_scale`` replaces the file's own scale."""
    path = resolve_scenario(ref)
    doc = read_toml(path)
    if capacity_scale is not None:
        doc.setdefault("rsus", {})["capacity_scale"] = capacity_scale
    return config_from_dict(doc, path.parent, name=path.stem)


def apply_overrides(
    cfg: SimConfig,
    strategy: Optional[str] = None,
    interval=None,
    seed: Optional[int] = None,
    **params,
) -> SimConfig:
    """Return ``cfg`` with command-line style overrides applied."""
    if strategy is not None:
        cfg = replace(cfg, strategy=strategy)
    if interval is not None:
        cfg = replace(cfg, params=replace(cfg.params, load_share_interval=parse_interval(interval)))
    if params:
        cfg = replace(cfg, params=replace(cfg.params, **params))
    if seed is not None:
        cfg = replace(cfg, rng_seed=seed, load_model=replace(cfg.load_model, rng_seed=seed))
        if isinstance(cfg.trace_source, SyntheticScenarioSpec):
            cfg = replace(cfg, trace_source=replace(cfg.trace_source, rng_seed=seed))
    return validate_config(cfg)


def load_grid(path: Union[str, Path]) -> dict[str, list]:
    """Sweep grid file: a ``[grid]`` table of parameter name -> value list."""
    if not Path(path).exists():
        raise FileNotFoundError(f"grid file not found: {path}")
    doc = read_toml(path)
    grid = doc.get("grid", doc)
    if not grid:
        raise ConfigError("grid", "grid is empty")
    out = {}
    for key, values in grid.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid.{key}", "expected a non-empty list")
        out[key] = [parse_interval(v) if key in ("load_share_interval", "interval") else v for v in values]
    return out
