"""Domain types shared by the simulator modules.

Positions are 2-D Cartesian meters in the scenario frame. Loads and
capacities are TFLOPS throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

Point = tuple[float, float]

ORACLE = "oracle"

GFLOPS_PER_TFLOPS = 1000.0


class ConfigError(ValueError):
    """Raised when a configuration value violates its invariant.

    ``path`` names the offending field, e.g. ``rsus[2].capacity``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


def distance(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass(frozen=True)
class VehicleState:
    vehicle_id: str
    position: Point
    speed: float = 0.0
    direction: Point = (0.0, 0.0)
    onboard_capacity: float = 1.3
    generated_load: float = 0.0

    def __post_init__(self):
        if not self.speed >= 0:
            raise ConfigError("speed", "speed must be >= 0")
        if not self.onboard_capacity > 0:
            raise ConfigError("onboard_capacity", "onboard_capacity must be > 0")
        if not self.generated_load >= 0:
            raise ConfigError("generated_load", "generated_load must be >= 0")
        if self.speed > 0 and abs(math.hypot(*self.direction) - 1.0) > 1e-9:
            raise ConfigError("direction", "direction must have unit norm when moving")


@dataclass(frozen=True)
class RsuSpec:
    rsu_id: str
    position: Point
    coverage_radius: float = 70.0
    capacity: float = 65.0
    enabled: bool = True

    def __post_init__(self):
        if not self.coverage_radius > 0:
            raise ConfigError("coverage_radius", "coverage_radius must be > 0")
        if not self.capacity > 0:
            raise ConfigError("capacity", "capacity must be > 0")

    def covers(self, point: Point) -> bool:
        return distance(self.position, point) <= self.coverage_radius


@dataclass
class PeerLoad:
    known_load: float
    known_at: int


@dataclass
class RsuRuntime:
    """Live state of one RSU.

    ``loads`` maps each connected vehicle to its offloaded TFLOPS, so the
    connected set and the assigned load cannot drift apart.
    """

    spec: RsuSpec
    enabled: bool = True
    loads: dict[str, float] = field(default_factory=dict)
    peer_knowledge: dict[str, PeerLoad] = field(default_factory=dict)
    tracked: dict = field(default_factory=dict)

    @property
    def rsu_id(self) -> str:
        return self.spec.rsu_id

    @property
    def connected(self) -> set[str]:
        return set(self.loads)

    @property
    def assigned_load(self) -> float:
        # uncapped: may exceed capacity
        return math.fsum(self.loads.values())

    @property
    def utilization(self) -> float:
        return self.assigned_load / self.spec.capacity


@dataclass(frozen=True)
class StrategyParams:
    leaving_threshold: float = 0.0
    overload_threshold: float = 0.7
    hysteresis: float = 0.05
    min_suitability: float = 0.3
    load_share_interval: Union[int, str] = 1
    lookahead: int = 10

    def __post_init__(self):
        _check_params(self, "params")

    @property
    def oracle(self) -> bool:
        return self.load_share_interval == ORACLE


def _check_params(p: StrategyParams, path: str) -> None:
    if not 0.0 <= p.leaving_threshold <= 1.0:
        raise ConfigError(f"{path}.leaving_threshold", "leaving_threshold must be in [0, 1]")
    if not 0.0 < p.overload_threshold <= 1.0:
        raise ConfigError(f"{path}.overload_threshold", "overload_threshold must be in (0, 1]")
    if not 0.0 <= p.hysteresis <= 1.0:
        raise ConfigError(f"{path}.hysteresis", "hysteresis must be in [0, 1]")
    if not 0.0 <= p.min_suitability <= 1.0:
        raise ConfigError(f"{path}.min_suitability", "min_suitability must be in [0, 1]")
    if isinstance(p.lookahead, bool) or not isinstance(p.lookahead, int) or p.lookahead < 1:
        raise ConfigError(f"{path}.lookahead", "lookahead must be an integer >= 1")
    interval = p.load_share_interval
    if interval != ORACLE and (
        isinstance(interval, bool) or not isinstance(interval, int) or interval < 1
    ):
        raise ConfigError(
            f"{path}.load_share_interval", "load_share_interval must be an integer >= 1 or 'oracle'"
        )


@dataclass(frozen=True)
class TaskLoadModel:
    """Per-vehicle compute demand and the share that stays onboard.

    With ``dynamic_range=None`` every vehicle demands
    ``per_frame_load * frame_rate`` (GFLOP/s, converted to TFLOPS).
    ``resample`` is ``"lifetime"`` (one draw per vehicle) or ``"step"``.
    """

    per_frame_load: float = 79.72
    frame_rate: float = 30.0
    local_fraction: float = 0.7
    dynamic_range: Optional[tuple[float, float]] = (1.9, 3.0)
    rng_seed: int = 42
    resample: str = "lifetime"

    def __post_init__(self):
        if not 0.0 <= self.local_fraction <= 1.0:
            raise ConfigError("load.local_fraction", "local_fraction must be in [0, 1]")
        if self.per_frame_load < 0 or self.frame_rate < 0:
            raise ConfigError("load.per_frame_load", "per-frame load and frame rate must be >= 0")
        if self.dynamic_range is not None:
            low, high = self.dynamic_range
            if not 0 <= low <= high:
                raise ConfigError("load.dynamic_range", "dynamic_range needs 0 <= low <= high")
        if self.resample not in ("lifetime", "step"):
            raise ConfigError("load.resample", "resample must be 'lifetime' or 'step'")

    @property
    def static_demand(self) -> float:
        return self.per_frame_load * self.frame_rate / GFLOPS_PER_TFLOPS


@dataclass(frozen=True)
class FailureEvent:
    rsu_id: str
    disable_at: int
    enable_at: Optional[int] = None


STRATEGIES = ("mach", "nearest", "earliest", "latest")


@dataclass(frozen=True)
class SimConfig:
    rsus: tuple[RsuSpec, ...]
    duration: int = 600
    step_duration: float = 1.0
    strategy: str = "mach"
    params: StrategyParams = field(default_factory=StrategyParams)
    qos_alpha: float = 0.0231
    cam_interval: int = 1
    trace_source: object = None
    rng_seed: int = 42
    load_model: TaskLoadModel = field(default_factory=TaskLoadModel)
    vehicle_capacity: float = 1.3
    failures: tuple[FailureEvent, ...] = ()
    name: str = "scenario"


def validate_config(cfg: SimConfig) -> SimConfig:
    """Check every invariant of ``cfg`` and return it unchanged.

    Raises :class:`ConfigError` naming the first offending field.
    """
    if not cfg.step_duration > 0:
        raise ConfigError("step_duration", "step_duration must be > 0")
    if isinstance(cfg.duration, bool) or not isinstance(cfg.duration, int) or cfg.duration < 0:
        raise ConfigError("duration", "duration must be a non-negative integer")
    if isinstance(cfg.cam_interval, bool) or not isinstance(cfg.cam_interval, int) or cfg.cam_interval < 1:
        raise ConfigError("cam_interval", "cam_interval must be >= 1")
    if not cfg.qos_alpha > 0:
        raise ConfigError("qos_alpha", "qos_alpha must be > 0")
    if not cfg.vehicle_capacity > 0:
        raise ConfigError("vehicle_capacity", "vehicle_capacity must be > 0")
    if cfg.strategy not in STRATEGIES:
        raise ConfigError("strategy", f"unknown strategy {cfg.strategy!r}; expected one of {STRATEGIES}")
    _check_params(cfg.params, "params")

    seen: set[str] = set()
    for i, rsu in enumerate(cfg.rsus):
        if not rsu.coverage_radius > 0:
            raise ConfigError(f"rsus[{i}].coverage_radius", "coverage_radius must be > 0")
        if not rsu.capacity > 0:
            raise ConfigError(f"rsus[{i}].capacity", "capacity must be > 0")
        if rsu.rsu_id in seen:
            raise ConfigError(f"rsus[{i}].rsu_id", f"duplicate rsu_id {rsu.rsu_id!r}")
        seen.add(rsu.rsu_id)

    for i, fail in enumerate(cfg.failures):
        if fail.rsu_id not in seen:
            raise ConfigError(f"failures[{i}].rsu_id", f"unknown rsu_id {fail.rsu_id!r}")
        if fail.disable_at < 0:
            raise ConfigError(f"failures[{i}].disable_at", "disable_at must be >= 0")
        if fail.enable_at is not None and fail.enable_at <= fail.disable_at:
            raise ConfigError(f"failures[{i}].enable_at", "enable_at must be after disable_at")
    return cfg
