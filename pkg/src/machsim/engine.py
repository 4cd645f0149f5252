"""Discrete-time simulation loop.

Each step runs these phases in a fixed order:

0. apply scheduled RSU failures / recoveries
1. advance vehicles from the schedule; despawn leavers, refresh loads
2. deliver CAMs to serving RSUs
3. share loads between RSUs (every ``interval`` steps or, for oracle, always)
4. run the active strategy on every enabled RSU in ``rsu_id`` order
5. resolve requests in (source, vehicle) order; drop vehicles that are out
   of their serving RSU's coverage; attach unconnected covered vehicles
6. measure QoS and Gini, record the step
"""

from __future__ import annotations

import enum
import logging
import math
import zlib
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .knowledge import CamMessage, emit_cams, share_loads, share_message_count
from .metrics import MetricsSeries, classify_and_count, gini, qos_snapshot
from .mobility import Schedule, load_schedule
from .model import RsuRuntime, SimConfig, TaskLoadModel, VehicleState, validate_config
from .strategies import HandoverTrigger, StepView, Strategy, decide_request, make_strategy

log = logging.getLogger(__name__)


class Outcome(str, enum.Enum):
    SUCCESS = "SUCCESS"
    FAILED = "FAILED"


class SimulationInvariantError(RuntimeError):
    """Engine bug: a state invariant broke during a step."""


@dataclass(frozen=True)
class HandoverEvent:
    step: int
    vehicle_id: str
    source: str
    target: str
    trigger: HandoverTrigger
    outcome: Outcome
    # target utilization had it taken the vehicle, at resolution time
    target_utilization: float


@dataclass(frozen=True)
class ConnectionEvent:
    step: int
    vehicle_id: str
    rsu_id: str
    kind: str  # "connect" | "disconnect"
    reason: str


@dataclass
class SimulationState:
    step: int
    rsus: dict[str, RsuRuntime]
    vehicles: dict[str, VehicleState] = field(default_factory=dict)
    connections: dict[str, str] = field(default_factory=dict)
    offloads: dict[str, float] = field(default_factory=dict)
    prev_coverage: dict[str, frozenset] = field(default_factory=dict)
    event_log: list[HandoverEvent] = field(default_factory=list)
    connection_log: list[ConnectionEvent] = field(default_factory=list)
    messages: dict[str, int] = field(default_factory=lambda: {"cam": 0, "load_share": 0, "handover": 0})

    @classmethod
    def initial(cls, cfg: SimConfig) -> "SimulationState":
        rsus = {
            spec.rsu_id: RsuRuntime(spec, enabled=spec.enabled) for spec in sorted(cfg.rsus, key=lambda s: s.rsu_id)
        }
        return cls(step=0, rsus=rsus)


def vehicle_demand(vehicle_id: str, model: TaskLoadModel, step: int) -> float:
    """Total compute demand (TFLOPS), reproducible from seed, id and epoch."""
    if model.dynamic_range is None:
        return model.static_demand
    epoch = step if model.resample == "step" else 0
    rng = np.random.default_rng([model.rng_seed & 0xFFFFFFFF, zlib.crc32(vehicle_id.encode()), epoch])
    low, high = model.dynamic_range
    return float(rng.uniform(low, high))


def offloaded_load(v: VehicleState, model: TaskLoadModel, step: int) -> float:
    """Share of the vehicle's demand that does not fit onboard."""
    demand = vehicle_demand(v.vehicle_id, model, step)
    return max(0.0, demand - model.local_fraction * v.onboard_capacity)


def check_invariants(state: SimulationState) -> None:
    for vid, rid in state.connections.items():
        if vid not in state.vehicles:
            raise SimulationInvariantError(f"step {state.step}: connection for despawned vehicle {vid}")
        rsu = state.rsus.get(rid)
        if rsu is None or not rsu.enabled:
            raise SimulationInvariantError(f"step {state.step}: {vid} mapped to disabled/unknown RSU {rid}")
    for rid, rsu in state.rsus.items():
        expected = {vid: state.offloads[vid] for vid, r in state.connections.items() if r == rid}
        if rsu.loads != expected:
            raise SimulationInvariantError(f"step {state.step}: load mismatch at {rid}")
        if not rsu.enabled and rsu.loads:
            raise SimulationInvariantError(f"step {state.step}: disabled RSU {rid} still serves vehicles")
    total_rsu = math.fsum(x for r in state.rsus.values() for x in r.loads.values())
    total_veh = math.fsum(state.offloads[vid] for vid in state.connections)
    if total_rsu != total_veh:
        raise SimulationInvariantError(f"step {state.step}: load not conserved ({total_rsu} != {total_veh})")


def _disconnect(state: SimulationState, vid: str, reason: str) -> None:
    rid = state.connections.pop(vid)
    rsu = state.rsus[rid]
    rsu.loads.pop(vid, None)
    rsu.tracked.pop(vid, None)
    state.connection_log.append(ConnectionEvent(state.step, vid, rid, "disconnect", reason))


def _connect(state: SimulationState, vid: str, rid: str, reason: str) -> None:
    rsu = state.rsus[rid]
    state.connections[vid] = rid
    rsu.loads[vid] = state.offloads[vid]
    # association hands the RSU the vehicle's current state
    rsu.tracked[vid] = CamMessage.from_state(state.vehicles[vid], state.step)
    state.connection_log.append(ConnectionEvent(state.step, vid, rid, "connect", reason))


def _apply_failures(state: SimulationState, cfg: SimConfig) -> None:
    for fail in cfg.failures:
        rsu = state.rsus[fail.rsu_id]
        if fail.disable_at == state.step and rsu.enabled:
            for vid in sorted(rsu.loads):
                _disconnect(state, vid, "rsu_failure")
            rsu.enabled = False
            rsu.peer_knowledge.clear()
            rsu.tracked.clear()
            for other in state.rsus.values():
                other.peer_knowledge.pop(fail.rsu_id, None)
            log.debug("step %d: %s disabled", state.step, fail.rsu_id)
        elif fail.enable_at == state.step and not rsu.enabled:
            rsu.enabled = True
            log.debug("step %d: %s re-enabled", state.step, fail.rsu_id)


def _advance_vehicles(state: SimulationState, cfg: SimConfig, schedule: Schedule) -> None:
    model = cfg.load_model
    current = {v.vehicle_id: v for v in schedule.get(state.step, ())}
    for vid in sorted(set(state.vehicles) - set(current)):
        if vid in state.connections:
            _disconnect(state, vid, "despawn")
        state.offloads.pop(vid, None)
        state.prev_coverage.pop(vid, None)
    for vid, v in current.items():
        fresh = vid not in state.vehicles
        if fresh or model.resample == "step":
            demand = vehicle_demand(vid, model, state.step)
            state.offloads[vid] = max(0.0, demand - model.local_fraction * v.onboard_capacity)
            v = replace(v, generated_load=demand)
        else:
            v = replace(v, generated_load=state.vehicles[vid].generated_load)
        current[vid] = v
        rid = state.connections.get(vid)
        if rid is not None:
            state.rsus[rid].loads[vid] = state.offloads[vid]
    state.vehicles = current


def _view(state: SimulationState, cfg: SimConfig) -> StepView:
    return StepView(
        step=state.step,
        vehicles=state.vehicles,
        connections=state.connections,
        rsus=state.rsus,
        offloads=state.offloads,
        prev_coverage=state.prev_coverage,
        step_duration=cfg.step_duration,
        alpha=cfg.qos_alpha,
    )


def _resolve(state: SimulationState, requests) -> None:
    seen: set[str] = set()
    for req in sorted(requests, key=lambda r: (r.source_rsu, r.vehicle_id)):
        if req.vehicle_id in seen:
            raise SimulationInvariantError(f"step {state.step}: two requests for {req.vehicle_id}")
        seen.add(req.vehicle_id)
        if state.connections.get(req.vehicle_id) != req.source_rsu:
            continue
        target = state.rsus.get(req.target_rsu)
        accepted = decide_request(target, req)
        util = (
            (target.assigned_load + req.offloaded_load) / target.spec.capacity if target is not None else math.inf
        )
        state.messages["handover"] += 2
        if accepted:
            source = state.rsus[req.source_rsu]
            source.loads.pop(req.vehicle_id)
            cam = source.tracked.pop(req.vehicle_id, None)
            target.loads[req.vehicle_id] = state.offloads[req.vehicle_id]
            if cam is not None:
                target.tracked[req.vehicle_id] = cam
            state.connections[req.vehicle_id] = target.rsu_id
        state.event_log.append(
            HandoverEvent(
                state.step,
                req.vehicle_id,
                req.source_rsu,
                req.target_rsu,
                req.trigger,
                Outcome.SUCCESS if accepted else Outcome.FAILED,
                util,
            )
        )


def _settle_connections(state: SimulationState, strategy: Strategy, view: StepView) -> None:
    for vid in sorted(state.connections):
        rsu = state.rsus[state.connections[vid]]
        if not rsu.spec.covers(state.vehicles[vid].position):
            _disconnect(state, vid, "out_of_range")
    for vid in sorted(state.vehicles):
        if vid not in state.connections:
            rid = strategy.admit(view, state.vehicles[vid])
            if rid is not None:
                _connect(state, vid, rid, "coverage_entry")


def _coverage(state: SimulationState) -> dict[str, frozenset]:
    live = [r for r in state.rsus.values() if r.enabled]
    return {
        vid: frozenset(r.rsu_id for r in live if r.spec.covers(v.position)) for vid, v in state.vehicles.items()
    }


def run_step(
    state: SimulationState, cfg: SimConfig, schedule: Schedule, strategy: Strategy, series: Optional[MetricsSeries] = None
) -> SimulationState:
    """Execute one step in place and return ``state`` advanced by one."""
    _apply_failures(state, cfg)
    _advance_vehicles(state, cfg, schedule)

    cams = emit_cams(state.step, state.vehicles, state.connections, state.rsus, cfg.cam_interval)
    state.messages["cam"] += len(cams)
    reports = share_loads(state.step, [state.rsus[k] for k in sorted(state.rsus)], cfg.params.load_share_interval)
    state.messages["load_share"] += share_message_count(reports)

    view = _view(state, cfg)
    requests = strategy.propose(view)
    _resolve(state, requests)
    _settle_connections(state, strategy, _view(state, cfg))
    check_invariants(state)

    if series is not None:
        loads = [r.assigned_load for r in state.rsus.values() if r.enabled]
        g = gini(loads) if loads else math.nan
        series.record(state.step, g, qos_snapshot(state, cfg.qos_alpha))

    state.prev_coverage = _coverage(state)
    state.step += 1
    return state


class Simulation:
    """One configured run. ``step()`` advances it; ``run()`` finishes it."""

    def __init__(self, cfg: SimConfig, schedule: Optional[Schedule] = None):
        self.cfg = validate_config(cfg)
        if schedule is None:
            schedule = load_schedule(cfg.trace_source, cfg.step_duration, cfg.vehicle_capacity)
        self.schedule = schedule
        self.strategy = make_strategy(cfg.strategy, cfg.params)
        self.state = SimulationState.initial(cfg)
        self.series = MetricsSeries()

    def step(self) -> SimulationState:
        return run_step(self.state, self.cfg, self.schedule, self.strategy, self.series)

    def run(self) -> tuple[SimulationState, MetricsSeries]:
        while self.state.step < self.cfg.duration:
            self.step()
        self.series.handovers = classify_and_count(self.state.event_log)
        self.series.messages = dict(self.state.messages)
        return self.state, self.series


def run(cfg: SimConfig, schedule: Optional[Schedule] = None) -> tuple[SimulationState, MetricsSeries]:
    """Run ``cfg`` for ``cfg.duration`` steps from the empty state."""
    return Simulation(cfg, schedule).run()
