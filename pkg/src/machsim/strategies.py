"""Handover strategies and the request/accept protocol.

Every strategy turns a read-only :class:`StepView` into a list of
:class:`HandoverRequest`. A request carries the position the source
evaluated (predicted or current); a RANGE request is only accepted when
the target covers that position. Load-driven requests are accepted while
the target's true utilization stays at or below 1.

Ties between candidate RSUs go to the one nearer to the evaluated
position, then to the lowest ``rsu_id``.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Optional

from .mobility import predict_position
from .model import Point, RsuRuntime, StrategyParams, VehicleState, distance
from .qos import qos_distance, qos_load

_TIE = 1e-9
# keeps the source's acceptance forecast strictly inside the target's test
_ACCEPT_MARGIN = 1e-9


class HandoverTrigger(str, enum.Enum):
    RANGE = "RANGE"
    LOAD_BALANCING = "LOAD_BALANCING"
    OVERLOAD = "OVERLOAD"


@dataclass(frozen=True)
class HandoverRequest:
    vehicle_id: str
    source_rsu: str
    target_rsu: str
    trigger: HandoverTrigger
    offloaded_load: float
    issued_at: int
    position: Point

    def __post_init__(self):
        if self.source_rsu == self.target_rsu:
            raise ValueError("source and target must differ")
        if self.offloaded_load < 0:
            raise ValueError("offloaded_load must be >= 0")


@dataclass
class StepView:
    """Snapshot handed to strategies during the decision phase."""

    step: int
    vehicles: Mapping[str, VehicleState]
    connections: Mapping[str, str]
    rsus: Mapping[str, RsuRuntime]
    offloads: Mapping[str, float]
    prev_coverage: Mapping[str, frozenset]
    step_duration: float = 1.0
    alpha: float = 0.0231

    @cached_property
    def _enabled(self) -> list[RsuRuntime]:
        return [self.rsus[rid] for rid in sorted(self.rsus) if self.rsus[rid].enabled]

    def enabled(self) -> list[RsuRuntime]:
        return list(self._enabled)

    def covering(self, point: Point, exclude: Optional[str] = None) -> list[RsuRuntime]:
        return [r for r in self.enabled() if r.rsu_id != exclude and r.spec.covers(point)]

    def served_by(self, rsu_id: str) -> list[str]:
        return sorted(self.rsus[rsu_id].loads)

    def predicted(self, rsu: RsuRuntime, vid: str, horizon: int = 1) -> Point:
        """Serving RSU's estimate ``horizon`` steps ahead, dead-reckoned from its last CAM."""
        cam = rsu.tracked.get(vid)
        if cam is None:
            return predict_position(self.vehicles[vid], horizon, self.step_duration)
        return predict_position(cam.as_state(), self.step - cam.emitted_at + horizon, self.step_duration)


def _nearest(options: list[RsuRuntime], point: Point) -> RsuRuntime:
    return min(options, key=lambda r: (distance(point, r.spec.position), r.rsu_id))


def suitability_at(point: Point, candidate: RsuRuntime, known_load: float, offload: float, alpha: float) -> float:
    return qos_distance(
        distance(point, candidate.spec.position), candidate.spec.coverage_radius, alpha
    ) * qos_load(known_load + offload, candidate.spec.capacity)


def suitability(
    v: VehicleState,
    candidate: RsuRuntime,
    known_load: float,
    offload: float,
    alpha: float,
    step_duration: float,
    horizon: float = 1,
) -> float:
    """Expected QoS of ``v`` if ``candidate`` took it over.

    Distance factor at the predicted position times the load factor with
    the vehicle's offload added to the candidate's last known load.
    """
    if not candidate.enabled:
        raise ValueError("candidate is disabled")
    point = predict_position(v, horizon, step_duration)
    return suitability_at(point, candidate, known_load, offload, alpha)


def decide_request(target: Optional[RsuRuntime], req: HandoverRequest) -> bool:
    """Target RSU's answer: True accepts, False declines."""
    if target is None or not target.enabled:
        return False
    if req.trigger is HandoverTrigger.RANGE:
        return target.spec.covers(req.position)
    after = target.assigned_load + req.offloaded_load
    return after / target.spec.capacity <= 1.0


def mach_step(
    rsu: RsuRuntime,
    view: StepView,
    params: StrategyParams,
    known: Mapping[str, float],
    own_load: Optional[float] = None,
) -> list[HandoverRequest]:
    """Decisions of one MACH RSU agent for the current step.

    ``known`` maps peer ids to the loads this RSU believes they carry. It
    is updated locally as requests are emitted, so later decisions in the
    same step account for earlier ones.
    """
    radius = rsu.spec.coverage_radius
    capacity = rsu.spec.capacity
    load = rsu.assigned_load if own_load is None else own_load
    known = dict(known)
    peers = [r for r in view.enabled() if r.rsu_id != rsu.rsu_id]
    vids = view.served_by(rsu.rsu_id)
    predicted = {vid: view.predicted(rsu, vid) for vid in vids}
    ahead = {vid: view.predicted(rsu, vid, params.lookahead) for vid in vids}
    offload = {vid: rsu.loads[vid] for vid in vids}
    requests: list[HandoverRequest] = []
    done: set[str] = set()

    def emit(vid: str, target: RsuRuntime, trigger: HandoverTrigger) -> None:
        nonlocal load
        requests.append(
            HandoverRequest(vid, rsu.rsu_id, target.rsu_id, trigger, offload[vid], view.step, predicted[vid])
        )
        done.add(vid)
        load -= offload[vid]
        known[target.rsu_id] = known.get(target.rsu_id, 0.0) + offload[vid]

    # imperative: vehicle about to leave the (inner) coverage area
    inner = (1.0 - params.leaving_threshold) * radius
    for vid in vids:
        p = predicted[vid]
        if distance(p, rsu.spec.position) <= inner:
            continue
        options = [c for c in peers if c.spec.covers(p)]
        if not options:
            continue
        best = min(
            options,
            key=lambda c: (
                -suitability_at(p, c, known.get(c.rsu_id, 0.0), offload[vid], view.alpha),
                distance(p, c.spec.position),
                c.rsu_id,
            ),
        )
        emit(vid, best, HandoverTrigger.RANGE)

    def best_move(min_score: float):
        util = load / capacity
        best = None
        for vid in vids:
            if vid in done or offload[vid] <= 0.0:
                continue
            p = predicted[vid]
            for c in peers:
                if c.rsu_id not in known or not c.spec.covers(p):
                    continue
                after = (known[c.rsu_id] + offload[vid]) / c.spec.capacity
                if after > 1.0 - _ACCEPT_MARGIN or not after < util - params.hysteresis:
                    continue
                # optional moves are judged on where the vehicle is heading
                score = suitability_at(ahead[vid], c, known[c.rsu_id], offload[vid], view.alpha)
                if score < min_score:
                    continue
                key = (-score, after, vid, c.rsu_id)
                if best is None or key < best[0]:
                    best = (key, vid, c)
        return best

    # imperative: shed load while above the overload threshold
    while load / capacity > params.overload_threshold:
        move = best_move(0.0)
        if move is None:
            break
        emit(move[1], move[2], HandoverTrigger.OVERLOAD)

    # alternative: move vehicles to clearly less utilized peers
    while True:
        move = best_move(params.min_suitability)
        if move is None:
            break
        emit(move[1], move[2], HandoverTrigger.LOAD_BALANCING)

    return requests


def latest_requests(view: StepView) -> list[HandoverRequest]:
    """Hand over only when the predicted next position leaves coverage."""
    out = []
    for vid in sorted(view.connections):
        rsu = view.rsus[view.connections[vid]]
        p = view.predicted(rsu, vid)
        if rsu.spec.covers(p):
            continue
        options = view.covering(p, exclude=rsu.rsu_id)
        if options:
            target = _nearest(options, p)
            out.append(
                HandoverRequest(vid, rsu.rsu_id, target.rsu_id, HandoverTrigger.RANGE, rsu.loads[vid], view.step, p)
            )
    return out


def nearest_requests(view: StepView) -> list[HandoverRequest]:
    """Keep every vehicle on its nearest covering RSU (sticky on ties)."""
    out = []
    for vid in sorted(view.connections):
        current = view.connections[vid]
        pos = view.vehicles[vid].position
        options = view.covering(pos)
        if not options:
            continue
        dmin = min(distance(pos, r.spec.position) for r in options)
        tied = [r for r in options if distance(pos, r.spec.position) <= dmin + _TIE]
        if any(r.rsu_id == current for r in tied):
            continue
        target = min(tied, key=lambda r: r.rsu_id)
        out.append(
            HandoverRequest(
                vid, current, target.rsu_id, HandoverTrigger.RANGE, view.rsus[current].loads[vid], view.step, pos
            )
        )
    return out


def earliest_requests(view: StepView) -> list[HandoverRequest]:
    """Hand over as soon as a new coverage area is entered.

    A vehicle that leaves its serving RSU without entering a new area moves
    to the nearest RSU still covering it.
    """
    out = []
    for vid in sorted(view.connections):
        current = view.connections[vid]
        pos = view.vehicles[vid].position
        covering = view.covering(pos)
        cov_ids = {r.rsu_id for r in covering}
        prev = view.prev_coverage.get(vid, cov_ids)
        entered = [r for r in covering if r.rsu_id not in prev and r.rsu_id != current]
        if entered:
            target = _nearest(entered, pos)
        elif current not in cov_ids and covering:
            target = _nearest(covering, pos)
        else:
            continue
        out.append(
            HandoverRequest(
                vid, current, target.rsu_id, HandoverTrigger.RANGE, view.rsus[current].loads[vid], view.step, pos
            )
        )
    return out


class Strategy:
    name = "base"

    def __init__(self, params: Optional[StrategyParams] = None):
        self.params = params or StrategyParams()

    def propose(self, view: StepView) -> list[HandoverRequest]:
        raise NotImplementedError

    def admit(self, view: StepView, vehicle: VehicleState) -> Optional[str]:
        """RSU a currently unconnected vehicle attaches to, if any."""
        options = view.covering(vehicle.position)
        return _nearest(options, vehicle.position).rsu_id if options else None


class MachStrategy(Strategy):
    name = "mach"

    def propose(self, view: StepView) -> list[HandoverRequest]:
        oracle = self.params.oracle
        # in oracle mode agents also see transfers already requested this step
        pending: dict[str, float] = defaultdict(float)
        out = []
        enabled = view.enabled()
        for rsu in enabled:
            if oracle:
                known = {r.rsu_id: r.assigned_load + pending[r.rsu_id] for r in enabled if r is not rsu}
                own = rsu.assigned_load + pending[rsu.rsu_id]
            else:
                known = {
                    rid: pk.known_load
                    for rid, pk in rsu.peer_knowledge.items()
                    if rid in view.rsus and view.rsus[rid].enabled
                }
                own = rsu.assigned_load
            reqs = mach_step(rsu, view, self.params, known, own)
            for r in reqs:
                pending[r.target_rsu] += r.offloaded_load
                pending[r.source_rsu] -= r.offloaded_load
            out.extend(reqs)
        return out


class LatestStrategy(Strategy):
    name = "latest"

    def propose(self, view: StepView) -> list[HandoverRequest]:
        return latest_requests(view)


class NearestStrategy(Strategy):
    name = "nearest"

    def propose(self, view: StepView) -> list[HandoverRequest]:
        return nearest_requests(view)


class EarliestStrategy(Strategy):
    name = "earliest"

    def propose(self, view: StepView) -> list[HandoverRequest]:
        return earliest_requests(view)


_REGISTRY = {cls.name: cls for cls in (MachStrategy, NearestStrategy, EarliestStrategy, LatestStrategy)}


def make_strategy(name: str, params: Optional[StrategyParams] = None) -> Strategy:
    try:
        return _REGISTRY[name](params)
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; expected one of {sorted(_REGISTRY)}") from None
