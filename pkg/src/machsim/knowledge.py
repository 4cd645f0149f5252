"""CAM beacons and periodic inter-RSU load sharing.

Links are ideal: no loss, no latency inside a step. Broadcast rounds are
synchronized across RSUs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Union

from .model import ORACLE, Point, PeerLoad, RsuRuntime, VehicleState


@dataclass(frozen=True)
class CamMessage:
    vehicle_id: str
    position: Point
    speed: float
    direction: Point
    emitted_at: int

    @classmethod
    def from_state(cls, v: VehicleState, step: int) -> "CamMessage":
        return cls(v.vehicle_id, v.position, v.speed, v.direction, step)

    def as_state(self) -> VehicleState:
        return VehicleState(self.vehicle_id, self.position, self.speed, self.direction)


@dataclass(frozen=True)
class LoadReport:
    rsu_id: str
    load: float
    emitted_at: int


def emit_cams(
    step: int,
    vehicles: Mapping[str, VehicleState],
    connections: Mapping[str, str],
    rsus: Mapping[str, RsuRuntime],
    cam_interval: int = 1,
) -> list[CamMessage]:
    """Deliver one CAM per connected vehicle to its serving RSU.

    Off-cycle steps (``step % cam_interval != 0``) deliver nothing.
    """
    if step % cam_interval:
        return []
    sent = []
    for vid in sorted(connections):
        rsu = rsus[connections[vid]]
        msg = CamMessage.from_state(vehicles[vid], step)
        rsu.tracked[vid] = msg
        sent.append(msg)
    return sent


def share_loads(
    step: int, rsus: Iterable[RsuRuntime], interval: Union[int, str]
) -> list[LoadReport]:
    """Broadcast every enabled RSU's load to every other enabled RSU.

    Returns the reports sent this step; each report reaches n-1 peers, so
    the message count of a round is ``len(reports) * (n - 1)``.
    """
    live = [r for r in rsus if r.enabled]
    if interval != ORACLE and step % interval:
        return []
    reports = [LoadReport(r.rsu_id, r.assigned_load, step) for r in live]
    for rsu in live:
        for rep in reports:
            if rep.rsu_id != rsu.rsu_id:
                rsu.peer_knowledge[rep.rsu_id] = PeerLoad(rep.load, rep.emitted_at)
    return reports


def share_message_count(reports: list[LoadReport]) -> int:
    n = len(reports)
    return n * (n - 1)
