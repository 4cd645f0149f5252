"""Distance, load and composite QoS scores for a served vehicle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .model import RsuRuntime, VehicleState, distance

DEFAULT_ALPHA = 0.0231


@dataclass(frozen=True)
class QosParams:
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")


def qos_distance(d: float, radius: float, alpha: float) -> float:
    """1 inside the coverage radius, exponential decay beyond it."""
    if d <= radius:
        return 1.0
    return math.exp(-alpha * (d - radius))


def qos_load(load: float, capacity: float) -> float:
    if load <= capacity:
        return 1.0
    return capacity / load


def qos_total(dist_score: float, load_score: float) -> float:
    return dist_score * load_score


def derive_alpha(ref_distance: float, ref_qos: float, radius: float) -> float:
    """Decay constant such that ``qos_distance(ref_distance) == ref_qos``."""
    if ref_distance <= radius:
        raise ValueError("reference point must lie outside coverage")
    if not 0.0 < ref_qos < 1.0:
        raise ValueError("reference QoS must lie in (0, 1)")
    return -math.log(ref_qos) / (ref_distance - radius)


def vehicle_qos(
    v: VehicleState,
    rsu: Optional[RsuRuntime],
    params: QosParams,
    enabled: Iterable[RsuRuntime] = (),
) -> float:
    """QoS of ``v`` served by ``rsu``.

    A vehicle without a serving RSU (``rsu is None``) is scored on distance
    alone against the nearest RSU in ``enabled``; its load factor is 1.
    """
    if rsu is not None:
        d = distance(v.position, rsu.spec.position)
        return qos_total(
            qos_distance(d, rsu.spec.coverage_radius, params.alpha),
            qos_load(rsu.assigned_load, rsu.spec.capacity),
        )
    candidates = [r for r in enabled if r.enabled]
    if not candidates:
        raise ValueError("no infrastructure")
    nearest = min(candidates, key=lambda r: (distance(v.position, r.spec.position), r.rsu_id))
    d = distance(v.position, nearest.spec.position)
    return qos_distance(d, nearest.spec.coverage_radius, params.alpha)
