"""Estimator-style front end: hyperparameters in ``__init__``, a run in ``fit``."""

from __future__ import annotations

from dataclasses import replace
from typing import Optional, Sequence, Union

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .engine import run
from .mobility import Schedule, load_schedule
from .model import FailureEvent, RsuSpec, SimConfig, StrategyParams, TaskLoadModel, validate_config

_PARAM_FIELDS = tuple(StrategyParams.__dataclass_fields__)


def check_schedule(schedule) -> Schedule:
    """Validate a step -> vehicle list mapping and return it as a plain dict."""
    if not isinstance(schedule, dict):
        raise TypeError(f"schedule must be a dict of step -> vehicles, got {type(schedule).__name__}")
    out: Schedule = {}
    for step, vehicles in schedule.items():
        if isinstance(step, bool) or not isinstance(step, int) or step < 0:
            raise ValueError(f"schedule steps must be integers >= 0, got {step!r}")
        ids = [v.vehicle_id for v in vehicles]
        if len(ids) != len(set(ids)):
            raise ValueError(f"step {step}: duplicate vehicle ids")
        out[step] = list(vehicles)
    return out


class HandoverSimulator(BaseEstimator):
    """Runs one scenario per ``fit`` call.

    ``X`` is the mobility input: a schedule dict, a trace path, a
    :class:`~machsim.mobility.SyntheticScenarioSpec`, or ``None`` for the
    empty road. After fitting, ``metrics_`` holds the per-step series,
    ``events_`` the handover log and ``summary_`` the run-level figures.
    """

    def __init__(
        self,
        rsus: Sequence[RsuSpec] = (),
        strategy: str = "mach",
        leaving_threshold: float = 0.0,
        overload_threshold: float = 0.7,
        hysteresis: float = 0.05,
        min_suitability: float = 0.3,
        load_share_interval: Union[int, str] = 1,
        lookahead: int = 10,
        duration: int = 600,
        step_duration: float = 1.0,
        qos_alpha: float = 0.0231,
        cam_interval: int = 1,
        rng_seed: int = 42,
        load_model: Optional[TaskLoadModel] = None,
        vehicle_capacity: float = 1.3,
        failures: Sequence[FailureEvent] = (),
    ):
        self.rsus = rsus
        self.strategy = strategy
        self.leaving_threshold = leaving_threshold
        self.overload_threshold = overload_threshold
        self.hysteresis = hysteresis
        self.min_suitability = min_suitability
        self.load_share_interval = load_share_interval
        self.lookahead = lookahead
        self.duration = duration
        self.step_duration = step_duration
        self.qos_alpha = qos_alpha
        self.cam_interval = cam_interval
        self.rng_seed = rng_seed
        self.load_model = load_model
        self.vehicle_capacity = vehicle_capacity
        self.failures = failures

    @classmethod
    def from_config(cls, cfg: SimConfig) -> "HandoverSimulator":
        kw = {name: getattr(cfg.params, name) for name in _PARAM_FIELDS}
        return cls(
            rsus=cfg.rsus,
            strategy=cfg.strategy,
            duration=cfg.duration,
            step_duration=cfg.step_duration,
            qos_alpha=cfg.qos_alpha,
            cam_interval=cfg.cam_interval,
            rng_seed=cfg.rng_seed,
            load_model=cfg.load_model,
            vehicle_capacity=cfg.vehicle_capacity,
            failures=cfg.failures,
            **kw,
        )

    def to_config(self, trace_source=None) -> SimConfig:
        params = StrategyParams(**{name: getattr(self, name) for name in _PARAM_FIELDS})
        load_model = self.load_model if self.load_model is not None else TaskLoadModel(rng_seed=self.rng_seed)
        cfg = SimConfig(
            rsus=tuple(self.rsus),
            duration=self.duration,
            step_duration=self.step_duration,
            strategy=self.strategy,
            params=params,
            qos_alpha=self.qos_alpha,
            cam_interval=self.cam_interval,
            trace_source=trace_source,
            rng_seed=self.rng_seed,
            load_model=load_model,
            vehicle_capacity=self.vehicle_capacity,
            failures=tuple(self.failures),
        )
        return validate_config(cfg)

    def fit(self, X=None, y=None):
        if isinstance(X, dict):
            cfg = self.to_config()
            schedule = check_schedule(X)
        else:
            cfg = self.to_config(trace_source=X)
            schedule = load_schedule(X, cfg.step_duration, cfg.vehicle_capacity)
        state, series = run(cfg, schedule)
        self.config_ = cfg
        self.state_ = state
        self.metrics_ = series
        self.events_ = list(state.event_log)
        self.summary_ = series.summary()
        return self

    def score(self, X=None, y=None) -> float:
        """Mean per-step average QoS of the fitted run (``X`` is ignored)."""
        check_is_fitted(self, "metrics_")
        return self.summary_["qos_avg"]

    def with_params(self, **kw) -> "HandoverSimulator":
        """Unfitted copy with some hyperparameters changed."""
        from sklearn.base import clone

        return clone(self).set_params(**kw)


def config_with(cfg: SimConfig, **params) -> SimConfig:
    """``cfg`` with some StrategyParams fields replaced."""
    return validate_config(replace(cfg, params=replace(cfg.params, **params)))
