"""Agent-based simulator for RSU computation-handover coordination."""

from .config import load_scenario
from .engine import Simulation, run
from .estimator import HandoverSimulator
from .metrics import MetricsSeries, gini
from .mobility import SyntheticScenarioSpec, generate_synthetic, ingest_trace
from .model import ORACLE, ConfigError, RsuSpec, SimConfig, StrategyParams, TaskLoadModel, VehicleState
from .qos import qos_distance, qos_load, qos_total
from .sweep import run_sweep

__version__ = "0.1.0"

__all__ = [
    "ORACLE",
    "ConfigError",
    "HandoverSimulator",
    "MetricsSeries",
    "RsuSpec",
    "SimConfig",
    "Simulation",
    "StrategyParams",
    "SyntheticScenarioSpec",
    "TaskLoadModel",
    "VehicleState",
    "generate_synthetic",
    "gini",
    "ingest_trace",
    "load_scenario",
    "qos_distance",
    "qos_load",
    "qos_total",
    "run",
    "run_sweep",
]
