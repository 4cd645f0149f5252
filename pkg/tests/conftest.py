import math

import pytest

from machsim.model import RsuRuntime, RsuSpec, SimConfig, StrategyParams, TaskLoadModel, VehicleState


def rsu(rid, x, y, radius=70.0, capacity=65.0, **kw) -> RsuSpec:
    return RsuSpec(rid, (float(x), float(y)), radius, capacity, **kw)


def runtime(spec: RsuSpec, loads=None) -> RsuRuntime:
    rt = RsuRuntime(spec, enabled=spec.enabled)
    rt.loads.update(loads or {})
    return rt


def vehicle(vid, x, y, speed=0.0, heading=0.0, **kw) -> VehicleState:
    direction = (math.cos(heading), math.sin(heading)) if speed > 0 else (0.0, 0.0)
    return VehicleState(vid, (float(x), float(y)), speed, direction, **kw)


def config(rsus, **kw) -> SimConfig:
    kw.setdefault("duration", 10)
    kw.setdefault("load_model", TaskLoadModel(dynamic_range=None))
    return SimConfig(rsus=tuple(rsus), **kw)


@pytest.fixture
def pair():
    """Two RSUs 100 m apart with a 40 m overlap."""
    return [rsu("a", 0, 0), rsu("b", 100, 0)]


@pytest.fixture
def mach_params():
    return StrategyParams()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
