import pytest

from machsim.knowledge import CamMessage
from machsim.model import StrategyParams
from machsim.strategies import (
    HandoverRequest,
    HandoverTrigger,
    StepView,
    decide_request,
    earliest_requests,
    latest_requests,
    mach_step,
    make_strategy,
    nearest_requests,
    suitability,
)

from conftest import rsu, runtime, vehicle


def view(rsus, vehicles, prev=None, step=0):
    rsus = {r.rsu_id: r for r in rsus}
    vehicles = {v.vehicle_id: v for v in vehicles}
    conn = {vid: r.rsu_id for r in rsus.values() for vid in r.loads}
    for vid, rid in conn.items():
        rsus[rid].tracked[vid] = CamMessage.from_state(vehicles[vid], step)
    offloads = {vid: rsus[rid].loads[vid] for vid, rid in conn.items()}
    return StepView(step, vehicles, conn, rsus, offloads, prev or {})


# -- suitability ------------------------------------------------------------


def test_suitability_idle_in_range():
    assert suitability(vehicle("v", 10, 0), runtime(rsu("b", 0, 0)), 0.0, 1.5, 0.0231, 1.0) == 1.0


def test_suitability_double_capacity():
    assert suitability(vehicle("v", 10, 0), runtime(rsu("b", 0, 0)), 128.5, 1.5, 0.0231, 1.0) == pytest.approx(0.5)


def test_suitability_disabled_candidate():
    with pytest.raises(ValueError):
        suitability(vehicle("v", 0, 0), runtime(rsu("b", 0, 0, enabled=False)), 0.0, 1.0, 0.0231, 1.0)


# -- request / accept -------------------------------------------------------


def _req(trigger, load=2.0, pos=(90.0, 0.0)):
    return HandoverRequest("v", "a", "b", trigger, load, 0, pos)


def test_range_request_accepted_inside_target():
    assert decide_request(runtime(rsu("b", 100, 0)), _req(HandoverTrigger.RANGE))


def test_range_request_declined_outside_target():
    assert not decide_request(runtime(rsu("b", 500, 0)), _req(HandoverTrigger.RANGE))


def test_balancing_request_declined_above_capacity():
    target = runtime(rsu("b", 100, 0, capacity=10.0), {"x": 10.0})
    assert not decide_request(target, _req(HandoverTrigger.LOAD_BALANCING, load=2.0))
    assert decide_request(runtime(rsu("b", 100, 0, capacity=10.0), {"x": 8.0}), _req(HandoverTrigger.OVERLOAD))


def test_disabled_target_declines():
    target = runtime(rsu("b", 100, 0))
    target.enabled = False
    assert not decide_request(target, _req(HandoverTrigger.RANGE))
    assert not decide_request(None, _req(HandoverTrigger.RANGE))


def test_request_invariants():
    with pytest.raises(ValueError):
        HandoverRequest("v", "a", "a", HandoverTrigger.RANGE, 1.0, 0, (0.0, 0.0))
    with pytest.raises(ValueError):
        HandoverRequest("v", "a", "b", HandoverTrigger.RANGE, -1.0, 0, (0.0, 0.0))


# -- MACH -------------------------------------------------------------------


def test_leaving_vehicle_goes_to_idle_neighbor():
    a, b = runtime(rsu("a", 0, 0), {"v": 1.5}), runtime(rsu("b", 100, 0))
    v = vehicle("v", 65, 0, speed=10.0)
    reqs = mach_step(a, view([a, b], [v]), StrategyParams(), {"b": 0.0})
    assert [(r.target_rsu, r.trigger) for r in reqs] == [("b", HandoverTrigger.RANGE)]
    assert reqs[0].position == pytest.approx((75.0, 0.0))


def test_leaving_threshold_triggers_early():
    a, b = runtime(rsu("a", 0, 0), {"v": 1.5}), runtime(rsu("b", 100, 0))
    v = vehicle("v", 50, 0, speed=5.0)
    vw = view([a, b], [v])
    assert mach_step(a, vw, StrategyParams(), {"b": 0.0}) == []
    early = mach_step(a, vw, StrategyParams(leaving_threshold=0.25), {"b": 0.0})
    assert [r.trigger for r in early] == [HandoverTrigger.RANGE]


def _loaded(util, n=10, capacity=65.0):
    share = util * capacity / n
    return {f"v{i}": share for i in range(n)}


def test_below_thresholds_no_requests():
    a = runtime(rsu("a", 0, 0), _loaded(0.6))
    b = runtime(rsu("b", 60, 0), {"w": 0.58 * 65})
    vs = [vehicle(f"v{i}", 30, 0) for i in range(10)] + [vehicle("w", 60, 0)]
    assert mach_step(a, view([a, b], vs), StrategyParams(), {"b": b.assigned_load}) == []


def test_overload_sheds_to_idle_neighbor():
    loads = _loaded(0.7)
    loads["v0"] += 1e-6
    a, b = runtime(rsu("a", 0, 0), loads), runtime(rsu("b", 60, 0))
    vs = [vehicle(f"v{i}", 30, 0) for i in range(10)]
    reqs = mach_step(a, view([a, b], vs), StrategyParams(), {"b": 0.0})
    assert reqs and reqs[0].trigger is HandoverTrigger.OVERLOAD
    assert reqs[0].target_rsu == "b"
    assert len({r.vehicle_id for r in reqs}) == len(reqs)


def test_balancing_respects_hysteresis():
    a = runtime(rsu("a", 0, 0), _loaded(0.5))
    b = runtime(rsu("b", 60, 0))
    vs = [vehicle(f"v{i}", 30, 0) for i in range(10)]
    vw = view([a, b], vs)
    moved = mach_step(a, vw, StrategyParams(), {"b": 0.0})
    assert moved and all(r.trigger is HandoverTrigger.LOAD_BALANCING for r in moved)
    # each move must leave the target clearly below the source
    assert mach_step(a, vw, StrategyParams(hysteresis=0.5), {"b": 0.0}) == []


def test_balancing_ignores_unknown_peers():
    a = runtime(rsu("a", 0, 0), _loaded(0.9))
    b = runtime(rsu("b", 60, 0))
    vs = [vehicle(f"v{i}", 30, 0) for i in range(10)]
    assert mach_step(a, view([a, b], vs), StrategyParams(), {}) == []


def test_min_suitability_filters_departing_vehicles():
    # v leaves b's coverage within the lookahead, u stays put
    a = runtime(rsu("a", 0, 0), {"u": 10.0, "v": 10.0})
    b = runtime(rsu("b", 60, 0))
    vs = [vehicle("u", 40, 0), vehicle("v", 40, 0, speed=20.0)]
    vw = view([a, b], vs)
    picky = mach_step(a, vw, StrategyParams(min_suitability=0.5, overload_threshold=1.0), {"b": 0.0})
    assert [r.vehicle_id for r in picky] == ["u"]
    lax = mach_step(a, vw, StrategyParams(min_suitability=0.0, overload_threshold=1.0), {"b": 0.0})
    assert sorted(r.vehicle_id for r in lax) == ["u"]  # one move already balances


def test_degenerate_params_match_latest():
    params = StrategyParams(0.0, 1.0, 1.0, 1.0)
    a = runtime(rsu("a", 0, 0), {"v": 1.5, "w": 1.5})
    b, c = runtime(rsu("b", 100, 0)), runtime(rsu("c", 50, 80))
    vs = [vehicle("v", 65, 0, speed=10.0), vehicle("w", 30, 50, speed=30.0, heading=1.2)]
    vw = view([a, b, c], vs)
    mach = make_strategy("mach", params).propose(vw)
    assert mach == latest_requests(vw)


# -- baselines --------------------------------------------------------------


def test_nearest_tie_keeps_current():
    a, b = runtime(rsu("a", 0, 0)), runtime(rsu("b", 100, 0), {"v": 1.0})
    assert nearest_requests(view([a, b], [vehicle("v", 50, 0)])) == []


def test_nearest_tie_new_vehicle_picks_lowest_id():
    a, b, c = runtime(rsu("a", 0, 0)), runtime(rsu("b", 100, 0)), runtime(rsu("c", 50, 60), {"v": 1.0})
    (req,) = nearest_requests(view([a, b, c], [vehicle("v", 50, -10)]))
    assert req.target_rsu == "a"


def test_nearest_single_rsu():
    a = runtime(rsu("a", 0, 0), {"v": 1.0})
    assert nearest_requests(view([a], [vehicle("v", 60, 0)])) == []


def test_earliest_hands_over_on_entry():
    a, b = runtime(rsu("a", 0, 0), {"v": 1.0}), runtime(rsu("b", 100, 0))
    vw = view([a, b], [vehicle("v", 35, 0)], prev={"v": frozenset({"a"})})
    (req,) = earliest_requests(vw)
    assert req.target_rsu == "b"


def test_earliest_picks_nearer_of_simultaneous_entries():
    a = runtime(rsu("a", 0, 0), {"v": 1.0})
    b, c = runtime(rsu("b", 100, 0)), runtime(rsu("c", 60, 90))
    vw = view([a, b, c], [vehicle("v", 55, 35)], prev={"v": frozenset({"a"})})
    (req,) = earliest_requests(vw)
    assert req.target_rsu == "c"


def test_earliest_exclusive_coverage():
    a, b = runtime(rsu("a", 0, 0), {"v": 1.0}), runtime(rsu("b", 300, 0))
    assert earliest_requests(view([a, b], [vehicle("v", 10, 0)], prev={"v": frozenset({"a"})})) == []


def test_latest_defers_until_exit():
    a, b = runtime(rsu("a", 0, 0), {"v": 1.0}), runtime(rsu("b", 100, 0))
    assert latest_requests(view([a, b], [vehicle("v", 50, 0, speed=10.0)])) == []
    (req,) = latest_requests(view([a, b], [vehicle("v", 65, 0, speed=10.0)]))
    assert req.target_rsu == "b"


def test_latest_exit_into_nothing():
    a = runtime(rsu("a", 0, 0), {"v": 1.0})
    assert latest_requests(view([a], [vehicle("v", 65, 0, speed=10.0)])) == []


def test_stale_cam_is_dead_reckoned():
    a, b = runtime(rsu("a", 0, 0), {"v": 1.0}), runtime(rsu("b", 100, 0))
    vw = view([a, b], [vehicle("v", 40, 0, speed=10.0)], step=3)
    a.tracked["v"] = CamMessage("v", (20.0, 0.0), 10.0, (1.0, 0.0), 1)
    assert vw.predicted(a, "v") == pytest.approx((50.0, 0.0))


def test_unknown_strategy():
    with pytest.raises(ValueError):
        make_strategy("random")
