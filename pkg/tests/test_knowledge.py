from machsim.knowledge import emit_cams, share_loads, share_message_count
from machsim.model import ORACLE

from conftest import rsu, runtime, vehicle


def _rsus(n=4):
    return {f"r{i}": runtime(rsu(f"r{i}", 50 * i, 0), {f"v{i}": float(i + 1)}) for i in range(n)}


def test_cams_every_step():
    rsus = _rsus(1)
    vehicles = {k: vehicle(k, 0, 0) for k in ("a", "b", "c", "d")}
    conn = {"a": "r0", "b": "r0", "c": "r0"}
    for step in range(3):
        assert len(emit_cams(step, vehicles, conn, rsus, 1)) == 3
    assert set(rsus["r0"].tracked) == {"a", "b", "c"}


def test_cams_off_cycle():
    rsus = _rsus(1)
    assert emit_cams(2, {"a": vehicle("a", 0, 0)}, {"a": "r0"}, rsus, 5) == []
    assert rsus["r0"].tracked == {}


def test_oracle_knowledge_is_current():
    rsus = _rsus()
    share_loads(7, rsus.values(), ORACLE)
    for r in rsus.values():
        assert {pk.known_at for pk in r.peer_knowledge.values()} == {7}
        assert len(r.peer_knowledge) == 3


def test_interval_knowledge_goes_stale():
    rsus = _rsus()
    share_loads(0, rsus.values(), 5)
    rsus["r1"].loads["extra"] = 10.0
    assert share_loads(3, rsus.values(), 5) == []
    assert rsus["r0"].peer_knowledge["r1"].known_load == 2.0
    assert rsus["r0"].peer_knowledge["r1"].known_at == 0
    share_loads(5, rsus.values(), 5)
    assert rsus["r0"].peer_knowledge["r1"].known_load == 12.0


def test_round_message_count():
    rsus = _rsus()
    assert share_message_count(share_loads(0, rsus.values(), 1)) == 12


def test_disabled_rsus_neither_send_nor_receive():
    rsus = _rsus()
    rsus["r3"].enabled = False
    reports = share_loads(0, rsus.values(), 1)
    assert {r.rsu_id for r in reports} == {"r0", "r1", "r2"}
    assert rsus["r3"].peer_knowledge == {}
    assert "r3" not in rsus["r0"].peer_knowledge
