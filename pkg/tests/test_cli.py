import csv
import io
import subprocess
import sys
from pathlib import Path

import pytest

from machsim.cli import main
from machsim.config import BUNDLED, apply_overrides, config_from_dict, load_scenario
from machsim.mobility import SyntheticScenarioSpec, ingest_trace
from machsim.model import ORACLE, ConfigError

SHORT = """
[simulation]
name = "short"
duration = 40

[rsus]
capacity_scale = 0.25
[[rsus.units]]
id = "west"
position = [38.0, 118.0]
[[rsus.units]]
id = "east"
position = [163.0, 82.0]

[trace.synthetic]
kind = "ring_road"
center = [100.0, 100.0]
vehicle_count = 30
spawn_interval = [0, 2]
"""


@pytest.fixture
def short(tmp_path):
    p = tmp_path / "short.toml"
    p.write_text(SHORT)
    return p


@pytest.mark.parametrize("name", BUNDLED + ("reference",))
def test_bundled_scenarios_parse(name):
    cfg = load_scenario(name)
    assert cfg.rsus and cfg.duration > 0


def test_capacity_scale():
    assert {r.capacity for r in load_scenario("sparse4").rsus} == {65.0}
    assert {r.capacity for r in load_scenario("congested").rsus} == {32.5}
    assert {r.capacity for r in load_scenario("sparse4", capacity_scale=0.25).rsus} == {16.25}


def test_alpha_from_reference_point():
    cfg = config_from_dict({"qos": {"ref_distance": 100, "ref_qos": 0.5}, "rsus": {"units": [{"id": "a", "position": [0, 0]}]}})
    assert cfg.qos_alpha == pytest.approx(0.0231, abs=1e-4)


def test_config_errors_name_the_field():
    with pytest.raises(ConfigError) as info:
        config_from_dict({"rsus": {"units": [{"id": "a", "position": [0, 0], "capacity": 0}]}})
    assert info.value.path.startswith("rsus.units[0]")
    with pytest.raises(ConfigError) as info:
        config_from_dict({"strategy": {"load_share_interval": "weekly"}})
    assert info.value.path == "strategy.load_share_interval"


def test_overrides():
    cfg = apply_overrides(load_scenario("sparse4"), strategy="latest", interval="oracle", seed=9)
    assert cfg.strategy == "latest" and cfg.params.load_share_interval == ORACLE
    assert cfg.load_model.rng_seed == 9 and cfg.trace_source.rng_seed == 9


def test_run_writes_results(short, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(short), "--strategy", "latest", "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["short_latest_1.csv", "short_latest_1.json", "short_latest_1_events.csv"]
    header = (out / "short_latest_1.csv").read_text().splitlines()[0]
    assert header == "step,gini,qos_min,qos_q25,qos_avg,qos_q75,vehicle_count"


def test_run_twice_byte_identical(short, tmp_path):
    for d in ("x", "y"):
        assert main(["run", str(short), "--seed", "7", "--interval", "5", "--out", str(tmp_path / d)]) == 0
    for f in (tmp_path / "x").iterdir():
        assert f.read_bytes() == (tmp_path / "y" / f.name).read_bytes()


def test_missing_scenario(tmp_path, capsys):
    missing = tmp_path / "nowhere.toml"
    assert main(["run", str(missing)]) != 0
    assert str(missing) in capsys.readouterr().err


def test_invalid_scenario_exits_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('[strategy]\nhysteresis = 3.0\n')
    assert main(["validate", str(bad)]) != 0
    assert "hysteresis" in capsys.readouterr().err
    bad.write_text("not = [toml")
    assert main(["validate", str(bad)]) != 0


def test_sweep_command(short, tmp_path):
    grid = tmp_path / "grid.toml"
    grid.write_text("[grid]\noverload = [0.7]\nhysteresis = [0.05]\nsuitability = [0.3]\n")
    assert main(["sweep", str(short), str(grid), "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "short_sweep.csv").read_text())))
    assert len(rows) == 1 and float(rows[0]["eval_sum"]) == 4.0


def test_sweep_rejects_bad_grid(short, tmp_path):
    grid = tmp_path / "grid.toml"
    grid.write_text("[grid]\nhysteresis = [-1.0]\n")
    assert main(["sweep", str(short), str(grid), "--out", str(tmp_path)]) != 0


def test_generate_straight_road_round_trip(tmp_path):
    spec = tmp_path / "road.toml"
    spec.write_text('[synthetic]\nkind = "straight_road"\nvehicle_count = 2\nspeed = [10.0, 10.0]\nlength = 50.0\n')
    out = tmp_path / "road.csv"
    assert main(["generate", str(spec), "--out", str(out)]) == 0
    sched = ingest_trace(out.read_text(), 1.0)
    first = sorted(sched)[0]
    track = [sched[s][0].position for s in sorted(sched) if sched[s][0].vehicle_id == "v0"]
    assert track == [(10.0 * k, 0.0) for k in range(5)] and first == 0


def test_generate_zero_vehicles(tmp_path):
    spec = tmp_path / "none.toml"
    spec.write_text("[synthetic]\nvehicle_count = 0\n")
    out = tmp_path / "none.csv"
    assert main(["generate", str(spec), str(out)]) == 0
    assert out.read_text() == "time,vehicle_id,x,y\n"


def test_generate_invalid_spec(tmp_path):
    spec = tmp_path / "bad.toml"
    spec.write_text('[synthetic]\nkind = "ring_road"\nspeed = [5.0, 1.0]\n')
    assert main(["generate", str(spec), str(tmp_path / "o.csv")]) != 0


def test_module_entry_point(short, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "machsim", "validate", str(short)], capture_output=True, text=True
    )
    assert proc.returncode == 0 and "short: ok" in proc.stdout
