import json
import math
import os
from pathlib import Path

import pytest

import cabinsim

SCENARIOS = Path(os.environ.get("CABINSIM_SCENARIO_DIR", Path(__file__).parents[2] / "scenarios"))


def test_step_vehicle_straight_line():
    s = cabinsim.step_vehicle({"speed": 10.0}, 0.0, 0.0, 0.0)
    assert s["x"] == pytest.approx(10.0 * cabinsim.DT)
    assert s["y"] == 0.0
    assert s["speed"] < 10.0  # drag


def test_force_feedback_sign_and_bound():
    assert cabinsim.force_feedback(0.1, 10.0) == pytest.approx(-0.4)
    assert cabinsim.force_feedback(-0.1, 10.0) == pytest.approx(0.4)
    assert abs(cabinsim.force_feedback(0.6, 40.0, 5.0)) <= 3.0


def test_parse_scenario_round_trip_and_errors():
    doc = cabinsim.parse_scenario((SCENARIOS / "pilot_lumo.json").read_text())
    assert doc["policy"]["variant"] == "on_demand"
    assert cabinsim.parse_scenario(json.dumps(doc)) == doc
    with pytest.raises(cabinsim.ParseError):
        cabinsim.parse_scenario('{"id": "x", "route": [[0, 0]]}')
    doc["route"] = [[0, 0]]
    with pytest.raises(cabinsim.ValidationError):
        cabinsim.parse_scenario(json.dumps(doc))


def test_run_headless_and_replay(tmp_path):
    out = cabinsim.run_headless(str(SCENARIOS / "pilot_coda.json"), str(tmp_path / "s"), seed=5, duration=20.0)
    assert out["ticks"] == 1200
    assert out["end_reason"] == "duration_reached"
    records = cabinsim.replay(str(tmp_path / "s"))
    assert records[0]["rec"] == "session_header"
    assert records[-1]["rec"] == "session_end"
    assert sum(r["rec"] == "vehicle" for r in records) == 1200
    times = [r["t"] for r in records if "t" in r]
    assert all(b >= a - 1e-9 for a, b in zip(times, times[1:]))

    stats = cabinsim.analyze(str(tmp_path / "s"), str(tmp_path / "a"))
    assert len(stats["files"]) == 4
    assert (tmp_path / "a" / "summary.json").exists()


def test_frames():
    line = cabinsim.encode_frame({"type": "heartbeat", "seq": 1, "t_mono": 0.5, "payload": {}})
    assert line.endswith("\n")
    assert cabinsim.decode_frame(line)["type"] == "heartbeat"
    with pytest.raises(cabinsim.ParseError):
        cabinsim.decode_frame("{not json")


def test_synth_gaze_is_seeded():
    a = cabinsim.synth_gaze({"seed": 1}, [2.0], 10.0)
    b = cabinsim.synth_gaze({"seed": 1}, [2.0], 10.0)
    assert a == b
    assert len(a) == 1000
    assert all(math.isclose(sum(c * c for c in g["direction"]), 1.0) for g in a)


def test_align_recovers_rotation():
    model = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
    tracked = [[1, 2, 3], [1, 3, 3], [0, 2, 3], [1, 2, 4]]  # 90 deg about z, then (1, 2, 3)
    r = cabinsim.align(model, tracked)
    assert r["rms_residual"] < 1e-10
    assert r["translation"] == pytest.approx([1, 2, 3])
    assert r["rotation"][0] == pytest.approx([0, -1, 0], abs=1e-12)
    with pytest.raises(cabinsim.AlignmentError):
        cabinsim.align([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 0, 0], [1, 0, 0], [2, 0, 0]])
