import json

import pytest

from uavrelay import experiments as ex
from uavrelay import export
from uavrelay.config import ScenarioConfig
from uavrelay.traces import diff_steps, record_episode, replay_steps

TINY = ScenarioConfig().replace(n_waypoints=6, horizon=8, episodes=2, eval_episodes=2, hidden_sizes=(8,),
                                batch_size=4)


def test_csv_round_trip(tmp_path):
    rows = [{"name": 'a "quoted", value', "x": 0.1, "n": 3}, {"name": "plain", "x": 1e-300, "n": -1}]
    path = export.write_csv(tmp_path / "t.csv", rows)
    assert export.read_csv(path) == rows
    assert path.read_bytes().splitlines()[0] == b"name,x,n"


def test_unwritable_path_reported(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(export.ExportError):
        export.write_csv(blocker / "sub" / "t.csv", [{"a": 1}])


def test_summary_files(tmp_path):
    recs = ex.run_experiment(TINY, "aoi_threshold", grid=[0.3, 0.9], seeds=[0], agents=("greedy",))
    written = export.export_summary(ex.aggregate(recs), tmp_path, "table3")
    names = {p.name for p in written}
    assert {"table3_aoi_threshold_greedy.csv", "table3_aoi_threshold_greedy.json"} <= names
    rows = export.read_csv(tmp_path / "table3_aoi_threshold_greedy.csv")
    assert [r["value"] for r in rows] == [0.3, 0.9]
    data = json.loads((tmp_path / "table3_aoi_threshold_greedy.json").read_text())
    assert set(data) == {"rows", "normalization_bounds"}
    series = (tmp_path / "series" / "table3_aoi_threshold_greedy_eta.dat").read_text().splitlines()
    assert series[1] == "# value mean stddev" and len(series[2].split()) == 3


def test_run_artifacts(tmp_path):
    result = ex.train_agent(TINY, "baseline", 0)
    episodes = ex.evaluate_agent(TINY, "baseline", 0, result.net)
    manifest = json.loads(export.write_run_artifacts(tmp_path, TINY, 0, "baseline", result, episodes).read_text())
    assert manifest["memory_capacity"] == 0 and manifest["scenario_id"] == TINY.digest()
    assert manifest["eval_episode_range"] == [0, 2]
    net = ex.MlpQNetwork.load(manifest["network"])
    assert net.sizes == result.net.sizes
    assert len(export.read_csv(tmp_path / "runs" / f"{TINY.digest()}_baseline_s0_train.csv")) == 2


def test_trace_round_trip_and_replay(tmp_path):
    _, header, steps = record_episode(TINY, 1, [1, 2, 0], "greedy")
    path = export.write_trace(tmp_path / "ep.jsonl", header, steps)
    h, s = export.read_trace(path)
    assert h["agent"] == "greedy" and len(s) == len(steps)
    assert diff_steps(s, replay_steps(h, s)) == []
    s[0]["reward"] += 1.0
    assert diff_steps(s, replay_steps(h, s))


def test_bad_trace_rejected(tmp_path):
    (tmp_path / "t.jsonl").write_text('{"kind": "step", "action": 0}\n')
    with pytest.raises(ValueError):
        export.read_trace(tmp_path / "t.jsonl")
