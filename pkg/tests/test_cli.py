import json

import pytest

from uavrelay.cli import build_parser, main
from uavrelay.config import ScenarioConfig

TINY = ScenarioConfig().replace(n_waypoints=6, horizon=8, episodes=2, eval_episodes=2, hidden_sizes=(8,),
                                batch_size=4, seeds=(0,))


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "tiny.ini"
    TINY.save(path)
    return path


def test_unknown_subcommand_and_flag(capsys):
    with pytest.raises(SystemExit) as err:
        main(["fly"])
    assert err.value.code != 0
    with pytest.raises(SystemExit) as err:
        main(["train", "--warp"])
    assert err.value.code != 0 and "usage" in capsys.readouterr().err


def test_global_flags_either_side():
    a = build_parser().parse_args(["--seed", "3", "train"])
    b = build_parser().parse_args(["train", "--seed", "3", "--agent", "greedy"])
    assert a.seed == 3 and b.seed == 3 and b.agent == "greedy"


def test_train_eval_replay(tmp_path, cfg_path, capsys):
    out = tmp_path / "out"
    assert main(["--config", str(cfg_path), "--out", str(out), "train", "--agent", "replay"]) == 0
    manifest = json.loads(next((out / "runs").glob("*_replay_s0.json")).read_text())
    assert main(["--config", str(cfg_path), "--out", str(out), "eval", "--network", manifest["network"],
                 "--trace"]) == 0
    traces = sorted((out / "traces").glob("*.jsonl"))
    assert len(traces) == 2
    assert main(["replay", str(traces[0])]) == 0
    assert "0 differences" in capsys.readouterr().out


def test_eval_requires_network(cfg_path, tmp_path):
    assert main(["--config", str(cfg_path), "--out", str(tmp_path), "eval"]) == 2
    assert main(["--config", str(cfg_path), "--out", str(tmp_path), "--agent", "greedy", "eval"]) == 0


def test_sweep_counts(cfg_path, tmp_path, capsys):
    out = tmp_path / "sweep"
    assert main(["--config", str(cfg_path), "--out", str(out), "sweep", "--axis", "waypoints",
                 "--grid", "6,8", "--seeds", "2", "--agents", "greedy"]) == 0
    assert "4 runs, 0 failed" in capsys.readouterr().out
    assert (out / "sweep_waypoints_greedy.csv").exists()


def test_bad_config_reported(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nlasers = on\n")
    assert main(["--config", str(bad), "validate"]) == 2
    assert "lasers" in capsys.readouterr().err


def test_validate_exit_zero(capsys):
    assert main(["validate", "--suite", "replay_fifo", "--suite", "reward_case_table"]) == 0
    assert capsys.readouterr().out.count("PASS") == 2
