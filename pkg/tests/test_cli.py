import csv

import pytest
import yaml

from flsavoid.cli import main

SMALL = {
    "layout": {"horizontal_edges": [-15, -5, 5, 15], "vertical_edges": [-5, 5],
               "bin_count": 10, "max_range": 10.0, "topology": "full_grid"},
    "velocity": {"points": 3},
    "planner": {"actions": [0, 1, 2], "horizon_s": 4.0},
    "scene": {"obstacles": [{"position": [8.0, 0.5, 10.0], "radius": 0.5}]},
    "mission": {"waypoints": [[0.0, 0.0, 10.0], [6.0, 0.0, 10.0]]},
    "seeds": [1, 2],
}


def _write(path, cfg):
    path.write_text(yaml.safe_dump(cfg))
    return path


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_simulate_writes_logs_and_summary(tmp_path, capsys):
    cfg = _write(tmp_path / "run.yaml", SMALL)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    rows = _rows(tmp_path / "out" / "summary.csv")
    assert [r["seed"] for r in rows] == ["1", "2"]
    for seed in (1, 2):
        d = tmp_path / "out" / f"seed_{seed}"
        for name in ("nav.csv", "pings.csv", "decisions.csv", "summary.csv", "truth.json"):
            assert (d / name).exists()
    assert "collision rate" in capsys.readouterr().out


def test_missing_mission_is_a_config_error(tmp_path, capsys):
    cfg = dict(SMALL)
    del cfg["mission"]
    path = _write(tmp_path / "run.yaml", cfg)
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "out")]) == 2
    assert "[mission]" in capsys.readouterr().err


def test_unknown_key_is_a_config_error(tmp_path, capsys):
    path = _write(tmp_path / "run.yaml", {**SMALL, "channel": {"delta": 7.0}})
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "out")]) == 2
    assert "channel.delta" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.yaml"),
                 "--out", str(tmp_path / "out")]) == 2


def test_sweep_rejects_non_scalar(tmp_path):
    path = _write(tmp_path / "run.yaml", SMALL)
    assert main(["sweep", "--config", str(path), "--param", "planner.actions",
                 "--values", "1,2", "--out", str(tmp_path / "out")]) == 2


def test_replay_of_corrupt_log_exits_3(tmp_path):
    cfg = _write(tmp_path / "run.yaml", SMALL)
    (tmp_path / "pings.csv").write_text("0.0,0,1.0,x\n")
    (tmp_path / "nav.csv").write_text("")
    assert main(["replay", "--config", str(cfg), "--pings", str(tmp_path / "pings.csv"),
                 "--nav", str(tmp_path / "nav.csv"), "--out", str(tmp_path / "r")]) == 3


@pytest.fixture(scope="module")
def recorded(tmp_path_factory):
    base = tmp_path_factory.mktemp("rec")
    cfg = _write(base / "run.yaml", {**SMALL, "seeds": 3})
    assert main(["simulate", "--config", str(cfg), "--out", str(base / "sim")]) == 0
    return base, base / "sim" / "seed_3"


def test_sweep_over_sensitivity_matches_replay(recorded, tmp_path):
    base, logs = recorded
    cfg = {**SMALL, "replay": {"levels": [4.0, 7.0], "pings": str(logs / "pings.csv"),
                               "nav": str(logs / "nav.csv")}}
    path = _write(tmp_path / "run.yaml", cfg)
    assert main(["replay", "--config", str(path), "--pings", str(logs / "pings.csv"),
                 "--nav", str(logs / "nav.csv"), "--out", str(tmp_path / "rep")]) == 0
    assert main(["sweep", "--config", str(path), "--param", "channel.delta_db",
                 "--values", "4,7", "--out", str(tmp_path / "sw")]) == 0
    for level in ("4", "7"):
        ref = (tmp_path / "rep" / f"timeline_delta{level}.csv").read_text()
        sub = tmp_path / "sw" / f"channel.delta_db={level}" / f"timeline_delta{level}.csv"
        assert sub.read_text() == ref
    rows = _rows(tmp_path / "sw" / "sweep_summary.csv")
    assert [r["value"] for r in rows] == ["4", "7"]


def test_missing_scene_is_a_config_error(tmp_path, capsys):
    cfg = {k: v for k, v in SMALL.items() if k != "scene"}
    path = _write(tmp_path / "run.yaml", cfg)
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "out")]) == 2
    assert "scene" in capsys.readouterr().err


def test_replay_writes_one_timeline_per_level(recorded, tmp_path):
    base, logs = recorded
    path = _write(tmp_path / "run.yaml", {**SMALL, "replay": {"levels": [4.0, 7.0, 10.0]}})
    assert main(["replay", "--config", str(path), "--pings", str(logs / "pings.csv"),
                 "--nav", str(logs / "nav.csv"), "--out", str(tmp_path / "rep")]) == 0
    names = sorted(p.name for p in (tmp_path / "rep").glob("timeline_*.csv"))
    assert names == ["timeline_delta10.csv", "timeline_delta4.csv", "timeline_delta7.csv"]
    path = _write(tmp_path / "one.yaml", {**SMALL, "replay": {"levels": [7.0]}})
    assert main(["replay", "--config", str(path), "--pings", str(logs / "pings.csv"),
                 "--nav", str(logs / "nav.csv"), "--out", str(tmp_path / "one")]) == 0
    assert len(list((tmp_path / "one").glob("timeline_*.csv"))) == 1
