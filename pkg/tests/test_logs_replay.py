import math

import numpy as np
import pytest

from flsavoid.channel import ChannelModel, Ping
from flsavoid.decision import LossSpec
from flsavoid.errors import AlignmentError, ConfigurationError, LogFormatError
from flsavoid.geometry import build_map, prototype_layout, read_snapshot
from flsavoid.logs import (DecisionRecord, NavRecord, read_nav_log, read_ping_log, read_trace,
                           read_truth, trace_text, write_nav_log, write_ping_log, write_truth)
from flsavoid.pipeline import KinematicLimits, PipelineSettings
from flsavoid.replay import NavInterpolator, ReplayConfig, replay, snapshot
from flsavoid.sim import SimConfig, TargetScenario, run_mission
from flsavoid.world import NoiseBurst, Obstacle, Scene


@pytest.fixture(scope="module")
def layout():
    return prototype_layout()


def _pings(n, beams=3, bins=4, seed=0):
    rng = np.random.default_rng(seed)
    return [Ping(0.1 * k, rng.normal(40, 3, (beams, bins)), range(beams)) for k in range(n)]


def test_ping_log_round_trip_is_exact(tmp_path):
    pings = _pings(5)
    path = tmp_path / "pings.csv"
    write_ping_log(path, pings, "abc123")
    layout_hash, back = read_ping_log(path)
    assert layout_hash == "abc123"
    assert len(back) == 5
    for p, q in zip(pings, back):
        assert p.timestamp == q.timestamp
        np.testing.assert_array_equal(p.beams, q.beams)


def test_corrupt_line_is_reported(tmp_path):
    path = tmp_path / "pings.csv"
    write_ping_log(path, _pings(3), "h")
    lines = path.read_text().splitlines()
    # header is line 1, so the sixth record is line 7
    lines[6] = lines[6].replace(",", ",oops", 1)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(LogFormatError) as err:
        read_ping_log(path)
    assert err.value.lineno == 7


def test_ping_bin_count_checked(tmp_path):
    path = tmp_path / "pings.csv"
    write_ping_log(path, _pings(2), "h")
    with pytest.raises(LogFormatError):
        read_ping_log(path, bin_count=5)


def test_ping_timestamps_must_not_regress(tmp_path):
    pings = _pings(3)
    pings[2] = Ping(0.05, pings[2].beams, pings[2].beam_ids)
    path = tmp_path / "pings.csv"
    write_ping_log(path, pings, "h")
    with pytest.raises(LogFormatError):
        read_ping_log(path)


def test_nav_log_round_trip_and_regression(tmp_path):
    recs = [NavRecord(0.1 * k, 1.5 * k, 0.0, 10.0, 0.0, 0.0, 1.5) for k in range(4)]
    path = tmp_path / "nav.csv"
    write_nav_log(path, recs)
    assert read_nav_log(path) == recs
    write_nav_log(path, recs[::-1])
    with pytest.raises(LogFormatError):
        read_nav_log(path)


def test_trace_round_trip_keeps_nan(tmp_path):
    rec = DecisionRecord.from_terms(0.3, 2, {0: 0.5, 2: 0.25}, {0: 0.1, 2: 0.0}, {0: 0.0, 2: 0.2})
    path = tmp_path / "trace.csv"
    path.write_text(trace_text([rec, DecisionRecord.passive(0.4)]))
    back = read_trace(path)
    assert back[0].chosen == 2 and back[0].risk[2] == 0.25
    assert math.isnan(back[0].risk[1])
    assert all(math.isnan(v) for v in back[1].kappa)


def test_truth_round_trip(tmp_path):
    scene = Scene((Obstacle((80.0, 1.0, 10.0), 1.0, 35.0),), 30.0,
                  (NoiseBurst(3.0, 6.0, 2, 4.0, 12.0, 3.5),))
    write_truth(tmp_path / "truth.json", scene, 0.5)
    assert read_truth(tmp_path / "truth.json") == (scene, 0.5)


def test_nav_interpolation():
    a = NavRecord(0.0, 0.0, 0.0, 10.0, 170.0, 0.0, 1.0)
    b = NavRecord(1.0, 2.0, 0.0, 10.0, -170.0, 0.0, 2.0)
    mid = NavInterpolator([a, b])(0.5)
    assert mid.x == 1.0 and mid.speed == 1.5
    # the short way round through 180 degrees
    assert abs(mid.yaw) == pytest.approx(180.0, abs=1e-9)
    with pytest.raises(AlignmentError):
        NavInterpolator([a, b])(1.5)


def test_snapshot_labels_time_and_checks_span(layout, tmp_path):
    pmap = build_map(layout, 0.1)
    text = snapshot(pmap, 2.5, (0.0, 10.0))
    assert text.startswith("# timestamp=2.5\n")
    path = tmp_path / "snap.csv"
    path.write_text(text)
    assert len(read_snapshot(path)) == layout.n_beams * layout.bin_count
    with pytest.raises(ValueError):
        snapshot(pmap, 11.0, (0.0, 10.0))


def test_replay_config_validation():
    with pytest.raises(ConfigurationError):
        ReplayConfig(levels=())
    with pytest.raises(ConfigurationError):
        ReplayConfig(levels=(0.0,))
    with pytest.raises(ConfigurationError):
        ReplayConfig(include_waypoint_cost=True)


@pytest.fixture(scope="module")
def short_mission(layout):
    scene, script, start = TargetScenario(approach=30.0).build(4)
    settings = PipelineSettings(actions=(0, 1, 2))
    cfg = SimConfig(layout, settings, max_time=6.0)
    log = run_mission(scene, script, KinematicLimits(), ChannelModel(), LossSpec(), 4, cfg, start)
    return log, script, settings


def test_replay_reproduces_the_simulated_trace(layout, short_mission, tmp_path):
    log, script, settings = short_mission
    log.write(tmp_path)
    _, pings = read_ping_log(tmp_path / "pings.csv", layout.bin_count)
    nav = read_nav_log(tmp_path / "nav.csv")
    cfg = ReplayConfig(levels=(ChannelModel().delta_db,), include_waypoint_cost=True,
                       waypoints=script.waypoints, settings=settings)
    report = replay(pings, nav, layout, cfg, read_truth(tmp_path / "truth.json"))
    sim_trace = trace_text(read_trace(tmp_path / "decisions.csv"))
    assert trace_text(report.levels[0].timeline) == sim_trace


def test_replay_without_truth_is_unlabeled(layout, short_mission):
    log, _, settings = short_mission
    cfg = ReplayConfig(levels=(7.0,), settings=settings, snapshot_times=(1.0,))
    report = replay(log.pings[:20], log.nav, layout, cfg)
    assert report.level(7.0).false_alarm_count is None
    assert "unlabeled" in report.summary_text()
    assert list(report.level(7.0).snapshots) == [1.0]
    with pytest.raises(ConfigurationError):
        replay(log.pings[:20], log.nav, layout,
               ReplayConfig(levels=(7.0,), settings=settings, snapshot_times=(9.0,)))
