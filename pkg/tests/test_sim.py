import math

import numpy as np
import pytest

from flsavoid.channel import ChannelModel
from flsavoid.decision import Action, LossSpec
from flsavoid.errors import ConfigurationError
from flsavoid.pipeline import KinematicLimits
from flsavoid.sim import (MissionScript, SimConfig, TargetScenario, lawnmower, run_mission,
                          step)
from flsavoid.world import Scene, VehicleState

LIMITS = KinematicLimits()


def test_right_turn_for_the_time_of_ninety_degrees():
    state = VehicleState((0.0, 0.0, 10.0), 0.0, 0.0, 1.5)
    for _ in range(75):
        state = step(state, Action.RIGHT, LIMITS, 0.1)
    assert state.yaw == pytest.approx(90.0, abs=1e-9)
    assert state.time == pytest.approx(7.5)
    # constant-rate arc of radius v / omega; midpoint-heading chords overshoot
    # the arc by (omega dt)^2 / 24
    radius = 1.5 / math.radians(12.0)
    np.testing.assert_allclose(state.position, (radius, radius, 10.0), rtol=2e-5)


def test_straight_step_holds_course_and_depth():
    state = VehicleState((1.0, 2.0, 10.0), 30.0, 0.0, 1.5)
    nxt = step(state, Action.STRAIGHT, LIMITS, 2.0)
    assert nxt.yaw == 30.0 and nxt.pitch == 0.0
    np.testing.assert_allclose(nxt.position, (1.0 + 3.0 * math.cos(math.radians(30)),
                                              2.0 + 3.0 * math.sin(math.radians(30)), 10.0))


def test_pitch_commands_respect_limit():
    state = VehicleState((0.0, 0.0, 10.0), 0.0, 0.0, 1.5)
    for _ in range(100):
        state = step(state, Action.UP, LIMITS, 0.1)
    assert state.pitch == pytest.approx(30.0)
    assert state.position[2] < 10.0


def test_speed_floor():
    state = step(VehicleState((0, 0, 0), 0.0, 0.0, 0.0), Action.STRAIGHT, LIMITS, 1.0)
    assert state.speed == LIMITS.min_speed


def test_step_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        step(VehicleState((0, 0, 0), 0.0, 0.0, 1.0), 0, LIMITS, 0.0)


def test_a0_steers_toward_waypoint():
    state = VehicleState((0.0, 0.0, 10.0), 0.0, 0.0, 1.5)
    wp = (0.0, 100.0, 10.0)
    for _ in range(300):
        state = step(state, Action.STRAIGHT, LIMITS, 0.1, waypoint=wp)
    bearing = math.degrees(math.atan2(wp[1] - state.position[1], wp[0] - state.position[0]))
    assert state.yaw == pytest.approx(bearing, abs=0.5)


def test_lawnmower_two_legs():
    script = lawnmower((0.0, 0.0), 40.0, 10.0, 2, 5.0)
    assert script.waypoints == ((-20.0, -5.0, 5.0), (20.0, -5.0, 5.0),
                                (20.0, 5.0, 5.0), (-20.0, 5.0, 5.0))
    np.testing.assert_allclose(np.mean(script.waypoints, axis=0), (0.0, 0.0, 5.0))
    with pytest.raises(ConfigurationError):
        lawnmower((0, 0), 40.0, 10.0, 1, 5.0)


def test_lawnmower_legs_alternate():
    wps = np.array(lawnmower((5.0, 5.0), 60.0, 15.0, 4, 8.0).waypoints)
    runs = np.sign(wps[1::2, 0] - wps[0::2, 0])
    np.testing.assert_array_equal(runs, [1, -1, 1, -1])
    np.testing.assert_allclose(np.diff(wps[0::2, 1]), 15.0)


def test_mission_script_validation():
    with pytest.raises(ConfigurationError):
        MissionScript(())
    with pytest.raises(ConfigurationError):
        MissionScript(((0.0, 0.0),))


def test_empty_scene_reaches_waypoint_without_avoiding():
    script = MissionScript(((0.0, 0.0, 10.0), (12.0, 0.0, 10.0)))
    cfg = SimConfig(avoidance=False)
    log = run_mission(Scene(), script, LIMITS, ChannelModel(), LossSpec(), 3, cfg)
    assert log.outcome == "reached"
    assert set(log.commands) == {0}
    assert math.isinf(log.min_distance)
    assert log.false_alarm_count == 0
    assert len(log.pings) == len(log.nav) - 1


def test_target_scenario_is_seeded():
    a = TargetScenario().build(5)
    b = TargetScenario().build(5)
    c = TargetScenario().build(6)
    assert a == b
    assert a[0] != c[0]
    scene, script, start = a
    # the middle of three legs runs south
    assert start.position == (40.0, 0.0, 10.0)
    assert start.yaw == -180.0
    assert script.waypoints[0] == (-40.0, 0.0, 10.0)


def test_baseline_mission_is_deterministic():
    scene, script, start = TargetScenario().build(2)
    cfg = SimConfig(avoidance=False, max_time=20.0)
    one = run_mission(scene, script, LIMITS, ChannelModel(), LossSpec(), 2, cfg, start)
    two = run_mission(scene, script, LIMITS, ChannelModel(), LossSpec(), 2, cfg, start)
    assert one.summary() == two.summary()
    for p, q in zip(one.pings, two.pings):
        np.testing.assert_array_equal(p.beams, q.beams)
