import math

import numpy as np
import pytest

from flsavoid.decision import (Action, LossSpec, Trajectory, TrajectoryDistribution, Waypoint,
                               action_collision_cost, cell_membership, collision_prob,
                               generate_trajectories, risk_argmin, select_action, steer_profile,
                               waypoint_cost, weighted_collision_cost)
from flsavoid.errors import ConfigurationError, DecisionError
from flsavoid.geometry import CellIndex, build_map, prototype_layout

from oracles import enumerate_collision_prob, inside_cell


@pytest.fixture(scope="module")
def layout():
    return prototype_layout()


def _straight(length, n=200):
    x = np.linspace(0.0, length, n)
    return Trajectory(np.stack([x, 0 * x, 0 * x], axis=1), 10.0, 0.0, 0.0)


def _single_cell(layout, cell):
    """Trajectory whose only in-map sample sits in the middle of ``cell``."""
    lc = layout.cell_length
    r = (cell.i - 0.5) * lc
    th = math.radians(np.mean(layout.horizontal_edges[cell.j - 1:cell.j + 1]))
    ph = math.radians(np.mean(layout.vertical_edges[cell.k - 1:cell.k + 1]))
    p = [r * math.cos(ph) * math.cos(th), r * math.cos(ph) * math.sin(th), -r * math.sin(ph)]
    return Trajectory(np.array([[0.0, 0.0, 0.0], p]), 1.0, 0.0, 0.0)


def test_five_metre_straight_path_cells(layout):
    pmap = build_map(layout)
    traj = generate_trajectories((0,), speed=0.5, yaw_rate=12, pitch_rate=5,
                                 horizon=10.0)[Action.STRAIGHT][0]
    assert np.linalg.norm(traj.samples[-1]) == pytest.approx(5.0)
    cells = cell_membership(traj, pmap)
    assert cells == {CellIndex(i, 3, 3) for i in range(1, 23)}
    for c in cells:
        assert inside_cell(traj.samples, layout, c).any()


def test_origin_only_trajectory_is_empty(layout):
    traj = Trajectory(np.zeros((1, 3)), 0.0, 0.0, 0.0)
    assert cell_membership(traj, build_map(layout)) == set()


def test_path_leaving_the_sector(layout):
    # 2 m ahead, then straight to starboard past the 45 degree edge
    pts = [[x, 0.0, 0.0] for x in np.linspace(0, 2, 21)]
    pts += [[2.0, y, 0.0] for y in np.linspace(0.1, 6.0, 60)]
    traj = Trajectory(np.array(pts), 1.0, 90.0, 0.0)
    cells = cell_membership(traj, build_map(layout))
    for c in cells:
        assert inside_cell(np.array(pts), layout, c).any()
    assert all(c.k == 3 for c in cells)
    assert max(c.j for c in cells) == 5


def test_collision_prob_examples(layout):
    pmap = build_map(layout, 0.0)
    one = _single_cell(layout, CellIndex(40, 3, 3))
    pmap.probs[2, 39] = 0.3
    assert collision_prob(one, pmap) == pytest.approx(0.3, abs=1e-15)
    two = _straight(40 * layout.cell_length - 1e-6)
    pmap = build_map(layout, 0.0)
    pmap.probs[2, 10] = pmap.probs[2, 20] = 0.5
    assert collision_prob(two, pmap) == pytest.approx(0.75, abs=1e-15)
    assert collision_prob(two, build_map(layout, 0.0)) == 0.0


def test_weighted_cost_examples(layout):
    pmap = build_map(layout, 0.0)
    pmap.probs[2, 0] = 0.4
    near = _single_cell(layout, CellIndex(1, 3, 3))
    assert weighted_collision_cost(near, pmap, 1.0, 219) == pytest.approx(0.4, abs=1e-15)
    pmap = build_map(layout, 0.0)
    pmap.probs[2, 218] = 0.4
    far = _single_cell(layout, CellIndex(219, 3, 3))
    assert weighted_collision_cost(far, pmap, 1.0, 219) == pytest.approx(0.4 / 219, rel=1e-12)
    assert weighted_collision_cost(far, pmap, 1.0, 219) == pytest.approx(0.00183, abs=1e-5)


def test_zero_range_weight_is_plain_probability(layout):
    rng = np.random.default_rng(1)
    pmap = build_map(layout)
    pmap.probs[:] = rng.random(pmap.probs.shape) * 0.2
    for traj in generate_trajectories(speed=1.5, yaw_rate=12, pitch_rate=5).by_action.values():
        for t in traj:
            assert weighted_collision_cost(t, pmap, 0.0) == collision_prob(t, pmap)


def test_action_cost_is_weighted_mean(layout):
    pmap = build_map(layout, 0.0)
    pmap.probs[2, 9] = 0.2
    pmap.probs[4, 9] = 0.6
    a = _single_cell(layout, CellIndex(10, 3, 3))
    b = _single_cell(layout, CellIndex(10, 5, 3))
    a = Trajectory(a.samples, 1.0, 0.0, 0.0, 0.5)
    b = Trajectory(b.samples, 1.0, 0.0, 0.0, 0.5)
    dist = TrajectoryDistribution({Action.STRAIGHT: [a, b]})
    assert action_collision_cost(0, dist, pmap, 0.0) == pytest.approx(0.4, abs=1e-15)
    with pytest.raises(ConfigurationError):
        action_collision_cost(Action.UP, dist, pmap, 0.0)


def test_empty_map_costs_nothing(layout):
    dist = generate_trajectories(speed=1.5, yaw_rate=12, pitch_rate=5)
    pmap = build_map(layout, 0.0)
    for a in dist.actions:
        assert action_collision_cost(a, dist, pmap, 0.5) == 0.0
    chosen, report = select_action(pmap, dist, Waypoint(0.0, 0.0), LossSpec())
    assert chosen == Action.STRAIGHT
    assert report.risk[Action.STRAIGHT] == 0.0


def test_waypoint_cost_examples():
    assert waypoint_cost((30.0, 10.0), Waypoint(30.0, 10.0), 1.0) == pytest.approx(0.0, abs=1e-12)
    assert waypoint_cost((90.0, 0.0), Waypoint(0.0, 0.0), 1.0) == pytest.approx(math.pi / 2,
                                                                               abs=1e-12)
    assert waypoint_cost((180.0, 0.0), Waypoint(0.0, 0.0), 2.0) == pytest.approx(2 * math.pi,
                                                                                abs=1e-12)


def test_obstacle_to_port_turns_starboard(layout):
    pmap = build_map(layout, 0.001)
    edges = layout.radial_edges
    near = (edges[1:] > 3.0) & (edges[:-1] < 10.0)
    for j in (1, 2, 3):
        pmap.probs[layout.beam_number(j, 3), near] = 0.9
    dist = generate_trajectories((0, 1, 2), speed=1.5, yaw_rate=12, pitch_rate=5)
    chosen, report = select_action(pmap, dist, Waypoint(0.0, 0.0), LossSpec())
    assert chosen == Action.RIGHT
    assert report.kappa[Action.RIGHT] < report.kappa[Action.LEFT] <= report.kappa[Action.STRAIGHT]


def test_symmetric_map_breaks_ties_by_preference(layout):
    pmap = build_map(layout, 0.0)
    # a wall straight ahead makes a0 lose, leaving the mirror-image turns tied
    pmap.probs[layout.beam_number(3, 3), 20:60] = 0.9
    dist = generate_trajectories((0, 1, 2), speed=1.5, yaw_rate=12, pitch_rate=5)
    chosen, report = select_action(pmap, dist, Waypoint(0.0, 0.0), LossSpec())
    assert report.risk[Action.LEFT] == pytest.approx(report.risk[Action.RIGHT], abs=1e-12)
    assert chosen == Action.LEFT
    swapped = LossSpec(tie_break=(0, 2, 1, 3, 4))
    assert select_action(pmap, dist, Waypoint(0.0, 0.0), swapped)[0] == Action.RIGHT


def test_argmin_rejects_all_non_finite():
    with pytest.raises(DecisionError):
        risk_argmin({0: math.nan, 1: math.inf})
    assert risk_argmin({0: math.nan, 1: 0.5}) == Action.LEFT


def test_steer_profile_saturates_then_decays():
    t = np.linspace(0, 30, 301)
    a = steer_profile(t, 0.0, 90.0, 12.0, 0.5)
    rate = np.diff(a) / np.diff(t)
    assert rate.max() <= 12.0 + 1e-9
    assert np.all(rate >= -1e-12)
    assert a[-1] == pytest.approx(90.0, abs=0.1)
    # unsaturated start is a pure exponential
    b = steer_profile(t, 0.0, 10.0, 12.0, 0.5)
    np.testing.assert_allclose(b, 10.0 * (1 - np.exp(-0.5 * t)))


def test_turn_trajectories(layout):
    dist = generate_trajectories(speed=1.5, yaw_rate=12, pitch_rate=5, horizon=10.0)
    left, right = dist.nominal(Action.LEFT), dist.nominal(Action.RIGHT)
    assert left.terminal_yaw == pytest.approx(-120.0)
    assert right.terminal_yaw == pytest.approx(120.0)
    np.testing.assert_allclose(left.samples[:, 1], -right.samples[:, 1], atol=1e-12)
    assert [t.weight for t in dist[Action.LEFT]] == [0.25, 0.5, 0.25]
    assert dist.nominal(Action.UP).terminal_pitch == pytest.approx(30.0)
    for trajs in dist.by_action.values():
        for t in trajs:
            assert t.max_spacing() <= 0.1 + 1e-9


def test_collision_prob_matches_cell_enumeration(layout):
    rng = np.random.default_rng(21)
    pmap = build_map(layout)
    pmap.probs[:] = rng.random(pmap.probs.shape) ** 4
    dist = generate_trajectories(speed=1.5, yaw_rate=12, pitch_rate=5, horizon=4.0)
    for trajs in dist.by_action.values():
        for t in trajs:
            assert collision_prob(t, pmap) == pytest.approx(
                enumerate_collision_prob(t.samples, pmap), abs=1e-12)
