"""Action selection by posterior expected loss over candidate trajectories.

For each action ``a^k`` the risk is::

    R(a^k) = C0^k * (1 - kappa^k) + (C0^k + C1) * kappa^k

where ``kappa^k`` is the distance-weighted collision cost of the action's
trajectory set and ``C0^k`` the waypoint-deviation cost of its nominal
trajectory.  The selected action is the argmin, ties going to the earlier
action in the preference order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, DecisionError
from .geometry import BeamLayout, CellIndex, PolarMap
from .world import wrap_deg


class Action(IntEnum):
    STRAIGHT = 0
    LEFT = 1
    RIGHT = 2
    UP = 3
    DOWN = 4

    @property
    def label(self) -> str:
        return f"a{int(self)}"


ALL_ACTIONS = tuple(Action)


@dataclass(frozen=True)
class ActionSet:
    actions: tuple[Action, ...] = ALL_ACTIONS

    def __post_init__(self):
        acts = tuple(Action(a) for a in self.actions)
        if Action.STRAIGHT not in acts:
            raise ConfigurationError("action set must contain a0 (go straight)")
        if len(set(acts)) != len(acts):
            raise ConfigurationError("action set has duplicate actions")
        object.__setattr__(self, "actions", acts)

    def __iter__(self):
        return iter(self.actions)

    def __len__(self):
        return len(self.actions)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Candidate path in the sonar frame.

    ``terminal_yaw`` and ``terminal_pitch`` are the attitude at the end of
    the horizon in degrees; they are compared with waypoint angles expressed
    in the same reference.
    """

    samples: np.ndarray
    duration: float
    terminal_yaw: float
    terminal_pitch: float
    weight: float = 1.0

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if s.shape[1] != 3:
            raise ValueError("trajectory samples must be (N, 3)")
        if not np.allclose(s[0], 0.0, atol=1e-12):
            raise ValueError("trajectory must start at the sonar origin")
        if self.weight < 0:
            raise ValueError("trajectory weight must be non-negative")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "_members", {})

    def max_spacing(self) -> float:
        if len(self.samples) < 2:
            return 0.0
        return float(np.max(np.linalg.norm(np.diff(self.samples, axis=0), axis=1)))


@dataclass(frozen=True)
class TrajectoryDistribution:
    """Weighted candidate trajectories for each action."""

    by_action: dict

    def __post_init__(self):
        for a, trajs in self.by_action.items():
            if len(trajs) == 0:
                raise ConfigurationError(f"action {Action(a).label} has no trajectories")
            total = math.fsum(t.weight for t in trajs)
            if abs(total - 1.0) > 1e-9:
                raise ConfigurationError(
                    f"trajectory weights for {Action(a).label} sum to {total}, expected 1")

    @property
    def actions(self) -> tuple[Action, ...]:
        return tuple(Action(a) for a in self.by_action)

    def nominal(self, action) -> Trajectory:
        """Highest-weight trajectory of an action (first one on ties)."""
        trajs = self.by_action[Action(action)]
        return max(trajs, key=lambda t: t.weight)

    def __getitem__(self, action):
        return self.by_action[Action(action)]


@dataclass(frozen=True)
class LossSpec:
    """Cost constants of the decision rule.

    c1:
        Cost of a collision, the same for every action.
    c_waypoint:
        Cost per radian of angle between the terminal attitude and the
        waypoint direction.
    c_d:
        Range weighting in [0, 1]; 0 weighs every cell equally, 1 makes the
        farthest cell almost free.
    c_maneuver:
        Fixed extra cost of any action other than a0.
    false_alarm_offset:
        Replace ``C0^k`` by ``C0^k - C0^0`` for ``k != 0``.
    tie_break:
        Preference order used when risks tie.
    """

    c1: float = 1.0
    c_waypoint: float = 0.1
    c_d: float = 0.5
    c_maneuver: float = 0.0
    false_alarm_offset: bool = False
    tie_break: tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self):
        if not self.c1 > 0:
            raise ConfigurationError("c1 must be positive", "loss.c1")
        if not 0.0 <= self.c_d <= 1.0:
            raise ConfigurationError("c_d must lie in [0, 1]", "loss.c_d")
        if self.c_waypoint < 0:
            raise ConfigurationError("c_waypoint must be non-negative", "loss.c_waypoint")
        if self.c_maneuver < 0:
            raise ConfigurationError("c_maneuver must be non-negative", "loss.c_maneuver")
        object.__setattr__(self, "tie_break", tuple(int(a) for a in self.tie_break))

    def scaled(self, factor: float) -> "LossSpec":
        return LossSpec(self.c1 * factor, self.c_waypoint * factor, self.c_d,
                        self.c_maneuver * factor, self.false_alarm_offset, self.tie_break)


@dataclass(frozen=True)
class Waypoint:
    heading: float
    pitch: float

    def __post_init__(self):
        if not -90.0 <= self.pitch <= 90.0:
            raise ValueError("waypoint pitch must lie in [-90, 90] degrees")


# --------------------------------------------------------------------------
# trajectories


def steer_profile(t, start, target, max_rate, gain):
    """Angle under saturated proportional steering toward ``target``.

    The rate is ``gain * (target - angle)`` clipped to ``max_rate``; the
    closed form is a constant-rate ramp followed by an exponential approach.
    """
    t = np.asarray(t, dtype=float)
    e0 = target - start
    if e0 == 0.0 or max_rate <= 0.0 or gain <= 0.0:
        return np.full_like(t, start)
    sign = 1.0 if e0 > 0 else -1.0
    knee = max_rate / gain
    if abs(e0) <= knee:
        return target - e0 * np.exp(-gain * t)
    t_sat = (abs(e0) - knee) / max_rate
    ramp = start + sign * max_rate * t
    tail = target - sign * knee * np.exp(-gain * (t - t_sat))
    return np.where(t <= t_sat, ramp, tail)


@lru_cache(maxsize=1024)
def _arc(speed, yaw_rate, pitch_rate, pitch0, max_pitch, horizon, dt, steer=None):
    n = int(math.ceil(horizon / dt - 1e-9))
    t = np.arange(n + 1) * dt
    t[-1] = horizon
    if steer is None:
        yaw = yaw_rate * t
        pitch = pitch0 + pitch_rate * t
    else:
        rel_yaw, target_pitch, gain = steer
        yaw = steer_profile(t, 0.0, rel_yaw, yaw_rate, gain)
        pitch = steer_profile(t, pitch0, target_pitch, pitch_rate, gain)
    pitch = np.clip(pitch, -max_pitch, max_pitch)
    # midpoint attitude over each step
    pm = np.radians(0.5 * (pitch[1:] + pitch[:-1]))
    ym = np.radians(0.5 * (yaw[1:] + yaw[:-1]))
    h = np.diff(t) * speed
    d = np.stack([np.cos(pm) * np.cos(ym), np.cos(pm) * np.sin(ym), -np.sin(pm)], axis=1)
    pos = np.vstack([np.zeros(3), np.cumsum(d * h[:, None], axis=0)])
    # heading-aligned level frame -> body frame pitched by pitch0
    p0 = math.radians(pitch0)
    c, s = math.cos(p0), math.sin(p0)
    ry = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    body = pos @ ry
    body[0] = 0.0
    return body, float(yaw[-1]), float(pitch[-1])


_COMMAND_RATES = {
    Action.STRAIGHT: (0.0, 0.0),
    Action.LEFT: (-1.0, 0.0),
    Action.RIGHT: (1.0, 0.0),
    Action.UP: (0.0, 1.0),
    Action.DOWN: (0.0, -1.0),
}


def generate_trajectories(actions=ALL_ACTIONS, *, speed: float, yaw_rate: float,
                          pitch_rate: float, horizon: float = 10.0, yaw0: float = 0.0,
                          pitch0: float = 0.0, max_pitch: float = 30.0,
                          spacing: float = 0.1,
                          perturbation=(-0.2, 0.0, 0.2),
                          weights=(0.25, 0.5, 0.25),
                          steer_to=None, steer_gain: float = 0.5) -> TrajectoryDistribution:
    """Constant-rate arcs for each action with perturbed turn/pitch rates.

    ``yaw_rate`` and ``pitch_rate`` are the commanded magnitudes (deg/s).
    Each turning action gets one arc per perturbation, its rates scaled by
    ``1 + perturbation``.  a0 is a single path: straight ahead, or, when
    ``steer_to=(heading, pitch)`` is given, the rate-limited proportional
    steering toward that attitude that the vehicle applies under a0.
    ``spacing`` bounds the distance between consecutive samples.
    """
    if speed <= 0 or horizon <= 0 or spacing <= 0:
        raise ConfigurationError("speed, horizon and spacing must be positive")
    if abs(math.fsum(weights) - 1.0) > 1e-9 or len(weights) != len(perturbation):
        raise ConfigurationError("perturbation weights must match and sum to 1")
    dt = spacing / speed
    common = (float(speed),)
    tail = (float(max_pitch), float(horizon), dt)
    out = {}
    for a in ActionSet(tuple(actions)):
        if a == Action.STRAIGHT:
            if steer_to is None:
                args = common + (0.0, 0.0, float(pitch0)) + tail
            else:
                rel = float(wrap_deg(steer_to[0] - yaw0))
                steer = (rel, float(np.clip(steer_to[1], -max_pitch, max_pitch)),
                         float(steer_gain))
                args = common + (float(yaw_rate), float(pitch_rate), float(pitch0)) + tail + (steer,)
            body, dyaw, pend = _arc(*args)
            out[a] = [Trajectory(body, horizon, yaw0 + dyaw, pend, 1.0)]
            continue
        sy, sp = _COMMAND_RATES[a]
        trajs = []
        for dp, w in zip(perturbation, weights):
            yr, pr = sy * yaw_rate * (1.0 + dp) + 0.0, sp * pitch_rate * (1.0 + dp) + 0.0
            body, dyaw, pend = _arc(float(speed), float(yr), float(pr), float(pitch0), *tail)
            trajs.append(Trajectory(body, horizon, yaw0 + dyaw, pend, w))
        out[a] = trajs
    return TrajectoryDistribution(out)


# --------------------------------------------------------------------------
# collision terms


def _member_flat(traj: Trajectory, layout: BeamLayout) -> np.ndarray:
    """Sorted flat indices ``beam * bin_count + (i - 1)`` of visited cells."""
    key = layout.layout_hash()
    cached = traj._members.get(key)
    if cached is None:
        beam, idx = layout.locate(traj.samples)
        ok = beam >= 0
        cached = np.unique(beam[ok] * layout.bin_count + idx[ok] - 1)
        traj._members[key] = cached
    return cached


def cell_membership(traj: Trajectory, pmap: PolarMap) -> set[CellIndex]:
    layout = pmap.layout
    flat = _member_flat(traj, layout)
    out = set()
    for f in flat:
        b, i0 = divmod(int(f), layout.bin_count)
        j, k = layout.beams[b]
        out.add(CellIndex(i0 + 1, j, k))
    return out


def range_weights(layout: BeamLayout, c_d: float) -> np.ndarray:
    """Per radial index weight ``(I_x - (i - 1) c_d) / I_x``."""
    ix = layout.bin_count
    i = np.arange(1, ix + 1)
    return (ix - (i - 1) * c_d) / ix


def _no_collision_product(values) -> float:
    # canonical cell order keeps this identical to a full-map enumeration
    return math.prod(1.0 - v for v in values)


def collision_prob(traj: Trajectory, pmap: PolarMap) -> float:
    flat = _member_flat(traj, pmap.layout)
    p = pmap.probs.ravel()[flat]
    return 1.0 - _no_collision_product(p.tolist())


def weighted_collision_cost(traj: Trajectory, pmap: PolarMap, c_d: float,
                            i_x: int | None = None) -> float:
    layout = pmap.layout
    if not 0.0 <= c_d <= 1.0:
        raise ConfigurationError("c_d must lie in [0, 1]")
    i_x = layout.bin_count if i_x is None else i_x
    flat = _member_flat(traj, layout)
    p = pmap.probs.ravel()[flat]
    i = flat % layout.bin_count + 1
    w = (i_x - (i - 1) * c_d) / i_x
    return 1.0 - _no_collision_product((p * w).tolist())


def action_collision_cost(action, traj_dist: TrajectoryDistribution, pmap: PolarMap,
                          c_d: float) -> float:
    try:
        trajs = traj_dist[action]
    except (KeyError, ValueError):
        raise ConfigurationError(f"action {action!r} not in trajectory distribution") from None
    return float(sum(t.weight * weighted_collision_cost(t, pmap, c_d) for t in trajs))


def waypoint_cost(traj_or_angles, wp: Waypoint, c: float) -> float:
    """Angle between the terminal attitude and the waypoint direction, times ``c``."""
    if isinstance(traj_or_angles, Trajectory):
        tk, pk = traj_or_angles.terminal_yaw, traj_or_angles.terminal_pitch
    else:
        tk, pk = traj_or_angles
    u = _unit(tk, pk)
    v = _unit(wp.heading, wp.pitch)
    # atan2 of sine and cosine stays accurate near 0 and pi, where acos does not
    cross = np.linalg.norm(np.cross(u, v))
    return math.atan2(float(cross), float(np.dot(u, v))) * c


def _unit(yaw_deg: float, pitch_deg: float) -> np.ndarray:
    t, p = math.radians(yaw_deg), math.radians(pitch_deg)
    return np.array([math.cos(p) * math.cos(t), math.cos(p) * math.sin(t), math.sin(p)])


# --------------------------------------------------------------------------
# decision


@dataclass(frozen=True)
class RiskReport:
    """Every term of one decision, keyed by action."""

    chosen: Action
    risk: dict = field(default_factory=dict)
    kappa: dict = field(default_factory=dict)
    c0: dict = field(default_factory=dict)

    def engaged(self, threshold: float = 0.0) -> bool:
        """Avoidance flag for telemetry; does not influence the decision."""
        if self.chosen == Action.STRAIGHT:
            return False
        return self.kappa.get(Action.STRAIGHT, 1.0) >= threshold


def risk_argmin(risks: dict, tie_break=(0, 1, 2, 3, 4), rel_tol: float = 1e-12) -> Action:
    """Argmin over finite risks; near-ties resolved by ``tie_break`` order."""
    finite = {Action(a): r for a, r in risks.items() if math.isfinite(r)}
    if not finite:
        raise DecisionError("no action has a finite risk")
    best = min(finite.values())
    tol = rel_tol * max(1.0, abs(best))
    tied = [a for a, r in finite.items() if r - best <= tol]
    rank = {Action(a): n for n, a in enumerate(tie_break)}
    return min(tied, key=lambda a: (rank.get(a, len(rank) + int(a)), int(a)))


def select_action(pmap: PolarMap, traj_dist: TrajectoryDistribution, wp: Waypoint | None,
                  loss: LossSpec) -> tuple[Action, RiskReport]:
    """Pick the action minimizing posterior expected loss.

    With ``wp=None`` the waypoint term is dropped and ``C0`` reduces to the
    manoeuvre cost.
    """
    kappa, c0 = {}, {}
    for a in traj_dist.actions:
        kappa[a] = action_collision_cost(a, traj_dist, pmap, loss.c_d)
        base = 0.0 if wp is None else waypoint_cost(traj_dist.nominal(a), wp, loss.c_waypoint)
        c0[a] = base + (loss.c_maneuver if a != Action.STRAIGHT else 0.0)
    if loss.false_alarm_offset and Action.STRAIGHT in c0:
        ref = c0[Action.STRAIGHT]
        c0 = {a: (v - ref if a != Action.STRAIGHT else v) for a, v in c0.items()}
    risk = {a: c0[a] * (1.0 - kappa[a]) + (c0[a] + loss.c1) * kappa[a] for a in kappa}
    chosen = risk_argmin(risk, loss.tie_break)
    return chosen, RiskReport(chosen, risk, kappa, c0)
