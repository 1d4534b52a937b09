"""Kinematic vehicle, lawnmower missions and the seeded mission runner."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import ChannelModel, synth_ping
from .decision import Action, LossSpec
from .errors import ConfigurationError
from .geometry import BeamLayout, prototype_layout
from .logs import (DecisionRecord, NavRecord, nav_log_text, ping_log_text, summary_row,
                   trace_text, atomic_write, write_truth, SUMMARY_COLUMNS)
from .pipeline import (KinematicLimits, Pipeline, PipelineSettings, WaypointTracker,
                       obstacle_on_paths)
from .decision import steer_profile
from .world import Obstacle, Scene, VehicleState, bearing_to, wrap_deg


@dataclass(frozen=True)
class MissionScript:
    """Ordered waypoints (north, east, depth) and the radius that counts as reached."""

    waypoints: tuple
    acceptance_radius: float = 3.0

    def __post_init__(self):
        wps = tuple(tuple(float(c) for c in w) for w in self.waypoints)
        if len(wps) == 0:
            raise ConfigurationError("mission needs at least one waypoint", "mission.waypoints")
        if any(len(w) != 3 for w in wps):
            raise ConfigurationError("waypoints are (north, east, depth)", "mission.waypoints")
        if not self.acceptance_radius > 0:
            raise ConfigurationError("acceptance_radius must be positive",
                                     "mission.acceptance_radius")
        object.__setattr__(self, "waypoints", wps)


def step(state: VehicleState, command, limits: KinematicLimits, dt: float,
         waypoint=None) -> VehicleState:
    """Advance the vehicle by ``dt`` seconds at constant speed.

    a1/a2 turn left/right at the maximum yaw rate, a3/a4 pitch up/down at
    the maximum pitch rate, and a0 steers toward ``waypoint`` (or holds its
    attitude when there is none) with the rate-limited proportional law.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    command = Action(command)
    yaw0, pitch0 = state.yaw, state.pitch
    if command == Action.STRAIGHT:
        if waypoint is not None:
            heading, elev = bearing_to(state.position, waypoint)
            rel = float(wrap_deg(heading - yaw0))
            dyaw = float(steer_profile(dt, 0.0, rel, limits.max_yaw_rate, limits.steer_gain))
            target_pitch = float(np.clip(elev, -limits.max_pitch, limits.max_pitch))
            pitch1 = float(steer_profile(dt, pitch0, target_pitch, limits.max_pitch_rate,
                                         limits.steer_gain))
        else:
            dyaw, pitch1 = 0.0, pitch0
    elif command in (Action.LEFT, Action.RIGHT):
        sign = -1.0 if command == Action.LEFT else 1.0
        dyaw, pitch1 = sign * limits.max_yaw_rate * dt, pitch0
    else:
        sign = 1.0 if command == Action.UP else -1.0
        dyaw, pitch1 = 0.0, pitch0 + sign * limits.max_pitch_rate * dt
    pitch1 = float(np.clip(pitch1, -limits.max_pitch, limits.max_pitch))
    speed = max(state.speed, limits.min_speed)
    ym = math.radians(yaw0 + 0.5 * dyaw)
    pm = math.radians(0.5 * (pitch0 + pitch1))
    d = speed * dt
    n, e, z = state.position
    pos = (n + d * math.cos(pm) * math.cos(ym), e + d * math.cos(pm) * math.sin(ym),
           z - d * math.sin(pm))
    return VehicleState(pos, float(wrap_deg(yaw0 + dyaw)), pitch1, speed, state.time + dt,
                        dyaw / dt, (pitch1 - pitch0) / dt)


def lawnmower(center, leg_length: float, spacing: float, legs: int,
              depth: float) -> MissionScript:
    """Boustrophedon pattern of north-south legs centred on ``center``.

    Leg ``l`` runs at east offset ``(l - (legs - 1) / 2) * spacing``; even
    legs run north, odd legs south.
    """
    if legs < 2:
        raise ConfigurationError("a lawnmower needs at least two legs", "mission.legs")
    cn, ce = float(center[0]), float(center[1])
    half = 0.5 * leg_length
    wps = []
    for leg in range(legs):
        east = ce + (leg - (legs - 1) / 2.0) * spacing
        south, north = (cn - half, east, depth), (cn + half, east, depth)
        wps.extend([south, north] if leg % 2 == 0 else [north, south])
    return MissionScript(tuple(wps))


@dataclass(frozen=True)
class SimConfig:
    """Mission-runner settings.

    avoidance:
        False forces a0 every ping (the no-avoidance baseline).
    record_pings:
        Keep synthesized pings in the log (needed for replay).
    """

    layout: BeamLayout = field(default_factory=prototype_layout)
    settings: PipelineSettings = PipelineSettings()
    vehicle_radius: float = 0.5
    timeout_factor: float = 3.0
    avoidance: bool = True
    record_pings: bool = True
    max_time: float | None = None

    def __post_init__(self):
        if self.vehicle_radius < 0:
            raise ConfigurationError("vehicle_radius must be non-negative", "sim.vehicle_radius")


@dataclass
class MissionLog:
    seed: int
    layout_hash: str
    scene: Scene
    vehicle_radius: float
    nav: list
    pings: list
    decisions: list
    outcome: str
    min_distance: float
    false_alarm_count: int
    first_avoidance_range: float

    def summary(self) -> str:
        return summary_row(self.seed, self.outcome, self.min_distance,
                           self.false_alarm_count, self.first_avoidance_range)

    @property
    def commands(self) -> list[int]:
        return [d.chosen for d in self.decisions]

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        atomic_write(out / "nav.csv", nav_log_text(self.nav))
        atomic_write(out / "pings.csv", ping_log_text(self.pings, self.layout_hash))
        atomic_write(out / "decisions.csv", trace_text(self.decisions))
        atomic_write(out / "summary.csv", ",".join(SUMMARY_COLUMNS) + "\n" + self.summary() + "\n")
        write_truth(out / "truth.json", self.scene, self.vehicle_radius)
        return out


def _nav(state: VehicleState) -> NavRecord:
    return NavRecord(state.time, *state.position, state.yaw, state.pitch, state.speed)


def _path_length(start, waypoints) -> float:
    pts = np.vstack([np.asarray(start, dtype=float)] + [np.asarray(w) for w in waypoints])
    return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))


def _distance(position, scene: Scene) -> float:
    if not scene.obstacles:
        return math.inf
    p = np.asarray(position)
    return min(float(np.linalg.norm(p - np.asarray(o.position))) - o.radius
               for o in scene.obstacles)


def default_start(script: MissionScript, limits: KinematicLimits) -> tuple[VehicleState, int]:
    """Start on the first waypoint facing the second."""
    wps = script.waypoints
    if len(wps) < 2:
        raise ConfigurationError("a start state is needed for a one-waypoint mission",
                                 "mission.start")
    heading, elev = bearing_to(wps[0], wps[1])
    return VehicleState(wps[0], heading, 0.0, limits.cruise_speed), 1


def run_mission(scene: Scene, script: MissionScript, limits: KinematicLimits,
                channel: ChannelModel, loss: LossSpec, seed: int,
                config: SimConfig = SimConfig(), start: VehicleState | None = None,
                first_waypoint: int = 0) -> MissionLog:
    """Fly one mission, one ping every ``settings.period`` seconds.

    Each ping: synthesize, update the map, decide, then step the vehicle.
    Ends on the last waypoint (``reached``), a collision (``collision``) or
    after ``timeout_factor`` times the obstacle-free path time (``timeout``).
    Ping noise for ping ``k`` is drawn from the seed ``(seed, 0, k)``.
    """
    if start is None:
        start, first_waypoint = default_start(script, limits)
    start = replace(start, speed=max(start.speed, limits.min_speed), time=0.0)
    layout = config.layout
    period = config.settings.period
    tracker = WaypointTracker(script.waypoints, script.acceptance_radius, first_waypoint)
    pipe = Pipeline(layout, channel, loss, limits, config.settings) if config.avoidance else None
    free_time = _path_length(start.position, script.waypoints[first_waypoint:]) / start.speed
    max_time = config.max_time or config.timeout_factor * max(free_time, period)
    max_steps = int(math.ceil(max_time / period))

    state = start
    nav_log, pings, decisions = [], [], []
    min_dist = _distance(state.position, scene)
    false_alarms = 0
    first_range = math.nan
    outcome = "timeout"
    for k in range(max_steps + 1):
        state = replace(state, time=k * period)
        nav = _nav(state)
        nav_log.append(nav)
        goal = tracker.update(state.position)
        if goal is None:
            outcome = "reached"
            break
        ping = None
        if config.record_pings or pipe is not None:
            ping = synth_ping(scene, state, channel, (seed, 0, k), layout)
            if config.record_pings:
                pings.append(ping)
        if pipe is None:
            command = Action.STRAIGHT
            decisions.append(DecisionRecord.passive(nav.timestamp))
        else:
            result = pipe.process(nav, ping, goal)
            command = result.chosen
            decisions.append(result.record)
            if command != Action.STRAIGHT:
                if math.isnan(first_range):
                    first_range = _distance(state.position, scene)
                if not obstacle_on_paths(result.trajectories, nav, scene, config.vehicle_radius):
                    false_alarms += 1
        if k == max_steps:
            break
        state = step(state, command, limits, period, goal)
        d = _distance(state.position, scene)
        min_dist = min(min_dist, d)
        if d < config.vehicle_radius:
            nav_log.append(_nav(replace(state, time=(k + 1) * period)))
            outcome = "collision"
            break
    return MissionLog(seed, layout.layout_hash(), scene, config.vehicle_radius, nav_log, pings,
                      decisions, outcome, min_dist, false_alarms, first_range)


@dataclass(frozen=True)
class TargetScenario:
    """Lawnmower around a single point target, started on the middle leg.

    The target sits at the pattern centre, displaced by seeded Gaussian
    drift of ``drift_sd`` meters per horizontal axis (a moored float that
    swings on its line).  The vehicle starts ``approach`` meters before the
    target on the middle leg and the mission ends at the start of the next
    leg.
    """

    legs: int = 3
    leg_length: float = 80.0
    spacing: float = 20.0
    depth: float = 10.0
    target_radius: float = 1.0
    target_strength: float = 35.0
    drift_sd: float = 0.5
    acceptance_radius: float = 3.0
    approach: float = 40.0

    def build(self, seed: int, limits: KinematicLimits = KinematicLimits()):
        full = lawnmower((0.0, 0.0), self.leg_length, self.spacing, self.legs, self.depth)
        mid = self.legs // 2
        leg_start, leg_end = full.waypoints[2 * mid], full.waypoints[2 * mid + 1]
        direction = np.sign(leg_end[0] - leg_start[0])
        rest = full.waypoints[2 * mid + 1:2 * mid + 3]
        script = MissionScript(rest, self.acceptance_radius)
        drift = np.random.default_rng((seed, 1)).normal(0.0, self.drift_sd, size=2)
        target = (float(drift[0]), float(leg_start[1] + drift[1]), self.depth)
        scene = Scene((Obstacle(target, self.target_radius, self.target_strength),))
        pos = (-direction * self.approach, leg_start[1], self.depth)
        heading = 0.0 if direction > 0 else -180.0
        start = VehicleState(pos, heading, 0.0, limits.cruise_speed)
        return scene, script, start
