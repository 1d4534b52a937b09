"""Per-ping perception and decision loop shared by simulation and replay.

One call to :meth:`Pipeline.process` ingests a navigation record and the
ping taken at the same instant: the map is propagated by the motion since
the previous record, updated with the ping, and an action is selected.
Simulation and replay both go through this class, so a replay of a
simulated log reproduces the live decisions exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelModel, Ping, RunningBackground, bin_likelihoods
from .decision import (Action, ActionSet, LossSpec, TrajectoryDistribution, Waypoint,
                       generate_trajectories, select_action)
from .errors import AlignmentError, ConfigurationError
from .geometry import BeamLayout, PolarMap, bayes_update, build_map
from .logs import DecisionRecord, NavRecord
from .motion import OverlapTable, VelocityDistribution, precompute_overlaps, propagate
from .world import Scene, bearing_to, body_to_world, wrap_deg


@dataclass(frozen=True)
class KinematicLimits:
    """Speed and attitude-rate limits of the vehicle (deg/s, deg, m/s).

    ``steer_gain`` (1/s) is the proportional gain used under a0 to turn
    toward the active waypoint.
    """

    min_speed: float = 0.5
    cruise_speed: float = 1.5
    max_yaw_rate: float = 12.0
    max_pitch_rate: float = 5.0
    max_pitch: float = 30.0
    steer_gain: float = 0.5

    def __post_init__(self):
        for name in ("min_speed", "cruise_speed", "max_yaw_rate", "max_pitch_rate",
                     "max_pitch", "steer_gain"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive", f"limits.{name}")
        if self.min_speed > self.cruise_speed:
            raise ConfigurationError("min_speed exceeds cruise_speed", "limits.min_speed")


@dataclass(frozen=True)
class PipelineSettings:
    """Planner and navigation-uncertainty settings.

    speed_sd_fraction, rate_sd:
        Standard deviation of forward speed (fraction of speed) and of the
        yaw/pitch rates (deg/s) fed to propagation.
    points:
        Quadrature points per velocity axis.
    period:
        Nominal ping period; steps within 1e-6 s of it reuse one overlap
        table.
    """

    actions: tuple = tuple(Action)
    horizon: float = 10.0
    spacing: float = 0.1
    speed_sd_fraction: float = 0.05
    rate_sd: float = 1.0
    points: int = 7
    period: float = 0.1
    prior: float = 0.001
    running_background: bool = False
    background_window: int = 20
    cache_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "actions", ActionSet(tuple(self.actions)).actions)
        if self.horizon <= 0 or self.spacing <= 0 or self.period <= 0:
            raise ConfigurationError("horizon, spacing and period must be positive")
        if self.points < 1:
            raise ConfigurationError("points must be at least 1")


@dataclass
class Step:
    """Everything produced for one ping."""

    record: DecisionRecord
    chosen: Action
    trajectories: TrajectoryDistribution | None
    pmap: PolarMap


_TABLES: dict = {}


def overlap_table(layout: BeamLayout, vel: VelocityDistribution, tau: float,
                  cache_dir=None) -> OverlapTable:
    key = (layout.layout_hash(), vel.translational_key(), float(tau))
    table = _TABLES.get(key)
    if table is None:
        table = precompute_overlaps(layout, vel, tau, cache_dir=cache_dir)
        if len(_TABLES) > 16:
            _TABLES.pop(next(iter(_TABLES)))
        _TABLES[key] = table
    return table


class Pipeline:
    """Stateful propagate, update and decide loop for one sensitivity level.

    ``hold_course`` selects the reference used for the deviation cost when
    no goal is supplied: the current heading held level (True), or no
    deviation term at all (False).
    """

    def __init__(self, layout: BeamLayout, channel: ChannelModel, loss: LossSpec,
                 limits: KinematicLimits = KinematicLimits(),
                 settings: PipelineSettings = PipelineSettings(), hold_course: bool = True):
        self.layout = layout
        self.channel = channel
        self.loss = loss
        self.limits = limits
        self.settings = settings
        self.hold_course = hold_course
        self.pmap = build_map(layout, settings.prior)
        self._prev: NavRecord | None = None
        self._background = (RunningBackground(layout.n_beams, settings.background_window)
                            if settings.running_background else None)

    def velocity(self, prev: NavRecord, cur: NavRecord, dt: float) -> VelocityDistribution:
        s = self.settings
        yaw_rate = float(wrap_deg(cur.yaw - prev.yaw)) / dt
        pitch_rate = (cur.pitch - prev.pitch) / dt
        return VelocityDistribution.gaussian(cur.speed, s.speed_sd_fraction * cur.speed,
                                             -yaw_rate, -pitch_rate, s.rate_sd, s.points)

    def _advance(self, nav: NavRecord) -> None:
        prev = self._prev
        if prev is not None:
            dt = nav.timestamp - prev.timestamp
            if dt < 0:
                raise AlignmentError(f"navigation time goes backwards at t={nav.timestamp}")
            if dt > 0:
                tau = self.settings.period if abs(dt - self.settings.period) <= 1e-6 else dt
                vel = self.velocity(prev, nav, dt)
                table = overlap_table(self.layout, vel, tau, self.settings.cache_dir)
                moved = propagate(self.pmap, vel, tau, table)
                self.pmap = PolarMap(self.layout, moved.probs, nav.timestamp, moved.prior)
        self._prev = nav

    def trajectories(self, nav: NavRecord, goal=None) -> TrajectoryDistribution:
        lim = self.limits
        steer = bearing_to(nav.position, goal) if goal is not None else None
        return generate_trajectories(
            self.settings.actions, speed=max(nav.speed, lim.min_speed),
            yaw_rate=lim.max_yaw_rate, pitch_rate=lim.max_pitch_rate,
            horizon=self.settings.horizon, yaw0=nav.yaw, pitch0=nav.pitch,
            max_pitch=lim.max_pitch, spacing=self.settings.spacing, steer_to=steer,
            steer_gain=lim.steer_gain)

    def reference(self, nav: NavRecord, goal=None) -> Waypoint | None:
        if goal is not None:
            return Waypoint(*bearing_to(nav.position, goal))
        if self.hold_course:
            return Waypoint(nav.yaw, 0.0)
        return None

    def process(self, nav: NavRecord, ping: Ping, goal=None) -> Step:
        """Ingest one (nav, ping) pair taken at the same instant."""
        if ping.timestamp != nav.timestamp:
            raise AlignmentError(f"ping at t={ping.timestamp} paired with nav at "
                                 f"t={nav.timestamp}")
        self._advance(nav)
        model = self.channel
        if self._background is not None:
            model = self._background.model(model, ping)
        l1, l0 = bin_likelihoods(ping, model, self.layout)
        self.pmap = bayes_update(self.pmap, l1, l0)
        trajs = self.trajectories(nav, goal)
        chosen, report = select_action(self.pmap, trajs, self.reference(nav, goal), self.loss)
        record = DecisionRecord.from_terms(nav.timestamp, chosen, report.risk, report.kappa,
                                           report.c0)
        return Step(record, chosen, trajs, self.pmap)


def obstacle_on_paths(trajs: TrajectoryDistribution, nav: NavRecord, scene: Scene,
                      vehicle_radius: float) -> bool:
    """True if any candidate path passes within collision distance of an obstacle."""
    if not scene.obstacles:
        return False
    pts = np.vstack([t.samples for a in trajs.actions for t in trajs[a]])
    world = body_to_world(pts, nav.position, nav.yaw, nav.pitch)
    for obs in scene.obstacles:
        d = np.linalg.norm(world - np.asarray(obs.position), axis=1)
        if np.any(d < obs.radius + vehicle_radius):
            return True
    return False


@dataclass
class WaypointTracker:
    """Active-waypoint bookkeeping; advances inside the acceptance radius."""

    waypoints: tuple
    acceptance_radius: float
    index: int = 0
    visited: list = field(default_factory=list)

    def update(self, position) -> tuple | None:
        p = np.asarray(position, dtype=float)
        while self.index < len(self.waypoints):
            wp = self.waypoints[self.index]
            if np.linalg.norm(p - np.asarray(wp)) <= self.acceptance_radius:
                self.visited.append(self.index)
                self.index += 1
            else:
                return wp
        return None

    @property
    def done(self) -> bool:
        return self.index >= len(self.waypoints)

    @property
    def active(self):
        return None if self.done else self.waypoints[self.index]
