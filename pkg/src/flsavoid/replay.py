"""Open-loop replay of ping and navigation logs at several sensitivity levels."""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .channel import ChannelModel, Ping, obstacle_cells
from .decision import Action, LossSpec
from .errors import AlignmentError, ConfigurationError
from .geometry import BeamLayout, PolarMap, snapshot_text
from .logs import DecisionRecord, NavRecord, atomic_write, fmt, trace_text
from .pipeline import (KinematicLimits, Pipeline, PipelineSettings, WaypointTracker,
                       obstacle_on_paths)
from .world import Scene, body_rotation, world_to_body


@dataclass(frozen=True)
class ReplayConfig:
    """Replay settings.

    include_waypoint_cost:
        Score waypoint deviation against ``waypoints``.  When off, the
        deviation cost is measured from the current heading held level.
    detection_threshold:
        A target counts as detected once any cell it touches reaches this
        probability (needs ground truth).
    """

    levels: tuple = (7.0,)
    loss: LossSpec = LossSpec()
    include_waypoint_cost: bool = False
    waypoints: tuple = ()
    acceptance_radius: float = 3.0
    snapshot_times: tuple = ()
    channel: ChannelModel = ChannelModel()
    limits: KinematicLimits = KinematicLimits()
    settings: PipelineSettings = PipelineSettings()
    detection_threshold: float = 0.5

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        if not levels:
            raise ConfigurationError("replay needs at least one sensitivity level",
                                     "replay.levels")
        if any(not v > 0 for v in levels):
            raise ConfigurationError("sensitivity levels must be positive", "replay.levels")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))
        if self.include_waypoint_cost and not self.waypoints:
            raise ConfigurationError("include_waypoint_cost needs waypoints", "replay.waypoints")


@dataclass
class LevelResult:
    delta_db: float
    timeline: list
    first_detection_time: float
    first_detection_range: float
    false_alarm_count: int | None
    avoidance_count: int
    snapshots: dict = field(default_factory=dict)

    @property
    def commands(self) -> list[int]:
        return [r.chosen for r in self.timeline]


@dataclass
class ReplayReport:
    levels: list

    def level(self, delta_db: float) -> LevelResult:
        for r in self.levels:
            if r.delta_db == float(delta_db):
                return r
        raise KeyError(delta_db)

    def summary_text(self) -> str:
        lines = ["delta_db,first_detection_s,first_detection_range_m,false_alarm_count,"
                 "avoidance_count"]
        for r in self.levels:
            fa = "unlabeled" if r.false_alarm_count is None else str(r.false_alarm_count)
            lines.append(",".join([fmt(r.delta_db), fmt(r.first_detection_time),
                                   fmt(r.first_detection_range), fa, str(r.avoidance_count)]))
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        written = []
        for r in self.levels:
            tag = level_tag(r.delta_db)
            p = out / f"timeline_delta{tag}.csv"
            atomic_write(p, trace_text(r.timeline))
            written.append(p)
            for t, text in r.snapshots.items():
                p = out / f"snapshot_delta{tag}_t{t!r}.csv"
                atomic_write(p, text)
                written.append(p)
        atomic_write(out / "replay_summary.csv", self.summary_text())
        written.append(out / "replay_summary.csv")
        return written


def level_tag(delta_db: float) -> str:
    return f"{float(delta_db):g}"


def snapshot(pmap: PolarMap, timestamp: float, span: tuple | None = None) -> str:
    """Snapshot table of ``pmap`` labelled with ``timestamp``.

    ``span`` is the (first, last) timestamp of the log; a timestamp outside
    it raises ``ValueError``.
    """
    if span is not None and not span[0] <= timestamp <= span[1]:
        raise ValueError(f"snapshot time {timestamp} outside the log span {span}")
    return f"# timestamp={float(timestamp)!r}\n" + snapshot_text(pmap)


class NavInterpolator:
    """Pose at arbitrary times: linear in position and speed, slerp in attitude."""

    def __init__(self, records):
        self.records = list(records)
        if not self.records:
            raise AlignmentError("navigation log is empty")
        self.times = [r.timestamp for r in self.records]
        for a, b in zip(self.times, self.times[1:]):
            if b < a:
                raise AlignmentError(f"navigation timestamps go backwards at t={b}")

    def __call__(self, t: float) -> NavRecord:
        times = self.times
        if t < times[0] or t > times[-1]:
            raise AlignmentError(f"no navigation covering t={t}")
        n = bisect_left(times, t)
        if times[n] == t:
            return self.records[n]
        a, b = self.records[n - 1], self.records[n]
        w = (t - a.timestamp) / (b.timestamp - a.timestamp)
        rots = Rotation.from_matrix(np.stack([body_rotation(a.yaw, a.pitch),
                                              body_rotation(b.yaw, b.pitch)]))
        m = Slerp([0.0, 1.0], rots)([w]).as_matrix()[0]
        yaw = math.degrees(math.atan2(m[1, 0], m[0, 0]))
        pitch = math.degrees(math.asin(max(-1.0, min(1.0, -m[2, 0]))))
        pos = (1 - w) * np.asarray(a.position) + w * np.asarray(b.position)
        return NavRecord(float(t), *map(float, pos), yaw, pitch,
                         (1 - w) * a.speed + w * b.speed)


def _detected(pmap: PolarMap, nav: NavRecord, scene: Scene, threshold: float):
    """Distance to the first obstacle whose cells reach ``threshold``, else None."""
    for obs in scene.obstacles:
        rel = world_to_body(obs.position, nav.position, nav.yaw, nav.pitch)[0]
        mask = obstacle_cells(pmap.layout, rel, obs.radius)
        if mask.any() and pmap.probs[mask].max() >= threshold:
            return float(np.linalg.norm(rel))
    return None


def replay_level(pings, nav: NavInterpolator, layout: BeamLayout, config: ReplayConfig,
                 delta_db: float, truth: tuple | None = None) -> LevelResult:
    pipe = Pipeline(layout, config.channel.with_delta(delta_db), config.loss, config.limits,
                    config.settings, hold_course=True)
    tracker = (WaypointTracker(tuple(config.waypoints), config.acceptance_radius)
               if config.include_waypoint_cost else None)
    scene, vehicle_radius = truth if truth is not None else (None, 0.0)
    span = (pings[0].timestamp, pings[-1].timestamp) if pings else (0.0, 0.0)
    for t in config.snapshot_times:
        if not span[0] <= t <= span[1]:
            raise ConfigurationError(f"snapshot time {t} outside the log span {span}",
                                     "replay.snapshot_times")
    wanted = sorted(config.snapshot_times)
    timeline: list[DecisionRecord] = []
    snaps = {}
    det_t = det_r = math.nan
    false_alarms = 0
    avoid = 0
    prev_t = -math.inf
    for n, ping in enumerate(pings):
        if ping.timestamp < prev_t:
            raise AlignmentError(f"ping timestamps go backwards at t={ping.timestamp}")
        prev_t = ping.timestamp
        pose = nav(ping.timestamp)
        goal = tracker.update(pose.position) if tracker is not None else None
        result = pipe.process(pose, ping, goal)
        timeline.append(result.record)
        if result.chosen != Action.STRAIGHT:
            avoid += 1
            if scene is not None and not obstacle_on_paths(result.trajectories, pose, scene,
                                                           vehicle_radius):
                false_alarms += 1
        if math.isnan(det_t):
            if scene is not None:
                rng = _detected(result.pmap, pose, scene, config.detection_threshold)
                if rng is not None:
                    det_t, det_r = pose.timestamp, rng
            elif result.chosen != Action.STRAIGHT:
                det_t = pose.timestamp
        nxt = pings[n + 1].timestamp if n + 1 < len(pings) else math.inf
        while wanted and wanted[0] < nxt:
            t = wanted.pop(0)
            snaps[t] = snapshot(result.pmap, t, span)
    return LevelResult(float(delta_db), timeline, det_t, det_r,
                       false_alarms if scene is not None else None, avoid, snaps)


def replay(ping_log, nav_log, layout: BeamLayout, config: ReplayConfig,
           truth: tuple | None = None) -> ReplayReport:
    """Run the full pipeline over a recorded log once per sensitivity level.

    ``ping_log`` is a list of :class:`Ping`, ``nav_log`` a list of
    :class:`NavRecord`; navigation is interpolated to each ping time.
    ``truth`` is ``(scene, vehicle_radius)`` for synthetic logs; without it
    false alarms are reported as unlabeled (``None``) and first detection is
    the first avoidance command.
    """
    pings = list(ping_log)
    nav = NavInterpolator(nav_log)
    return ReplayReport([replay_level(pings, nav, layout, config, lv, truth)
                         for lv in config.levels])
