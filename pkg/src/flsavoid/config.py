"""Run configuration: a YAML document validated against a fixed schema.

Unknown keys are rejected and every error names the offending dotted key.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .channel import ChannelModel
from .decision import LossSpec
from .errors import ConfigurationError
from .geometry import BeamLayout, prototype_layout
from .pipeline import KinematicLimits, PipelineSettings
from .replay import ReplayConfig
from .sim import MissionScript, SimConfig, lawnmower
from .world import NoiseBurst, Obstacle, Scene, VehicleState, bearing_to

_PROTO = prototype_layout()

# section -> key -> default (None: optional without default)
SCHEMA = {
    "layout": {"horizontal_edges": list(_PROTO.horizontal_edges),
               "vertical_edges": list(_PROTO.vertical_edges),
               "bin_count": 219, "max_range": 50.0, "topology": "cross"},
    "channel": {"background_db": 40.0, "noise_sigma_db": 3.0, "delta_db": 7.0,
                "reference_range_m": 1.0},
    "limits": {"min_speed": 0.5, "cruise_speed": 1.5, "max_yaw_rate": 12.0,
               "max_pitch_rate": 5.0, "max_pitch": 30.0, "steer_gain": 0.5},
    "loss": {"c1": 1.0, "c_waypoint": 0.1, "c_d": 0.5, "c_maneuver": 0.0,
             "false_alarm_offset": False, "tie_break": [0, 1, 2, 3, 4]},
    "velocity": {"speed_sd_fraction": 0.05, "rate_sd_deg_s": 1.0, "points": 7},
    "planner": {"actions": [0, 1, 2, 3, 4], "horizon_s": 10.0, "spacing_m": 0.1},
    "map": {"prior": 0.001, "running_background": False, "background_window": 20},
    "sim": {"period_s": 0.1, "vehicle_radius_m": 0.5, "timeout_factor": 3.0,
            "avoidance": True, "record_pings": True, "cache_dir": None},
    "scene": {"water_depth": 25.0, "obstacles": [], "bursts": [], "target_drift_sd": 0.0},
    "mission": {"waypoints": None, "acceptance_radius": 3.0, "lawnmower": None,
                "start": None, "first_waypoint": None},
    "replay": {"levels": [4.0, 7.0, 10.0], "include_waypoint_cost": False,
               "snapshot_times": [], "detection_threshold": 0.5, "pings": None,
               "nav": None, "truth": None},
    "seeds": None,
}
SUBSCHEMA = {
    "scene.obstacles": {"position": None, "radius": None, "target_strength": 35.0},
    "scene.bursts": {"t_start": None, "t_end": None, "beam": None, "r_lo": None,
                     "r_hi": None, "level_db": None},
    "mission.lawnmower": {"center": [0.0, 0.0], "leg_length": None, "spacing": None,
                          "legs": None, "depth": None},
    "mission.start": {"position": None, "yaw": None, "pitch": 0.0, "speed": None},
}


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigurationError(f"{where or 'config'} must be a mapping", where or "config")
    for key in d:
        if key not in allowed:
            name = f"{where}.{key}" if where else str(key)
            raise ConfigurationError(f"unknown key {name!r}", name)


def _merge(defaults, given, where):
    _check_keys(given, defaults, where)
    out = dict(defaults)
    out.update(given)
    return out


def normalize(raw: dict) -> dict:
    """Validate keys and fill defaults; returns a fully populated dict."""
    if raw is None:
        raw = {}
    _check_keys(raw, SCHEMA, "")
    cfg = {}
    for section, defaults in SCHEMA.items():
        if defaults is None:
            cfg[section] = raw.get(section)
            continue
        given = raw.get(section, {})
        if given is None:
            given = {}
        cfg[section] = _merge(defaults, given, section)
    for path, defaults in SUBSCHEMA.items():
        section, key = path.split(".")
        val = cfg[section][key]
        if val is None:
            continue
        if isinstance(val, list):
            cfg[section][key] = [_merge(defaults, item, f"{path}[{n}]")
                                 for n, item in enumerate(val)]
        else:
            cfg[section][key] = _merge(defaults, val, path)
    cfg["_present"] = sorted(k for k in raw)
    return cfg


def load(path) -> dict:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}", "config") from None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config {path} is not valid YAML: {exc}", "config") from None
    return normalize(raw)


def _require(d: dict, key: str, where: str):
    if d.get(key) is None:
        raise ConfigurationError(f"missing required key {where}.{key}", f"{where}.{key}")
    return d[key]


def _build(where, fn):
    try:
        return fn()
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid {where}: {exc}", where) from None


# --------------------------------------------------------------------------
# builders


def build_layout(cfg) -> BeamLayout:
    c = cfg["layout"]
    return _build("layout", lambda: BeamLayout(tuple(float(e) for e in c["horizontal_edges"]),
                                               tuple(float(e) for e in c["vertical_edges"]),
                                               int(c["bin_count"]), float(c["max_range"]),
                                               c["topology"]))


def build_channel(cfg) -> ChannelModel:
    c = cfg["channel"]
    return _build("channel", lambda: ChannelModel(c["background_db"], float(c["noise_sigma_db"]),
                                                  float(c["delta_db"]),
                                                  float(c["reference_range_m"])))


def build_limits(cfg) -> KinematicLimits:
    c = cfg["limits"]
    return _build("limits", lambda: KinematicLimits(**{k: float(v) for k, v in c.items()}))


def build_loss(cfg) -> LossSpec:
    c = cfg["loss"]
    return _build("loss", lambda: LossSpec(float(c["c1"]), float(c["c_waypoint"]),
                                           float(c["c_d"]), float(c["c_maneuver"]),
                                           bool(c["false_alarm_offset"]),
                                           tuple(c["tie_break"])))


def build_settings(cfg) -> PipelineSettings:
    v, p, m, s = cfg["velocity"], cfg["planner"], cfg["map"], cfg["sim"]
    return _build("planner", lambda: PipelineSettings(
        tuple(p["actions"]), float(p["horizon_s"]), float(p["spacing_m"]),
        float(v["speed_sd_fraction"]), float(v["rate_sd_deg_s"]), int(v["points"]),
        float(s["period_s"]), float(m["prior"]), bool(m["running_background"]),
        int(m["background_window"]), s["cache_dir"]))


def build_sim(cfg) -> SimConfig:
    s = cfg["sim"]
    return _build("sim", lambda: SimConfig(build_layout(cfg), build_settings(cfg),
                                           float(s["vehicle_radius_m"]),
                                           float(s["timeout_factor"]), bool(s["avoidance"]),
                                           bool(s["record_pings"])))


def build_scene(cfg, seed: int | None = None) -> Scene:
    if "scene" not in cfg["_present"]:
        raise ConfigurationError("missing required section 'scene'", "scene")
    c = cfg["scene"]

    def make():
        obs = []
        for n, o in enumerate(c["obstacles"]):
            pos = np.asarray(_require(o, "position", f"scene.obstacles[{n}]"), dtype=float)
            if pos.shape != (3,):
                raise ConfigurationError("obstacle position is (north, east, depth)",
                                         f"scene.obstacles[{n}].position")
            obs.append(Obstacle(tuple(pos.tolist()),
                                float(_require(o, "radius", f"scene.obstacles[{n}]")),
                                float(o["target_strength"])))
        bursts = []
        for n, b in enumerate(c["bursts"]):
            for key in SUBSCHEMA["scene.bursts"]:
                _require(b, key, f"scene.bursts[{n}]")
            bursts.append(NoiseBurst(float(b["t_start"]), float(b["t_end"]), int(b["beam"]),
                                     float(b["r_lo"]), float(b["r_hi"]), float(b["level_db"])))
        return Scene(tuple(obs), float(c["water_depth"]), tuple(bursts))

    scene = _build("scene", make)
    sd = float(c["target_drift_sd"])
    if seed is not None and sd > 0:
        scene = drift_scene(scene, seed, sd)
    return scene


def drift_scene(scene: Scene, seed: int, sd: float) -> Scene:
    """Displace each obstacle horizontally by seeded Gaussian drift."""
    rng = np.random.default_rng((seed, 1))
    moved = []
    for o in scene.obstacles:
        dn, de = rng.normal(0.0, sd, size=2)
        n, e, z = o.position
        moved.append(Obstacle((float(n + dn), float(e + de), z), o.radius, o.target_strength))
    return Scene(tuple(moved), scene.water_depth, scene.bursts)


def build_mission(cfg, limits: KinematicLimits):
    """Mission script, start state and index of the first active waypoint."""
    if "mission" not in cfg["_present"]:
        raise ConfigurationError("missing required section 'mission'", "mission")
    c = cfg["mission"]

    def make():
        if c["lawnmower"] is not None:
            lm = c["lawnmower"]
            for key in ("leg_length", "spacing", "legs", "depth"):
                _require(lm, key, "mission.lawnmower")
            base = lawnmower(tuple(lm["center"]), float(lm["leg_length"]),
                             float(lm["spacing"]), int(lm["legs"]), float(lm["depth"]))
            script = MissionScript(base.waypoints, float(c["acceptance_radius"]))
        elif c["waypoints"] is not None:
            script = MissionScript(tuple(tuple(w) for w in c["waypoints"]),
                                   float(c["acceptance_radius"]))
        else:
            raise ConfigurationError("mission needs waypoints or lawnmower", "mission.waypoints")
        first = c["first_waypoint"]
        st = c["start"]
        if st is None:
            wps = script.waypoints
            if len(wps) < 2:
                raise ConfigurationError("a one-waypoint mission needs a start",
                                         "mission.start")
            heading, _ = bearing_to(wps[0], wps[1])
            start = VehicleState(wps[0], heading, 0.0, limits.cruise_speed)
            first = 1 if first is None else int(first)
        else:
            pos = tuple(float(v) for v in _require(st, "position", "mission.start"))
            if st["yaw"] is None:
                target = script.waypoints[int(first or 0)]
                yaw, _ = bearing_to(pos, target)
            else:
                yaw = float(st["yaw"])
            speed = limits.cruise_speed if st["speed"] is None else float(st["speed"])
            start = VehicleState(pos, yaw, float(st["pitch"]), speed)
            first = 0 if first is None else int(first)
        if not 0 <= first < len(script.waypoints):
            raise ConfigurationError("first_waypoint out of range", "mission.first_waypoint")
        return script, start, first

    return _build("mission", make)


def seeds(cfg) -> list[int]:
    s = cfg["seeds"]
    if s is None:
        return [0]
    if isinstance(s, int) and not isinstance(s, bool):
        return [s]
    if isinstance(s, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in s):
        return list(s)
    if isinstance(s, dict):
        _check_keys(s, {"start", "count"}, "seeds")
        return list(range(int(s.get("start", 0)), int(s.get("start", 0)) + int(s["count"])))
    raise ConfigurationError("seeds must be an int, a list of ints or {start, count}", "seeds")


def build_replay(cfg, levels=None) -> ReplayConfig:
    r = cfg["replay"]
    waypoints = ()
    if r["include_waypoint_cost"]:
        c = cfg["mission"]
        if c["lawnmower"] is not None or c["waypoints"] is not None:
            script, _, _ = build_mission(cfg, build_limits(cfg))
            waypoints = script.waypoints[int(c["first_waypoint"] or 0):]
    return _build("replay", lambda: ReplayConfig(
        tuple(levels if levels is not None else r["levels"]), build_loss(cfg),
        bool(r["include_waypoint_cost"]), waypoints, float(cfg["mission"]["acceptance_radius"]),
        tuple(r["snapshot_times"]), build_channel(cfg), build_limits(cfg), build_settings(cfg),
        float(r["detection_threshold"])))


# --------------------------------------------------------------------------
# dotted access for sweeps


def set_scalar(raw: dict, key: str, value) -> dict:
    """Copy of ``raw`` with the scalar at dotted ``key`` replaced."""
    parts = key.split(".")
    if len(parts) != 2 or parts[0] not in SCHEMA or not isinstance(SCHEMA[parts[0]], dict):
        raise ConfigurationError(f"{key!r} does not address a config scalar", key)
    section, name = parts
    if name not in SCHEMA[section]:
        raise ConfigurationError(f"unknown key {key!r}", key)
    default = SCHEMA[section][name]
    if isinstance(default, (list, dict)) or section in ("mission",) and name in (
            "waypoints", "lawnmower", "start"):
        raise ConfigurationError(f"{key!r} is not a scalar", key)
    if isinstance(value, (list, dict)):
        raise ConfigurationError(f"sweep value {value!r} for {key!r} is not a scalar", key)
    out = copy.deepcopy(raw) if raw else {}
    out.setdefault(section, {})
    if out[section] is None:
        out[section] = {}
    out[section][name] = value
    return out


def read_raw(path) -> dict:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}", "config") from None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config {path} is not valid YAML: {exc}", "config") from None
    return raw or {}


def resolve(path_like, base: Path | None) -> Path:
    p = Path(path_like)
    if base is not None and not p.is_absolute():
        p = base / p
    return p


@dataclass(frozen=True)
class RunInputs:
    """Everything a simulation batch needs, built from one config."""

    layout: BeamLayout
    channel: ChannelModel
    limits: KinematicLimits
    loss: LossSpec
    sim: SimConfig
    seeds: tuple


def build_run(cfg) -> RunInputs:
    limits = build_limits(cfg)
    build_scene(cfg)
    build_mission(cfg, limits)
    return RunInputs(build_layout(cfg), build_channel(cfg), limits, build_loss(cfg),
                     build_sim(cfg), tuple(seeds(cfg)))
