"""Text log formats: pings, navigation, decision trace, summary, ground truth.

Every float is written with ``repr`` so a log read back reproduces the
exact values that were written.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .channel import Ping
from .errors import LogFormatError
from .world import NoiseBurst, Obstacle, Scene

PING_HEADER_PREFIX = "# layout_hash="
NAV_COLUMNS = ("timestamp_s", "x_m", "y_m", "z_m", "yaw_deg", "pitch_deg", "speed_mps")
SUMMARY_COLUMNS = ("seed", "outcome", "min_distance_m", "false_alarm_count",
                   "first_avoidance_range_m")
N_ACTIONS = 5
TRACE_COLUMNS = (("timestamp_s", "chosen_action")
                 + tuple(f"R_a{k}" for k in range(N_ACTIONS))
                 + tuple(f"kappa_a{k}" for k in range(N_ACTIONS))
                 + tuple(f"C0_a{k}" for k in range(N_ACTIONS)))


class NavRecord(NamedTuple):
    """Vehicle pose at one instant; x north, y east, z depth (m)."""

    timestamp: float
    x: float
    y: float
    z: float
    yaw: float
    pitch: float
    speed: float

    @property
    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class DecisionRecord:
    """One row of the decision trace; actions outside the set hold NaN."""

    timestamp: float
    chosen: int
    risk: tuple
    kappa: tuple
    c0: tuple

    @classmethod
    def from_terms(cls, timestamp, chosen, risk: dict, kappa: dict, c0: dict):
        def row(d):
            return tuple(float(d[k]) if k in d else math.nan for k in range(N_ACTIONS))
        return cls(float(timestamp), int(chosen), row(risk), row(kappa), row(c0))

    @classmethod
    def passive(cls, timestamp):
        nan = (math.nan,) * N_ACTIONS
        return cls(float(timestamp), 0, nan, nan, nan)


def fmt(v) -> str:
    return repr(float(v))


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _float(tok: str, lineno: int, path) -> float:
    try:
        return float(tok)
    except ValueError:
        raise LogFormatError(f"not a number: {tok.strip()!r}", lineno, path) from None


# --------------------------------------------------------------------------
# ping log


def ping_log_text(pings, layout_hash: str) -> str:
    lines = [PING_HEADER_PREFIX + layout_hash]
    for ping in pings:
        ts = fmt(ping.timestamp)
        for bid, vec in zip(ping.beam_ids, ping.beams):
            lines.append(",".join([ts, str(bid)] + [repr(v) for v in vec.tolist()]))
    return "\n".join(lines) + "\n"


def write_ping_log(path, pings, layout_hash: str) -> None:
    atomic_write(path, ping_log_text(pings, layout_hash))


def read_ping_log(path, bin_count: int | None = None) -> tuple[str | None, list[Ping]]:
    """Parse a ping log into pings grouped by timestamp.

    Raises :class:`LogFormatError` naming the line for malformed records,
    inconsistent bin counts or decreasing timestamps.
    """
    layout_hash = None
    pings: list[Ping] = []
    cur_t, ids, rows = None, [], []

    def flush():
        if cur_t is not None:
            pings.append(Ping(cur_t, np.array(rows), tuple(ids)))

    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith(PING_HEADER_PREFIX):
                    layout_hash = line[len(PING_HEADER_PREFIX):].strip()
                continue
            parts = line.split(",")
            if len(parts) < 3:
                raise LogFormatError("ping record needs timestamp, beam id and values",
                                     lineno, path)
            t = _float(parts[0], lineno, path)
            try:
                bid = int(parts[1])
            except ValueError:
                raise LogFormatError(f"bad beam id {parts[1]!r}", lineno, path) from None
            vals = [_float(p, lineno, path) for p in parts[2:]]
            if bin_count is None:
                bin_count = len(vals)
            if len(vals) != bin_count:
                raise LogFormatError(f"expected {bin_count} bins, found {len(vals)}", lineno, path)
            if cur_t is not None and t < cur_t:
                raise LogFormatError(f"timestamp {t} goes backwards from {cur_t}", lineno, path)
            if t != cur_t:
                flush()
                cur_t, ids, rows = t, [], []
            if bid in ids:
                raise LogFormatError(f"beam {bid} repeated at t={t}", lineno, path)
            ids.append(bid)
            rows.append(vals)
    flush()
    return layout_hash, pings


# --------------------------------------------------------------------------
# nav log


def nav_log_text(records) -> str:
    lines = [",".join(NAV_COLUMNS)]
    lines += [",".join(fmt(v) for v in r) for r in records]
    return "\n".join(lines) + "\n"


def write_nav_log(path, records) -> None:
    atomic_write(path, nav_log_text(records))


def read_nav_log(path) -> list[NavRecord]:
    out: list[NavRecord] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("timestamp"):
                continue
            parts = line.split(",")
            if len(parts) != len(NAV_COLUMNS):
                raise LogFormatError(f"nav record needs {len(NAV_COLUMNS)} fields, "
                                     f"found {len(parts)}", lineno, path)
            rec = NavRecord(*(_float(p, lineno, path) for p in parts))
            if out and rec.timestamp < out[-1].timestamp:
                raise LogFormatError(f"timestamp {rec.timestamp} goes backwards", lineno, path)
            out.append(rec)
    return out


# --------------------------------------------------------------------------
# decision trace and summary


def trace_text(records) -> str:
    lines = [",".join(TRACE_COLUMNS)]
    for r in records:
        lines.append(",".join([fmt(r.timestamp), str(r.chosen)]
                              + [fmt(v) for v in r.risk + r.kappa + r.c0]))
    return "\n".join(lines) + "\n"


def read_trace(path) -> list[DecisionRecord]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("timestamp"):
                continue
            parts = line.split(",")
            if len(parts) != len(TRACE_COLUMNS):
                raise LogFormatError(f"trace record needs {len(TRACE_COLUMNS)} fields",
                                     lineno, path)
            vals = [_float(p, lineno, path) for p in parts]
            n = N_ACTIONS
            out.append(DecisionRecord(vals[0], int(vals[1]), tuple(vals[2:2 + n]),
                                      tuple(vals[2 + n:2 + 2 * n]), tuple(vals[2 + 2 * n:])))
    return out


def summary_row(seed, outcome, min_distance, false_alarms, first_range) -> str:
    return ",".join([str(seed), outcome, fmt(min_distance), str(int(false_alarms)),
                     fmt(first_range)])


# --------------------------------------------------------------------------
# ground truth sidecar


def scene_to_dict(scene: Scene, vehicle_radius: float) -> dict:
    return {
        "water_depth": scene.water_depth,
        "vehicle_radius": vehicle_radius,
        "obstacles": [{"position": list(o.position), "radius": o.radius,
                       "target_strength": o.target_strength} for o in scene.obstacles],
        "bursts": [{"t_start": b.t_start, "t_end": b.t_end, "beam": b.beam, "r_lo": b.r_lo,
                    "r_hi": b.r_hi, "level_db": b.level_db} for b in scene.bursts],
    }


def scene_from_dict(d: dict) -> tuple[Scene, float]:
    obstacles = tuple(Obstacle(tuple(o["position"]), o["radius"],
                               o.get("target_strength", 35.0)) for o in d.get("obstacles", ()))
    bursts = tuple(NoiseBurst(**b) for b in d.get("bursts", ()))
    return (Scene(obstacles, d.get("water_depth", 25.0), bursts),
            float(d.get("vehicle_radius", 0.5)))


def write_truth(path, scene: Scene, vehicle_radius: float) -> None:
    atomic_write(path, json.dumps(scene_to_dict(scene, vehicle_radius), indent=2,
                                  sort_keys=True) + "\n")


def read_truth(path) -> tuple[Scene, float]:
    with open(path) as fh:
        return scene_from_dict(json.load(fh))
