"""Vehicle pose, obstacle scene and frame transforms.

World coordinates are north/east/down in meters.  Yaw is measured clockwise
from north, pitch is positive nose up, both in degrees.  The sonar frame is
the vehicle body frame (forward, starboard, down).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class VehicleState:
    position: tuple[float, float, float]
    yaw: float
    pitch: float
    speed: float
    time: float = 0.0
    yaw_rate: float = 0.0
    pitch_rate: float = 0.0


@dataclass(frozen=True)
class Obstacle:
    position: tuple[float, float, float]
    radius: float
    target_strength: float = 35.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("obstacle radius must be positive")


@dataclass(frozen=True)
class NoiseBurst:
    """Transient interference (boat noise) in one beam.

    Adds ``level_db`` to every bin of ``beam`` between ``r_lo`` and ``r_hi``
    meters while ``t_start <= t < t_end``.  It is not an obstacle.
    """

    t_start: float
    t_end: float
    beam: int
    r_lo: float
    r_hi: float
    level_db: float


@dataclass(frozen=True)
class Scene:
    obstacles: tuple[Obstacle, ...] = ()
    water_depth: float = 25.0
    bursts: tuple[NoiseBurst, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "bursts", tuple(self.bursts))


def body_rotation(yaw_deg: float, pitch_deg: float) -> np.ndarray:
    """Rotation taking body-frame vectors to north/east/down."""
    y, p = np.radians(yaw_deg), np.radians(pitch_deg)
    cy, sy, cp, sp = np.cos(y), np.sin(y), np.cos(p), np.sin(p)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    return rz @ ry


def world_to_body(points, position, yaw_deg, pitch_deg) -> np.ndarray:
    rel = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(position, dtype=float)
    return rel @ body_rotation(yaw_deg, pitch_deg)


def body_to_world(points, position, yaw_deg, pitch_deg) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return pts @ body_rotation(yaw_deg, pitch_deg).T + np.asarray(position, dtype=float)


def bearing_to(position, target) -> tuple[float, float]:
    """Heading (deg from north) and elevation (deg, up positive) toward ``target``."""
    d = np.asarray(target, dtype=float) - np.asarray(position, dtype=float)
    heading = float(np.degrees(np.arctan2(d[1], d[0])))
    elevation = float(np.degrees(np.arctan2(-d[2], np.hypot(d[0], d[1]))))
    return heading, elevation


def wrap_deg(a):
    """Wrap angles to [-180, 180)."""
    return (np.asarray(a) + 180.0) % 360.0 - 180.0
