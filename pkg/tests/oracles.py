"""Independent reference computations used by the tests.

Nothing here calls into the package's numerical code paths: point-in-cell
tests are written out from the cell definition, volumes come from uniform
point sampling, and propagation is evaluated as an explicit double sum over
cell pairs.
"""

from __future__ import annotations

import math

import numpy as np

from flsavoid.geometry import BeamLayout, CellIndex, PolarMap, cell_bounds
from flsavoid.motion import rotational_overlap, translational_overlap


def spherical(points):
    """Range, azimuth (deg) and elevation (deg) of sonar-frame points."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    r = np.sqrt(x * x + y * y + z * z)
    az = np.degrees(np.arctan2(y, x))
    el = np.degrees(np.arctan2(-z, np.hypot(x, y)))
    return r, az, el


def inside_cell(points, layout: BeamLayout, cell: CellIndex) -> np.ndarray:
    """Half-open ``(lo, hi]`` membership test on every coordinate."""
    ext = cell_bounds(layout, cell)
    r, az, el = spherical(points)
    return ((r > ext.r[0]) & (r <= ext.r[1]) & (az > ext.theta[0]) & (az <= ext.theta[1])
            & (el > ext.phi[0]) & (el <= ext.phi[1]))


def sample_cell(layout: BeamLayout, cell: CellIndex, n: int, rng) -> np.ndarray:
    """Points uniform in the volume of ``cell``.

    The volume element is ``r^2 cos(phi) dr dtheta dphi``, so ``r^3`` and
    ``sin(phi)`` are drawn uniformly along with ``theta``.
    """
    ext = cell_bounds(layout, cell)
    r = np.cbrt(rng.uniform(ext.r[0] ** 3, ext.r[1] ** 3, n))
    th = np.radians(rng.uniform(*ext.theta, n))
    ph = np.arcsin(rng.uniform(math.sin(math.radians(ext.phi[0])),
                               math.sin(math.radians(ext.phi[1])), n))
    return np.stack([r * np.cos(ph) * np.cos(th), r * np.cos(ph) * np.sin(th),
                     -r * np.sin(ph)], axis=1)


def mc_translational_fraction(layout: BeamLayout, source: CellIndex, target: CellIndex,
                              delta: float, n: int, rng) -> float:
    """Share of ``target`` covered by ``source`` after the scene moves ``-delta`` along x.

    A target point ``q`` is covered when ``q + delta x`` lies in the source.
    """
    q = sample_cell(layout, target, n, rng)
    q[:, 0] += delta
    return float(inside_cell(q, layout, source).mean())


def direct_propagate(pmap: PolarMap, vel, tau: float) -> np.ndarray:
    """Propagation as an explicit sum over every (source, target) cell pair."""
    layout = pmap.layout
    cells = list(pmap.cells())
    n = len(cells)
    prior = pmap.prior
    p = pmap.probs.ravel()
    trans = np.zeros((n, n))
    for v, w in zip(vel.trans_v, vel.trans_w):
        for t, tc in enumerate(cells):
            for s, sc in enumerate(cells):
                trans[t, s] += w * translational_overlap(sc, tc, v, tau, layout)
    moved = np.clip(trans @ p + (1.0 - trans.sum(axis=1)) * prior, 0.0, 1.0)
    rot = np.zeros((n, n))
    for (vt, vp), w in zip(vel.rot_v, vel.rot_w):
        for t, tc in enumerate(cells):
            for s, sc in enumerate(cells):
                rot[t, s] += w * rotational_overlap(sc, tc, vt, vp, tau, layout)
    out = rot @ moved + (1.0 - rot.sum(axis=1)) * prior
    return np.clip(out, 0.0, 1.0).reshape(pmap.probs.shape)


def enumerate_collision_prob(samples, pmap: PolarMap) -> float:
    """``1 - prod(1 - p)`` over every map cell containing a trajectory sample."""
    prod = 1.0
    for cell in pmap.cells():
        if inside_cell(samples, pmap.layout, cell).any():
            prod *= 1.0 - pmap.prob(cell)
    return 1.0 - prod
