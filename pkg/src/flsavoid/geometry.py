"""Beam-aligned spherical occupancy map.

The map lives in the sonar frame: ``x`` forward along the sonar axis, ``y``
to starboard, ``z`` down.  Azimuth ``theta`` is measured from the axis,
positive to starboard; elevation ``phi`` is measured from the horizontal
plane of the sonar, positive up.  Angles are stored in degrees.

A cell ``(i, j, k)`` covers ``r in ((i-1) l_c, i l_c]``,
``theta in (theta_j, theta_{j+1}]`` and ``phi in (phi_k, phi_{k+1}]`` with
all indices 1-based.  Only cells inside some beam exist: a ``full_grid``
layout has every ``(j, k)`` pair, a ``cross`` layout has one horizontal and
one vertical fan that share the centre beam.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import CellLookupError, DegenerateUpdateError, LayoutError

#: Probability clamp applied to measurement updates of non-saturated cells.
CLAMP_EPS = 1e-6

FULL_GRID = "full_grid"
CROSS = "cross"

SNAPSHOT_COLUMNS = (
    "i", "j", "k", "r_lo", "r_hi", "theta_lo", "theta_hi", "phi_lo", "phi_hi", "prob",
)


class CellIndex(NamedTuple):
    i: int
    j: int
    k: int


class SphericalExtent(NamedTuple):
    r: tuple[float, float]
    theta: tuple[float, float]
    phi: tuple[float, float]


@dataclass(frozen=True)
class BeamLayout:
    """Angular beam edges plus radial binning of a forward-looking sonar.

    Parameters
    ----------
    horizontal_edges, vertical_edges:
        Strictly increasing azimuth / elevation boundaries in degrees.
    bin_count:
        Number of radial cells per beam.
    max_range:
        Outer range of the last cell, meters.
    topology:
        ``"cross"`` (one horizontal and one vertical fan sharing the centre
        beam) or ``"full_grid"`` (every azimuth/elevation pair).
    """

    horizontal_edges: tuple[float, ...]
    vertical_edges: tuple[float, ...]
    bin_count: int
    max_range: float
    topology: str = CROSS

    def __post_init__(self):
        h = tuple(float(e) for e in self.horizontal_edges)
        v = tuple(float(e) for e in self.vertical_edges)
        object.__setattr__(self, "horizontal_edges", h)
        object.__setattr__(self, "vertical_edges", v)
        for name, edges in (("horizontal_edges", h), ("vertical_edges", v)):
            if len(edges) < 2:
                raise LayoutError(f"{name} needs at least two boundaries")
            if np.any(np.diff(edges) <= 0):
                raise LayoutError(f"{name} must be strictly increasing")
            if edges[0] <= -90.0 or edges[-1] >= 90.0:
                raise LayoutError(f"{name} must lie inside (-90, 90) degrees")
        if int(self.bin_count) != self.bin_count or self.bin_count < 1:
            raise LayoutError("bin_count must be a positive integer")
        object.__setattr__(self, "bin_count", int(self.bin_count))
        if not self.max_range > 0:
            raise LayoutError("max_range must be positive")
        if self.topology not in (CROSS, FULL_GRID):
            raise LayoutError(f"unknown topology {self.topology!r}")
        if self.topology == CROSS and (len(h) % 2 != 0 or len(v) % 2 != 0):
            # an odd number of beams per fan is needed for a centre beam
            raise LayoutError("cross topology needs an odd number of beams per fan")

    @property
    def n_theta(self) -> int:
        return len(self.horizontal_edges) - 1

    @property
    def n_phi(self) -> int:
        return len(self.vertical_edges) - 1

    @property
    def cell_length(self) -> float:
        return self.max_range / self.bin_count

    @property
    def center_j(self) -> int:
        return self.n_theta // 2 + 1

    @property
    def center_k(self) -> int:
        return self.n_phi // 2 + 1

    @cached_property
    def beams(self) -> tuple[tuple[int, int], ...]:
        """``(j, k)`` of every beam, in storage order.

        Cross layouts list the horizontal fan first (left to right), then the
        vertical beams other than the centre (bottom to top).
        """
        if self.topology == FULL_GRID:
            return tuple((j, k) for k in range(1, self.n_phi + 1)
                         for j in range(1, self.n_theta + 1))
        horiz = [(j, self.center_k) for j in range(1, self.n_theta + 1)]
        vert = [(self.center_j, k) for k in range(1, self.n_phi + 1) if k != self.center_k]
        return tuple(horiz + vert)

    @property
    def n_beams(self) -> int:
        return len(self.beams)

    @property
    def n_cells(self) -> int:
        return self.n_beams * self.bin_count

    @cached_property
    def beam_lookup(self) -> np.ndarray:
        """Array mapping 1-based ``(j, k)`` to a beam number, -1 when absent.

        Padded by one on each side so out-of-sector indices 0 and n+1 are
        valid lookups.
        """
        table = np.full((self.n_theta + 2, self.n_phi + 2), -1, dtype=np.int64)
        for b, (j, k) in enumerate(self.beams):
            table[j, k] = b
        return table

    def beam_number(self, j: int, k: int) -> int:
        if not (1 <= j <= self.n_theta and 1 <= k <= self.n_phi):
            raise CellLookupError(f"beam ({j}, {k}) outside layout")
        b = int(self.beam_lookup[j, k])
        if b < 0:
            raise CellLookupError(f"beam ({j}, {k}) does not exist in {self.topology} layout")
        return b

    @cached_property
    def theta_bounds(self) -> np.ndarray:
        """(n_beams, 2) azimuth interval of each beam, degrees."""
        e = self.horizontal_edges
        return np.array([(e[j - 1], e[j]) for j, _ in self.beams])

    @cached_property
    def phi_bounds(self) -> np.ndarray:
        e = self.vertical_edges
        return np.array([(e[k - 1], e[k]) for _, k in self.beams])

    @cached_property
    def radial_edges(self) -> np.ndarray:
        """``bin_count + 1`` radial boundaries ``r_i = (i-1) l_c``."""
        return np.arange(self.bin_count + 1) * self.cell_length

    @cached_property
    def horizontal_fan(self) -> np.ndarray:
        """Beam numbers of the horizontal fan (all beams for full grids)."""
        if self.topology == FULL_GRID:
            return np.arange(self.n_beams)
        return np.array([b for b, (_, k) in enumerate(self.beams) if k == self.center_k])

    @cached_property
    def vertical_fan(self) -> np.ndarray:
        if self.topology == FULL_GRID:
            return np.arange(self.n_beams)
        return np.array([b for b, (j, _) in enumerate(self.beams) if j == self.center_j])

    @cached_property
    def _hash(self) -> str:
        text = repr((self.horizontal_edges, self.vertical_edges, self.bin_count,
                     float(self.max_range), self.topology))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def layout_hash(self) -> str:
        return self._hash

    def locate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Beam number and 1-based radial index of sonar-frame points.

        Points outside every cell get beam ``-1`` and index ``0``.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        r = np.sqrt(x * x + y * y + z * z)
        az = np.degrees(np.arctan2(y, x))
        el = np.degrees(np.arctan2(-z, np.hypot(x, y)))
        i = np.ceil(r / self.cell_length).astype(np.int64)
        j = np.searchsorted(self.horizontal_edges, az, side="left")
        k = np.searchsorted(self.vertical_edges, el, side="left")
        j = np.clip(j, 0, self.n_theta + 1)
        k = np.clip(k, 0, self.n_phi + 1)
        beam = self.beam_lookup[j, k]
        ok = (beam >= 0) & (r > 0) & (i >= 1) & (i <= self.bin_count)
        return np.where(ok, beam, -1), np.where(ok, i, 0)


def prototype_layout(bin_count: int = 219, max_range: float = 50.0,
                     topology: str = CROSS) -> BeamLayout:
    """Nine-beam prototype: 10 degree centre beam, 20 degree beams at +-15 and +-35."""
    edges = (-45.0, -25.0, -5.0, 5.0, 25.0, 45.0)
    return BeamLayout(edges, edges, bin_count, max_range, topology)


@dataclass
class PolarMap:
    """Per-cell obstacle probabilities over a :class:`BeamLayout`.

    ``probs`` has shape ``(n_beams, bin_count)``; column ``i - 1`` holds the
    radial cell ``i``.  ``prior`` is the value given to unknown space, both at
    construction and when propagation pulls new volume into view.
    """

    layout: BeamLayout
    probs: np.ndarray
    timestamp: float = 0.0
    prior: float = 0.5

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        shape = (self.layout.n_beams, self.layout.bin_count)
        if self.probs.shape != shape:
            raise LayoutError(f"probs has shape {self.probs.shape}, expected {shape}")
        if not np.all((self.probs >= 0.0) & (self.probs <= 1.0)):
            raise ValueError("cell probabilities must lie in [0, 1]")

    def copy(self) -> "PolarMap":
        return PolarMap(self.layout, self.probs.copy(), self.timestamp, self.prior)

    def flat_index(self, idx: CellIndex) -> tuple[int, int]:
        i, j, k = idx
        if not 1 <= i <= self.layout.bin_count:
            raise CellLookupError(f"radial index {i} outside 1..{self.layout.bin_count}")
        return self.layout.beam_number(j, k), i - 1

    def prob(self, idx: CellIndex) -> float:
        return float(self.probs[self.flat_index(idx)])

    def cells(self):
        """Iterate over every :class:`CellIndex` in storage order."""
        for j, k in self.layout.beams:
            for i in range(1, self.layout.bin_count + 1):
                yield CellIndex(i, j, k)


def build_map(layout: BeamLayout, prior: float = 0.5) -> PolarMap:
    if not 0.0 <= prior <= 1.0:
        raise ValueError(f"prior {prior} outside [0, 1]")
    probs = np.full((layout.n_beams, layout.bin_count), float(prior))
    return PolarMap(layout, probs, 0.0, float(prior))


def cell_bounds(pmap: PolarMap | BeamLayout, idx: CellIndex) -> SphericalExtent:
    layout = pmap.layout if isinstance(pmap, PolarMap) else pmap
    i, j, k = idx
    if not 1 <= i <= layout.bin_count:
        raise CellLookupError(f"radial index {i} outside 1..{layout.bin_count}")
    layout.beam_number(j, k)
    lc = layout.cell_length
    he, ve = layout.horizontal_edges, layout.vertical_edges
    return SphericalExtent(((i - 1) * lc, i * lc), (he[j - 1], he[j]), (ve[k - 1], ve[k]))


def bayes_update(pmap: PolarMap, l1, l0, mask=None, eps: float = CLAMP_EPS) -> PolarMap:
    """Recursive Bayes update of the cells ensonified by one ping.

    Parameters
    ----------
    l1, l0:
        Likelihoods ``p(z | c=1)`` and ``p(z | c=0)``, arrays shaped like
        ``pmap.probs``.  Cells where either is NaN are left untouched.
    mask:
        Optional boolean array restricting the update further.
    eps:
        Posteriors of cells whose prior lies strictly inside (0, 1) are
        clamped to ``[eps, 1 - eps]``.  Priors of exactly 0 or 1 are kept,
        they are fixed points of the update.

    Returns a new map; the input is not modified.
    """
    l1 = np.broadcast_to(np.asarray(l1, dtype=float), pmap.probs.shape)
    l0 = np.broadcast_to(np.asarray(l0, dtype=float), pmap.probs.shape)
    sel = ~(np.isnan(l1) | np.isnan(l0))
    if mask is not None:
        sel &= np.asarray(mask, dtype=bool)
    a, b = l1[sel], l0[sel]
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("likelihoods must be non-negative")
    if np.any((a == 0) & (b == 0)):
        raise DegenerateUpdateError("both likelihoods are zero for an updated cell")
    p = pmap.probs[sel]
    num = a * p
    post = num / (num + b * (1.0 - p))
    interior = (p > 0.0) & (p < 1.0)
    post = np.where(interior, np.clip(post, eps, 1.0 - eps), p)
    out = pmap.copy()
    out.probs[sel] = post
    return out


def snapshot_rows(pmap: PolarMap):
    """Rows of the map export table, one per cell, in storage order."""
    layout = pmap.layout
    lc = layout.cell_length
    he, ve = layout.horizontal_edges, layout.vertical_edges
    for b, (j, k) in enumerate(layout.beams):
        for i in range(1, layout.bin_count + 1):
            yield (i, j, k, (i - 1) * lc, i * lc, he[j - 1], he[j], ve[k - 1], ve[k],
                   float(pmap.probs[b, i - 1]))


def snapshot_text(pmap: PolarMap) -> str:
    buf = io.StringIO()
    buf.write(",".join(SNAPSHOT_COLUMNS) + "\n")
    for row in snapshot_rows(pmap):
        buf.write(",".join(repr(v) for v in row) + "\n")
    return buf.getvalue()


def read_snapshot(path) -> np.ndarray:
    """Load an exported snapshot as a structured array; ``#`` lines are skipped."""
    with open(path, encoding="ascii") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return np.genfromtxt(lines, delimiter=",", names=True, dtype=None, encoding="ascii")
