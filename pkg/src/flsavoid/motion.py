"""Propagation of the polar map between pings.

Translation and rotation are applied one after the other.  For a source
cell ``s`` and target cell ``t`` the overlap fraction is the volume of ``t``
covered by ``s`` once ``s`` has moved, divided by the volume of ``t``.  The
propagated probability of ``t`` is the overlap-weighted sum of source
probabilities; whatever part of ``t`` is not covered by any moved source is
unknown space and receives the map prior.

Sign conventions: ``v_x`` is the vehicle's forward speed, so the scene is
displaced by ``-v_x * tau`` along the sonar axis.  ``v_theta`` and
``v_phi`` are the apparent angular rates of the scene in the sonar frame
(the negated yaw and pitch rates of the vehicle), deg/s.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache
import math
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import sparse

from .errors import ConfigurationError
from .geometry import BeamLayout, CellIndex, PolarMap

#: Gauss-Legendre points per angular axis for the translational overlap.
QUAD_ORDER = 12
TABLE_FORMAT_VERSION = 2


@dataclass(frozen=True, eq=False)
class VelocityDistribution:
    """Weighted velocity samples shared by every cell.

    ``translational`` is a sequence of ``(v_x, weight)``; ``rotational`` a
    sequence of ``((v_theta, v_phi), weight)``.  Each set of weights must sum
    to one.
    """

    translational: tuple
    rotational: tuple

    def __post_init__(self):
        if len(self.translational) == 0 or len(self.rotational) == 0:
            raise ConfigurationError("velocity distribution has an empty sample set")
        tv = np.array([float(v) for v, _ in self.translational])
        tw = np.array([float(w) for _, w in self.translational])
        rv = np.array([(float(a), float(b)) for (a, b), _ in self.rotational]).reshape(-1, 2)
        rw = np.array([float(w) for _, w in self.rotational])
        for name, w in (("translational", tw), ("rotational", rw)):
            if np.any(w < 0):
                raise ConfigurationError(f"{name} weights must be non-negative")
            if abs(w.sum() - 1.0) > 1e-9:
                raise ConfigurationError(f"{name} weights sum to {w.sum()}, expected 1")
        if not (np.all(np.isfinite(tv)) and np.all(np.isfinite(rv))):
            raise ConfigurationError("velocity samples must be finite")
        object.__setattr__(self, "trans_v", tv)
        object.__setattr__(self, "trans_w", tw)
        object.__setattr__(self, "rot_v", rv)
        object.__setattr__(self, "rot_w", rw)

    @classmethod
    def deterministic(cls, v_x=0.0, v_theta=0.0, v_phi=0.0):
        return cls(((v_x, 1.0),), (((v_theta, v_phi), 1.0),))

    @classmethod
    def gaussian(cls, v_x, sd_x, v_theta=0.0, v_phi=0.0, sd_rot=0.0, points=7):
        """Gauss-Hermite discretization of independent normals per axis."""
        xs, xw = _hermite(v_x, sd_x, points)
        ts, tw = _hermite(v_theta, sd_rot, points)
        ps, pw = _hermite(v_phi, sd_rot, points)
        rot = tuple(((a, b), wa * wb) for a, wa in zip(ts, tw) for b, wb in zip(ps, pw))
        return cls(tuple(zip(xs, xw)), _renormalize(rot))

    @classmethod
    def uniform(cls, lo_x, hi_x, lo_rot=0.0, hi_rot=0.0, points=7):
        """Equal-weight midpoint grid over ``[lo, hi]`` on each axis."""
        xs = _midpoints(lo_x, hi_x, points)
        rs = _midpoints(lo_rot, hi_rot, points)
        trans = tuple((v, 1.0 / len(xs)) for v in xs)
        rot = tuple(((a, b), 1.0 / len(rs) ** 2) for a in rs for b in rs)
        return cls(trans, _renormalize(rot))

    def translational_key(self) -> tuple:
        return tuple(self.trans_v.tolist()), tuple(self.trans_w.tolist())

    def rotational_key(self) -> tuple:
        return tuple(map(tuple, self.rot_v.tolist())), tuple(self.rot_w.tolist())


@lru_cache(maxsize=None)
def _hermite_nodes(points):
    x, w = hermegauss(points)
    return x, w / w.sum()


def _hermite(mean, sd, points):
    if sd <= 0 or points == 1:
        return [float(mean)], [1.0]
    x, w = _hermite_nodes(points)
    return [float(mean + sd * xi) for xi in x], [float(wi) for wi in w]


def _midpoints(lo, hi, points):
    if hi == lo:
        return [float(lo)]
    edges = np.linspace(lo, hi, points + 1)
    return [float(v) for v in 0.5 * (edges[:-1] + edges[1:])]


def _renormalize(samples):
    total = math.fsum(w for _, w in samples)
    return tuple((v, w / total) for v, w in samples)


# --------------------------------------------------------------------------
# translational overlap


@lru_cache(maxsize=None)
def _gauss_legendre(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _panel_nodes(lo, hi, order, strips, split=6):
    """Composite Gauss-Legendre nodes on ``[lo, hi]`` (radians).

    The overlap integrand is smooth except within ``strips = (s_lo, s_hi)``
    of either end, where displaced rays cross into the neighbouring beam.
    Each strip is cut into ``split`` low-order panels so the kinks inside
    the narrow transfer band are resolved; when the strips cover the whole
    interval it is cut into ``split + 1`` full-order panels.
    """
    edge = max(4, order // 3)
    s_lo, s_hi = strips
    if s_lo + s_hi >= hi - lo:
        n = split + 1
        step = (hi - lo) / n
        panels = [(lo + m * step, lo + (m + 1) * step, order) for m in range(n)]
    else:
        cuts = np.linspace(0.0, 1.0, split + 1)
        panels = [(lo + s_lo * a, lo + s_lo * b, edge) for a, b in zip(cuts, cuts[1:])]
        panels.append((lo + s_lo, hi - s_hi, order))
        panels += [(hi - s_hi + s_hi * a, hi - s_hi + s_hi * b, edge)
                   for a, b in zip(cuts, cuts[1:])]
    xs, ws = [], []
    for a, b, n in panels:
        if b <= a:
            continue
        x, w = _gauss_legendre(n)
        xs.append(0.5 * (b - a) * x + 0.5 * (b + a))
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(xs), np.concatenate(ws)


def _turn_bound(edge, delta, reach):
    """Widest band next to ``edge`` (radians) whose rays can cross it.

    Moving a point by ``delta`` along x turns it by at most
    ``asin(|delta sin(angle)| / reach)`` about the edge's axis, where
    ``reach`` bounds the moved point's distance from that axis.
    """
    if delta == 0.0 or math.sin(edge) == 0.0:
        return 0.0
    if reach <= 0.0:
        return math.inf
    s = 0.0
    for _ in range(3):
        arg = abs(delta) * (abs(math.sin(edge)) + s) / reach
        if arg >= 1.0:
            return math.inf
        s = math.asin(arg)
    return 1.1 * s


#: strip sub-panels per quadrature block; six keep the worst fraction
#: error near 1e-4, the blocks nearest the apex have the most curved bands
STRIP_SPLIT = (8, 8, 8, 8)


def _strip_split(i):
    b = _strip_block(i)
    return STRIP_SPLIT[b] if b < len(STRIP_SPLIT) else 6


def _strip_block(i):
    return 0 if i <= 1 else 1 + math.floor(math.log2(i - 1))


def _edge_strips(layout, beam, i, delta):
    """Edge bands ``((theta_lo, theta_hi), (phi_lo, phi_hi))`` for target cell ``i``.

    The bound uses ``r = l_c 2^floor(log2(i - 1))``, which is constant over
    blocks of cells, so one node set serves a whole block.
    """
    t0, t1 = np.radians(layout.theta_bounds[beam])
    p0, p1 = np.radians(layout.phi_bounds[beam])
    if delta == 0.0:
        return (0.0, 0.0), (0.0, 0.0)
    r_ref = 0.0 if i <= 1 else layout.cell_length * 2.0 ** math.floor(math.log2(i - 1))
    cos_min = math.cos(max(abs(p0), abs(p1)))
    horiz = r_ref * cos_min - abs(delta)
    vert = r_ref - abs(delta)
    return ((_turn_bound(t0, delta, horiz), _turn_bound(t1, delta, horiz)),
            (_turn_bound(p0, delta, vert), _turn_bound(p1, delta, vert)))


def _direction_nodes(theta, phi, order, strips=((0.0, 0.0), (0.0, 0.0)), split=6):
    """Unit vectors and solid-angle weights over an angular box (degrees)."""
    t0, t1 = np.radians(theta)
    p0, p1 = np.radians(phi)
    th, wt = _panel_nodes(t0, t1, order, strips[0], split)
    ph, wp = _panel_nodes(p0, p1, order, strips[1], split)
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    W = np.outer(wt, wp) * np.cos(PH)
    cp = np.cos(PH)
    u = np.stack([cp * np.cos(TH), cp * np.sin(TH), -np.sin(PH)], axis=-1)
    return u.reshape(-1, 3), W.ravel()


def _quadratic_roots(a, b, c):
    """Real roots of ``a r^2 + b r + c``; NaN where absent."""
    disc = b * b - 4.0 * a * c
    sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
    lin = np.abs(a) < 1e-14
    with np.errstate(divide="ignore", invalid="ignore"):
        # numerically stable form
        q = -0.5 * (b + np.copysign(sq, b))
        r1 = np.where(lin, np.where(b != 0, -c / b, np.nan), q / a)
        r2 = np.where(lin, np.nan, c / q)
    return r1, r2


def _ray_breakpoints(layout, u, ra, rb, delta):
    """Ranges along each ray where the displaced point crosses a cell boundary.

    ``u`` is (Q, 3) and ``ra``, ``rb`` are (T, 1).  Returns (T, Q, B) sorted
    breakpoints clipped to ``[ra, rb]``; between two consecutive ones the
    displaced point stays inside a single cell (or outside the map).
    """
    lc = layout.cell_length
    ux, uy, uz = u[:, 0], u[:, 1], u[:, 2]
    k = math.ceil(abs(delta) / lc) + 1
    inner = np.rint(ra / lc)
    radii = np.maximum((inner + np.arange(-k, k + 2)[None, :]) * lc, 0.0)[:, None, :]
    h = np.radians(layout.horizontal_edges)
    v = np.radians(layout.vertical_edges)
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = (delta * delta * (ux * ux - 1.0))[None, :, None] + radii * radii
        sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
        base = (-delta * ux)[None, :, None]
        az = delta * np.sin(h) / (uy[:, None] * np.cos(h) - ux[:, None] * np.sin(h))
        t2 = np.tan(v) ** 2
        e1, e2 = _quadratic_roots(uz[:, None] ** 2 - t2 * (ux * ux + uy * uy)[:, None],
                                  -2.0 * t2 * delta * ux[:, None], -t2 * delta * delta)
    shape = (ra.shape[0], u.shape[0])
    angular = np.concatenate([az, e1, e2], axis=1)
    pts = np.concatenate([np.broadcast_to(ra[:, :, None], shape + (1,)),
                          np.broadcast_to(rb[:, :, None], shape + (1,)),
                          base - sq, base + sq,
                          np.broadcast_to(angular[None], shape + angular.shape[1:])], axis=2)
    lo, hi = ra[:, :, None], rb[:, :, None]
    pts = np.where(np.isfinite(pts), np.clip(pts, lo, hi), lo)
    pts.sort(axis=-1)
    return pts


def _translational_rows(layout, t_beam, t_idx, delta, order):
    """Overlap fractions of every source cell into targets ``t_idx`` of one beam.

    Returns ``(row, source_flat, fraction)`` with ``row`` indexing ``t_idx``.
    All targets must share a quadrature block (see :func:`_edge_strips`).
    """
    lc = layout.cell_length
    t_idx = np.asarray(t_idx)
    if len({_strip_block(int(i)) for i in t_idx}) != 1:
        raise ValueError("targets of one block must share a quadrature strip")
    strips = _edge_strips(layout, t_beam, int(t_idx[0]), delta)
    u, w = _direction_nodes(layout.theta_bounds[t_beam], layout.phi_bounds[t_beam], order,
                            strips, _strip_split(int(t_idx[0])))
    ra = ((t_idx - 1) * lc)[:, None].astype(float)
    rb = (t_idx * lc)[:, None].astype(float)
    bp = _ray_breakpoints(layout, u, ra, rb, delta)
    s0, s1 = bp[..., :-1], bp[..., 1:]
    seg = np.nonzero(s1 > s0)
    a, b = s0[seg], s1[seg]
    moved = (0.5 * (a + b))[:, None] * u[seg[1]]
    moved[:, 0] += delta
    beam, idx = layout.locate(moved)
    vol = (b ** 3 - a ** 3) / 3.0 * w[seg[1]]
    ok = beam >= 0
    key = seg[0][ok] * layout.n_cells + beam[ok] * layout.bin_count + idx[ok] - 1
    vol = vol[ok]
    perm = np.argsort(key, kind="stable")
    key, vol = key[perm], vol[perm]
    if len(key) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    starts = np.concatenate([[0], np.nonzero(np.diff(key))[0] + 1])
    sums = np.add.reduceat(vol, starts)
    rows, src = np.divmod(key[starts], layout.n_cells)
    full = (rb[:, 0] ** 3 - ra[:, 0] ** 3) / 3.0 * w.sum()
    return rows, src, sums / full[rows]


def translational_overlap(source: CellIndex, target: CellIndex, v_x: float, tau: float,
                          layout: BeamLayout, order: int = QUAD_ORDER) -> float:
    """Fraction of ``target`` covered by ``source`` after translating by ``-v_x tau``."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    sb = layout.beam_number(source.j, source.k)
    tb = layout.beam_number(target.j, target.k)
    for c in (source, target):
        if not 1 <= c.i <= layout.bin_count:
            raise IndexError(f"radial index {c.i} outside layout")
    delta = float(v_x) * float(tau)
    if delta == 0.0:
        return 1.0 if (sb, source.i) == (tb, target.i) else 0.0
    _, src, frac = _translational_rows(layout, tb, [target.i], delta, order)
    hit = np.nonzero(src == sb * layout.bin_count + source.i - 1)[0]
    return float(frac[hit[0]]) if len(hit) else 0.0


def translation_matrix(layout: BeamLayout, v_x: float, tau: float,
                       order: int = QUAD_ORDER) -> sparse.csr_matrix:
    """Sparse (target, source) overlap fractions for one translational sample.

    Cells are numbered ``beam * bin_count + (i - 1)``.
    """
    n = layout.n_cells
    delta = float(v_x) * float(tau)
    if delta == 0.0:
        return sparse.identity(n, format="csr")
    nb = layout.bin_count
    rows, cols, vals = [], [], []
    # one chunk per quadrature block, at most 32 cells each
    blocks = np.array([_strip_block(i) for i in range(1, nb + 1)])
    chunks = []
    for b in np.unique(blocks):
        idx = np.nonzero(blocks == b)[0] + 1
        chunks.extend(idx[start:start + 32] for start in range(0, len(idx), 32))
    for tb in range(layout.n_beams):
        for idx in chunks:
            r, src, frac = _translational_rows(layout, tb, idx, delta, order)
            rows.append(tb * nb + idx[r] - 1)
            cols.append(src)
            vals.append(frac)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


# --------------------------------------------------------------------------
# rotational overlap


def _interval_fraction(src_lo, src_hi, tgt_lo, tgt_hi, shift):
    """Share of the target interval covered by the shifted source interval."""
    lo = np.maximum(src_lo + shift, tgt_lo)
    hi = np.minimum(src_hi + shift, tgt_hi)
    return np.maximum(hi - lo, 0.0) / (tgt_hi - tgt_lo)


def rotational_overlap(source: CellIndex, target: CellIndex, v_theta: float, v_phi: float,
                       tau: float, layout: BeamLayout) -> float:
    """Overlap fraction after rotating ``source`` by ``(v_theta tau, v_phi tau)`` degrees."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    sb = layout.beam_number(source.j, source.k)
    tb = layout.beam_number(target.j, target.k)
    if source.i != target.i:
        return 0.0
    st, sp = layout.theta_bounds[sb], layout.phi_bounds[sb]
    tt, tp = layout.theta_bounds[tb], layout.phi_bounds[tb]
    ft = _interval_fraction(st[0], st[1], tt[0], tt[1], v_theta * tau)
    fp = _interval_fraction(sp[0], sp[1], tp[0], tp[1], v_phi * tau)
    return float(ft * fp)


def _beam_fractions(layout, shifts_theta, shifts_phi, weights, beams):
    """Weighted (target, source) beam fractions restricted to ``beams``."""
    tb = layout.theta_bounds[beams]
    pb = layout.phi_bounds[beams]
    ft = _interval_fraction(tb[None, :, 0], tb[None, :, 1], tb[:, None, 0], tb[:, None, 1],
                            shifts_theta[:, None, None])
    fp = _interval_fraction(pb[None, :, 0], pb[None, :, 1], pb[:, None, 0], pb[:, None, 1],
                            shifts_phi[:, None, None])
    return np.einsum("s,stu->tu", weights, ft * fp)


def rotation_matrix(layout: BeamLayout, rot_v, rot_w, tau: float) -> np.ndarray:
    """(n_beams, n_beams) rotational mixing; fractions do not depend on range.

    Entry ``[t, s]`` is the expected :func:`rotational_overlap` of source beam
    ``s`` into target beam ``t``.  Volume rotating in from directions that
    hold no beam (outside the cross, or outside the sector) has no source and
    is filled with the prior by :func:`propagate`.
    """
    rot_v = np.asarray(rot_v, dtype=float).reshape(-1, 2)
    rot_w = np.asarray(rot_w, dtype=float)
    beams = np.arange(layout.n_beams)
    return _beam_fractions(layout, rot_v[:, 0] * tau, rot_v[:, 1] * tau, rot_w, beams)


# --------------------------------------------------------------------------
# overlap tables and propagation


@dataclass(frozen=True, eq=False)
class OverlapTable:
    """Pre-computed overlap fractions for one layout, velocity set and period.

    ``per_sample`` holds one sparse (target, source) matrix per translational
    sample; ``translation`` is their weighted sum and ``rotation`` the
    (n_beams, n_beams) rotational mixing for the rotational samples.
    """

    layout_hash: str
    tau: float
    trans_v: np.ndarray
    trans_w: np.ndarray
    per_sample: tuple
    translation: sparse.csr_matrix
    rot_v: np.ndarray
    rot_w: np.ndarray
    rotation: np.ndarray
    order: int = QUAD_ORDER

    def __post_init__(self):
        object.__setattr__(self, "trans_fill",
                           1.0 - np.asarray(self.translation.sum(axis=1)).ravel())
        object.__setattr__(self, "rot_fill", 1.0 - self.rotation.sum(axis=1))

    def fraction(self, sample: int, source_flat: int, target_flat: int) -> float:
        return float(self.per_sample[sample][target_flat, source_flat])

    def key(self) -> str:
        return table_key(self.layout_hash, self.trans_v, self.trans_w, self.tau, self.order)

    def matches(self, layout: BeamLayout, vel: VelocityDistribution, tau: float) -> bool:
        return (self.layout_hash == layout.layout_hash() and self.tau == float(tau)
                and np.array_equal(self.trans_v, vel.trans_v)
                and np.array_equal(self.trans_w, vel.trans_w))

    def save(self, path) -> None:
        arrays = {
            "version": np.array(TABLE_FORMAT_VERSION),
            "key": np.array(self.key()),
            "layout_hash": np.array(self.layout_hash),
            "tau": np.array(self.tau),
            "order": np.array(self.order),
            "trans_v": self.trans_v, "trans_w": self.trans_w,
            "rot_v": self.rot_v, "rot_w": self.rot_w, "rotation": self.rotation,
        }
        for s, m in enumerate(self.per_sample):
            m = m.tocsr()
            arrays[f"s{s}_data"] = m.data
            arrays[f"s{s}_indices"] = m.indices
            arrays[f"s{s}_indptr"] = m.indptr
            arrays[f"s{s}_shape"] = np.array(m.shape)
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path, expected_key: str | None = None) -> "OverlapTable":
        with np.load(path, allow_pickle=False) as z:
            if int(z["version"]) != TABLE_FORMAT_VERSION:
                raise ValueError(f"overlap cache {path} has version {int(z['version'])}")
            if expected_key is not None and str(z["key"]) != expected_key:
                raise ValueError(f"overlap cache {path} does not match the requested key")
            trans_w = z["trans_w"]
            per = tuple(
                sparse.csr_matrix((z[f"s{s}_data"], z[f"s{s}_indices"], z[f"s{s}_indptr"]),
                                  shape=tuple(z[f"s{s}_shape"]))
                for s in range(len(trans_w)))
            return cls(str(z["layout_hash"]), float(z["tau"]), z["trans_v"], trans_w, per,
                       _weighted_sum(per, trans_w), z["rot_v"], z["rot_w"], z["rotation"],
                       int(z["order"]))


def table_key(layout_hash, trans_v, trans_w, tau, order) -> str:
    text = repr((layout_hash, [float(v) for v in trans_v], [float(w) for w in trans_w],
                 float(tau), int(order), TABLE_FORMAT_VERSION))
    return hashlib.sha256(text.encode()).hexdigest()[:24]


def _weighted_sum(mats, weights):
    total = mats[0] * float(weights[0])
    for m, w in zip(mats[1:], weights[1:]):
        total = total + m * float(w)
    return total.tocsr()


_MEMO: OrderedDict = OrderedDict()
_MEMO_SIZE = 32


def _translation_for(layout, v_x, tau, order):
    key = (layout.layout_hash(), float(v_x), float(tau), order)
    m = _MEMO.get(key)
    if m is None:
        m = translation_matrix(layout, v_x, tau, order)
        _MEMO[key] = m
        if len(_MEMO) > _MEMO_SIZE:
            _MEMO.popitem(last=False)
    else:
        _MEMO.move_to_end(key)
    return m


def precompute_overlaps(layout: BeamLayout, vel: VelocityDistribution, tau: float,
                        order: int = QUAD_ORDER, cache_dir=None) -> OverlapTable:
    """Build (or load from ``cache_dir``) the overlap table for a fixed period."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    tau = float(tau)
    path = None
    if cache_dir is not None:
        key = table_key(layout.layout_hash(), vel.trans_v, vel.trans_w, tau, order)
        path = Path(cache_dir) / f"overlap-{key}.npz"
        if path.exists():
            cached = OverlapTable.load(path, key)
            rotation = rotation_matrix(layout, vel.rot_v, vel.rot_w, tau)
            return OverlapTable(cached.layout_hash, tau, cached.trans_v, cached.trans_w,
                                cached.per_sample, cached.translation, vel.rot_v, vel.rot_w,
                                rotation, order)
    per = tuple(_translation_for(layout, v, tau, order) for v in vel.trans_v)
    table = OverlapTable(layout.layout_hash(), tau, vel.trans_v.copy(), vel.trans_w.copy(), per,
                         _weighted_sum(per, vel.trans_w), vel.rot_v.copy(), vel.rot_w.copy(),
                         rotation_matrix(layout, vel.rot_v, vel.rot_w, tau), order)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        table.save(tmp)
        tmp.replace(path)
    return table


def propagate(pmap: PolarMap, vel: VelocityDistribution, tau: float,
              table: OverlapTable | None = None) -> PolarMap:
    """Move the map forward by ``tau`` seconds: translation, then rotation.

    ``table`` must have been built for the same layout, translational
    samples and period; its rotation part is reused only when the rotational
    samples also match.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if len(vel.trans_w) == 0 or len(vel.rot_w) == 0:
        raise ConfigurationError("velocity distribution has an empty sample set")
    layout = pmap.layout
    if table is None:
        table = precompute_overlaps(layout, vel, tau)
    elif not table.matches(layout, vel, tau):
        raise ConfigurationError("overlap table was built for a different layout, velocity or tau")
    if (np.array_equal(table.rot_v, vel.rot_v) and np.array_equal(table.rot_w, vel.rot_w)):
        rot, rot_fill = table.rotation, table.rot_fill
    else:
        rot = rotation_matrix(layout, vel.rot_v, vel.rot_w, tau)
        rot_fill = 1.0 - rot.sum(axis=1)
    prior = pmap.prior
    flat = table.translation @ pmap.probs.ravel() + table.trans_fill * prior
    moved = np.clip(flat, 0.0, 1.0).reshape(pmap.probs.shape)
    moved = rot @ moved + rot_fill[:, None] * prior
    return PolarMap(layout, np.clip(moved, 0.0, 1.0), pmap.timestamp + tau, prior)
