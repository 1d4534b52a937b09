"""Simplified sonar channel: ping synthesis and per-cell likelihoods.

Intensities are in dB.  Background returns follow ``N(H0, sigma)``; a cell
holding an obstacle is expected at ``H1 = H0 + delta``.  The sensitivity
level is ``delta``: smaller values flag weaker echoes.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError
from .geometry import BeamLayout
from .world import Scene, VehicleState, world_to_body

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# keeps both likelihoods representable; the ratio is what the update uses
_MAX_LOG_RATIO = 700.0


@dataclass(frozen=True)
class Ping:
    timestamp: float
    beams: np.ndarray
    beam_ids: tuple[int, ...]

    def __post_init__(self):
        beams = np.atleast_2d(np.asarray(self.beams, dtype=float))
        object.__setattr__(self, "beams", beams)
        object.__setattr__(self, "beam_ids", tuple(int(b) for b in self.beam_ids))
        if beams.shape[0] != len(self.beam_ids):
            raise AlignmentError(f"{beams.shape[0]} beam vectors for {len(self.beam_ids)} beam ids")
        if len(set(self.beam_ids)) != len(self.beam_ids):
            raise AlignmentError("duplicate beam id in ping")

    @property
    def bin_count(self) -> int:
        return self.beams.shape[1]


@dataclass(frozen=True)
class SensitivityLevel:
    delta_db: float

    def __post_init__(self):
        if not self.delta_db > 0:
            raise ValueError("sensitivity delta_db must be positive")


@dataclass(frozen=True)
class ChannelModel:
    """Background level, noise spread and sensitivity of the channel.

    ``background_db`` may be a scalar or one value per beam.
    ``reference_range_m`` anchors the spreading penalty used by
    :func:`synth_ping`.
    """

    background_db: float | tuple = 40.0
    noise_sigma_db: float = 3.0
    sensitivity: SensitivityLevel = field(default_factory=lambda: SensitivityLevel(7.0))
    reference_range_m: float = 1.0

    def __post_init__(self):
        if not self.noise_sigma_db > 0:
            raise ValueError("noise_sigma_db must be positive")
        if not isinstance(self.sensitivity, SensitivityLevel):
            object.__setattr__(self, "sensitivity", SensitivityLevel(float(self.sensitivity)))
        if np.ndim(self.background_db):
            object.__setattr__(self, "background_db",
                               tuple(float(b) for b in self.background_db))

    @property
    def delta_db(self) -> float:
        return self.sensitivity.delta_db

    def with_delta(self, delta_db: float) -> "ChannelModel":
        return ChannelModel(self.background_db, self.noise_sigma_db,
                            SensitivityLevel(delta_db), self.reference_range_m)

    def with_background(self, background_db) -> "ChannelModel":
        return ChannelModel(background_db, self.noise_sigma_db, self.sensitivity,
                            self.reference_range_m)


def _background(model: ChannelModel, beam_ids) -> np.ndarray:
    bg = np.asarray(model.background_db, dtype=float)
    if bg.ndim == 0:
        return np.full((len(beam_ids), 1), float(bg))
    return bg[list(beam_ids)][:, None]


def _cell_intensity(ping: Ping, layout: BeamLayout | None) -> np.ndarray:
    """Per-cell intensity in layout beam order (max over bins inside a cell)."""
    z = ping.beams
    if layout is None:
        return z
    if sorted(ping.beam_ids) != list(range(layout.n_beams)):
        raise AlignmentError("ping beams do not cover the layout beams")
    nb = layout.bin_count
    if z.shape[1] == nb:
        cells = z
    elif z.shape[1] % nb == 0:
        cells = z.reshape(z.shape[0], nb, -1).max(axis=2)
    else:
        raise AlignmentError(f"ping has {z.shape[1]} bins, layout has {nb} cells per beam")
    out = np.empty_like(cells)
    out[list(ping.beam_ids)] = cells
    return out


def bin_log_likelihoods(ping: Ping, model: ChannelModel, layout: BeamLayout | None = None):
    """Gaussian log densities ``(log L1, log L0)`` per cell."""
    z = _cell_intensity(ping, layout)
    ids = range(z.shape[0]) if layout is not None else ping.beam_ids
    h0 = _background(model, list(ids))
    s = model.noise_sigma_db
    norm = math.log(s) + _LOG_SQRT_2PI
    ll1 = -0.5 * ((z - h0 - model.delta_db) / s) ** 2 - norm
    ll0 = -0.5 * ((z - h0) / s) ** 2 - norm
    return ll1, ll0


def bin_likelihoods(ping: Ping, model: ChannelModel, layout: BeamLayout | None = None):
    """Measurement likelihoods ``(L1, L0)`` for every cell of the ping.

    With a ``layout`` the result is reordered into layout beam order and
    bins are pooled into cells when the ping is finer than the map.  Both
    values are Gaussian densities in dB; for intensities so extreme that a
    density would underflow, the pair is rescaled by a common factor so
    that both stay positive and their ratio is kept (capped at ``e^700``).
    """
    ll1, ll0 = bin_log_likelihoods(ping, model, layout)
    diff = np.clip(ll1 - ll0, -_MAX_LOG_RATIO, _MAX_LOG_RATIO)
    top = np.maximum(ll1, ll0)
    # rescale only where the smaller density would underflow
    top = np.where(top - np.abs(diff) < -_MAX_LOG_RATIO, np.abs(diff) - _MAX_LOG_RATIO, top)
    hi1 = diff >= 0
    l1 = np.exp(np.where(hi1, top, top + diff))
    l0 = np.exp(np.where(hi1, top - diff, top))
    return l1, l0


def spreading_penalty(r, reference_range: float = 1.0):
    return 20.0 * np.log10(np.maximum(np.asarray(r, dtype=float), 1e-3) / reference_range)


def obstacle_cells(layout: BeamLayout, rel_position, radius: float) -> np.ndarray:
    """Boolean (n_beams, bin_count) mask of cells touched by a sphere.

    ``rel_position`` is in the sonar frame.  The angular test widens each
    beam by the sphere's angular radius, which is exact for the radial
    extent and conservative at beam corners.
    """
    x, y, z = (float(c) for c in rel_position)
    r = math.sqrt(x * x + y * y + z * z)
    mask = np.zeros((layout.n_beams, layout.bin_count), dtype=bool)
    if r - radius >= layout.max_range:
        return mask
    if r <= radius:
        ang = 180.0
    else:
        ang = math.degrees(math.asin(radius / r))
    az = math.degrees(math.atan2(y, x))
    el = math.degrees(math.atan2(-z, math.hypot(x, y)))
    if x <= 0 and r > radius:
        return mask
    tb, pb = layout.theta_bounds, layout.phi_bounds
    beams = (tb[:, 0] - ang < az) & (az <= tb[:, 1] + ang) & (pb[:, 0] - ang < el) & (el <= pb[:, 1] + ang)
    edges = layout.radial_edges
    radial = (edges[1:] > r - radius) & (edges[:-1] < r + radius)
    mask[np.ix_(beams, radial)] = True
    return mask


def synth_ping(scene: Scene, state: VehicleState, model: ChannelModel, rng_seed,
               layout: BeamLayout) -> Ping:
    """Synthesize one ping of the vehicle's sonar in ``scene``.

    Each bin holds ``H0`` plus, for every obstacle touching the cell,
    ``target_strength - 20 log10(r / r_ref)``, plus any active noise burst
    and Gaussian noise drawn from ``rng_seed``.
    """
    nb = layout.bin_count
    level = np.zeros((layout.n_beams, nb))
    for obs in scene.obstacles:
        rel = world_to_body(obs.position, state.position, state.yaw, state.pitch)[0]
        mask = obstacle_cells(layout, rel, obs.radius)
        if mask.any():
            r = float(np.linalg.norm(rel))
            excess = obs.target_strength - float(spreading_penalty(r, model.reference_range_m))
            level[mask] += excess
    if scene.bursts:
        centers = layout.radial_edges[:-1] + 0.5 * layout.cell_length
        for burst in scene.bursts:
            if burst.t_start <= state.time < burst.t_end:
                span = (centers >= burst.r_lo) & (centers <= burst.r_hi)
                level[burst.beam, span] += burst.level_db
    rng = np.random.default_rng(rng_seed)
    noise = rng.normal(0.0, model.noise_sigma_db, size=level.shape)
    beams = _background(model, range(layout.n_beams)) + level + noise
    return Ping(state.time, beams, tuple(range(layout.n_beams)))


class RunningBackground:
    """Per-beam running median of the returned intensity, used as ``H0``.

    Keeps the last ``window`` pings and takes the median over all of their
    bins, beam by beam.  A compact target touches few bins so it barely
    moves the estimate.
    """

    def __init__(self, n_beams: int, window: int = 20):
        self.window = window
        self._history: deque = deque(maxlen=window)
        self.n_beams = n_beams

    def update(self, ping: Ping) -> np.ndarray:
        z = np.empty_like(ping.beams)
        z[list(ping.beam_ids)] = ping.beams
        self._history.append(z)
        stacked = np.concatenate(list(self._history), axis=1)
        return np.median(stacked, axis=1)

    def model(self, base: ChannelModel, ping: Ping) -> ChannelModel:
        return base.with_background(tuple(self.update(ping)))
