"""Attention envelopes around storm tracks and their GeoJSON export.

At each best-track fix the envelope extends ``k * smoothed_rate`` degrees
either side of the storm along the left-hand normal of its velocity, in the
track's equirectangular plane.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .hurdat2 import StormTrack, TrackProjection

HALF_DAY = dt.timedelta(hours=12)
DEFAULT_MAX_HALF_WIDTH_DEG = 8.0


@dataclass(frozen=True)
class SmoothedSeries:
    timestamps: tuple[dt.datetime, ...]
    rates: np.ndarray


def _daily_lookup(series):
    """(start_date, rates) for a UsageRateSeries or a ``(start_date, rates)`` pair."""
    if hasattr(series, "start_date"):
        return series.start_date, np.nan_to_num(np.asarray(series.rates, float), nan=0.0)
    start, rates = series
    return start, np.nan_to_num(np.asarray(rates, float), nan=0.0)


def smooth_rates(series, timestamps: Sequence[dt.datetime]) -> SmoothedSeries:
    """Daily rates stepped onto the track fixes, then a centred 24 h moving average.

    Each fix averages the stepped values of every fix within 12 h of it;
    near the ends of the track the window simply holds fewer fixes.  Days
    outside the series count as zero.
    """
    start, daily = _daily_lookup(series)
    ts = tuple(timestamps)
    stepped = np.zeros(len(ts))
    for i, t in enumerate(ts):
        k = (t.date() - start).days
        if 0 <= k < len(daily):
            stepped[i] = daily[k]
    hours = np.array([(t - ts[0]).total_seconds() / 3600.0 for t in ts]) if ts else np.zeros(0)
    smoothed = np.empty(len(ts))
    lo = hi = 0
    for i, h in enumerate(hours):
        while hours[lo] < h - 12.0:
            lo += 1
        while hi < len(ts) and hours[hi] <= h + 12.0:
            hi += 1
        smoothed[i] = stepped[lo:hi].mean()
    return SmoothedSeries(ts, smoothed)


@dataclass(frozen=True)
class EnvelopePolygon:
    name: str
    season: int
    left: np.ndarray  # (n, 2) lon, lat
    right: np.ndarray  # (n, 2) lon, lat
    left_xy: np.ndarray  # projected
    right_xy: np.ndarray
    centre_xy: np.ndarray
    k: float
    max_rate: float

    @property
    def degenerate(self) -> bool:
        return not np.any(np.hypot(*(self.left_xy - self.right_xy).T) > 0)

    def _span(self, trim_ends: bool) -> slice:
        if not trim_ends or self.degenerate:
            return slice(None)
        wide = np.flatnonzero(np.hypot(*(self.left_xy - self.right_xy).T) > 0)
        return slice(max(wide[0] - 1, 0), min(wide[-1] + 2, len(self.left_xy)))

    @staticmethod
    def _close(left, right) -> np.ndarray:
        pts = np.vstack([left, right[::-1]])
        keep = np.ones(len(pts), bool)
        keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
        pts = pts[keep]
        if len(pts) > 1 and np.all(pts[0] == pts[-1]):
            pts = pts[:-1]
        return np.vstack([pts, pts[:1]])

    def ring(self, trim_ends: bool = False) -> np.ndarray:
        """Closed lon/lat ring: left boundary forward, right boundary reversed.

        With ``trim_ends`` the zero-width runs at either end of the track
        shrink to a single apex point and repeated vertices are dropped.
        """
        if not trim_ends:
            pts = np.vstack([self.left, self.right[::-1]])
            return np.vstack([pts, pts[:1]])
        span = self._span(True)
        return self._close(self.left[span], self.right[span])

    def ring_xy(self, trim_ends: bool = False) -> np.ndarray:
        if not trim_ends:
            pts = np.vstack([self.left_xy, self.right_xy[::-1]])
            return np.vstack([pts, pts[:1]])
        span = self._span(True)
        return self._close(self.left_xy[span], self.right_xy[span])


def _fix_normals(proj: TrackProjection) -> np.ndarray:
    """Unit left-hand normal at every fix, from the segment leaving it."""
    n = len(proj.hours)
    normals = np.empty((n, 2))
    for i in range(n):
        seg = min(i, n - 2)
        v = proj.segment_velocity(seg)
        s = math.hypot(v[0], v[1])
        normals[i] = (-v[1] / s, v[0] / s)
    return normals


def build_envelope(track: StormTrack, smoothed: SmoothedSeries, k: float) -> EnvelopePolygon:
    if len(track.points) < 2:
        raise ValueError(f"{track.basin_id}: envelope needs at least 2 track points")
    if not k > 0:
        raise ValueError(f"scale k must be positive, got {k}")
    if len(smoothed.rates) != len(track.points):
        raise ValueError("smoothed series must be aligned to the track fixes")
    proj = TrackProjection(track)
    normals = _fix_normals(proj)
    w = k * np.asarray(smoothed.rates, float)
    centre = proj.xy
    left_xy = centre + w[:, None] * normals
    right_xy = centre - w[:, None] * normals

    def unproject(xy):
        return np.column_stack([xy[:, 0] / proj.xscale, xy[:, 1]])

    return EnvelopePolygon(track.name, track.season, unproject(left_xy), unproject(right_xy),
                           left_xy, right_xy, centre, float(k), float(np.max(smoothed.rates)))


def scale_for_batch(smoothed: Sequence[SmoothedSeries], max_half_width_deg: float = DEFAULT_MAX_HALF_WIDTH_DEG) -> float:
    """One k for a whole batch: the largest smoothed rate maps to ``max_half_width_deg``."""
    top = max((float(np.max(s.rates)) for s in smoothed if len(s.rates)), default=0.0)
    if top <= 0:
        return 1.0
    return max_half_width_deg / top


def noon_positions(track: StormTrack) -> list[tuple[dt.datetime, float, float]]:
    """Noon-UTC interpolated (time, lat, lon) for each UTC day lying wholly inside the track span."""
    proj = TrackProjection(track)
    first = track.start.date()
    if track.start.time() != dt.time(0, 0):
        first += dt.timedelta(days=1)
    out = []
    day = first
    while True:
        day_start = dt.datetime.combine(day, dt.time(0, 0), tzinfo=dt.timezone.utc)
        if day_start + dt.timedelta(days=1) > track.end:
            break
        noon = day_start + HALF_DAY
        lat, lon = proj.kinematics(noon).position
        out.append((noon, lat, lon))
        day += dt.timedelta(days=1)
    return out


def _segments_cross(a, b, c, d) -> np.ndarray:
    """Proper or touching intersection of segments ab and cd (vectorised over rows)."""

    def orient(p, q, r):
        return np.sign((q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1])
                       - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0]))

    def on_seg(p, q, r):
        return ((np.minimum(p[..., 0], r[..., 0]) <= q[..., 0]) & (q[..., 0] <= np.maximum(p[..., 0], r[..., 0]))
                & (np.minimum(p[..., 1], r[..., 1]) <= q[..., 1]) & (q[..., 1] <= np.maximum(p[..., 1], r[..., 1])))

    o1, o2, o3, o4 = orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b)
    general = (o1 != o2) & (o3 != o4) & (o1 != 0) & (o2 != 0) & (o3 != 0) & (o4 != 0)
    touch = (((o1 == 0) & on_seg(a, c, b)) | ((o2 == 0) & on_seg(a, d, b))
             | ((o3 == 0) & on_seg(c, a, d)) | ((o4 == 0) & on_seg(c, b, d)))
    return general | touch


def ring_is_simple(ring: np.ndarray) -> bool:
    """True when no two non-adjacent edges of the closed ring meet."""
    ring = np.asarray(ring, float)
    n = len(ring) - 1
    if n < 3:
        return False
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))  # first and last edges share the closing vertex
    i, j = i[keep], j[keep]
    return not np.any(_segments_cross(ring[i], ring[i + 1], ring[j], ring[j + 1]))


def _signed_area(ring: np.ndarray) -> float:
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))


def _coords(ring: np.ndarray) -> list[list[float]]:
    return [[float(x), float(y)] for x, y in ring]


def emit_geojson(envelopes: Sequence[EnvelopePolygon], tracks: Sequence[StormTrack], season: int | None = None) -> dict:
    """FeatureCollection with an envelope Polygon and a noon-marker MultiPoint per storm.

    Rings are written counter-clockwise (RFC 7946 right-hand rule), with
    zero-width ends trimmed to an apex; a ring that still touches itself
    carries ``simple: false``.
    """
    ks = {e.k for e in envelopes}
    if len(ks) > 1:
        raise ValueError("all envelopes in one rendering batch must share k")
    by_key = {(t.name, t.season): t for t in tracks}
    features = []
    for env in envelopes:
        if season is not None and env.season != season:
            continue
        ring = env.ring(trim_ends=True)
        if _signed_area(ring) < 0:
            ring = ring[::-1]
        props = {"name": env.name, "season": env.season, "k": env.k, "max_rate": env.max_rate}
        poly_props = dict(props, kind="envelope")
        if env.degenerate:
            poly_props["degenerate"] = True
        elif not ring_is_simple(env.ring_xy(trim_ends=True)):
            # zero width mid-track, or half-width beyond the local turning radius
            poly_props["simple"] = False
        features.append({"type": "Feature", "properties": poly_props,
                         "geometry": {"type": "Polygon", "coordinates": [_coords(ring)]}})
        track = by_key.get((env.name, env.season))
        noons = noon_positions(track) if track is not None else []
        features.append({
            "type": "Feature",
            "properties": dict(props, kind="noon_positions", times=[t.isoformat() for t, _, _ in noons]),
            "geometry": {"type": "MultiPoint", "coordinates": [[lon, lat] for _, lat, lon in noons]},
        })
    return {"type": "FeatureCollection", "features": features}
