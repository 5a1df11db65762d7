"""NOAA HURDAT2 best-track parsing, serialization and track kinematics."""

from __future__ import annotations

import datetime as dt
import logging
import math
import re
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

log = logging.getLogger(__name__)

UTC = dt.timezone.utc

STATUS_CODES = frozenset({"TD", "TS", "HU", "EX", "SD", "SS", "LO", "WV", "DB"})
# G (genesis) and R (rainfall detail) appear in recent archives next to the classic set.
RECORD_IDS = frozenset({"L", "W", "P", "I", "C", "S", "T", "G", "R"})

# Lower wind bound (kt) of categories 1..5.
SAFFIR_SIMPSON_KT = (64, 83, 96, 113, 137)

MISSING_WIND = -99
MISSING_VALUE = -999

_HEADER_ID = re.compile(r"^[A-Z]{2}\d{6}$")
_LAT = re.compile(r"^(\d{1,2}(?:\.\d+)?)([NS])$")
_LON = re.compile(r"^(\d{1,3}(?:\.\d+)?)([EW])$")


class Hurdat2Error(ValueError):
    """Malformed archive; message carries storm id and line number."""


@dataclass(frozen=True)
class TrackPoint:
    timestamp: dt.datetime
    record_id: str | None
    status: str
    lat: float
    lon: float
    max_wind_kt: int | None = None
    min_pressure_mb: int | None = None
    wind_radii: tuple = (None,) * 12
    radius_max_wind_nm: int | None = None
    rmw_field: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.lat) and -90 <= self.lat <= 90):
            raise ValueError(f"latitude out of range: {self.lat}")
        if not (math.isfinite(self.lon) and -180 <= self.lon <= 180):
            raise ValueError(f"longitude out of range: {self.lon}")
        if self.max_wind_kt is not None and self.max_wind_kt < 0:
            raise ValueError(f"negative max wind: {self.max_wind_kt}")
        if len(self.wind_radii) != 12:
            raise ValueError("wind_radii needs 12 entries (34/50/64 kt x NE/SE/SW/NW)")


@dataclass(frozen=True)
class StormTrack:
    basin_id: str
    name: str
    points: tuple[TrackPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        for a, b in zip(self.points, self.points[1:]):
            if b.timestamp <= a.timestamp:
                raise ValueError(f"{self.basin_id}: timestamps not strictly increasing at {b.timestamp}")

    @property
    def season(self) -> int:
        return int(self.basin_id[4:8])

    @property
    def start(self) -> dt.datetime:
        return self.points[0].timestamp

    @property
    def end(self) -> dt.datetime:
        return self.points[-1].timestamp

    @property
    def max_wind_kt(self) -> int | None:
        winds = [p.max_wind_kt for p in self.points if p.max_wind_kt is not None]
        return max(winds) if winds else None

    def max_category(self) -> int | None:
        wind = self.max_wind_kt
        return None if wind is None else saffir_simpson_category(wind)


# --------------------------------------------------------------------------
# parsing


def _fields(line: str) -> list[str]:
    parts = [p.strip() for p in line.rstrip("\r\n").split(",")]
    if parts and parts[-1] == "":
        parts.pop()
    return parts


def _opt_int(text: str, missing: int) -> int | None:
    value = int(text)
    return None if value == missing else value


def _parse_point(parts: list[str]) -> TrackPoint:
    if len(parts) not in (20, 21):
        raise ValueError(f"expected 20 or 21 fields, got {len(parts)}")
    date, hhmm, rid, status, lat_s, lon_s = parts[:6]
    if len(date) != 8 or len(hhmm) != 4:
        raise ValueError(f"bad date/time {date!r} {hhmm!r}")
    ts = dt.datetime.strptime(date + hhmm, "%Y%m%d%H%M").replace(tzinfo=UTC)
    if rid and rid not in RECORD_IDS:
        raise ValueError(f"unknown record identifier {rid!r}")
    if status not in STATUS_CODES:
        raise ValueError(f"unknown status {status!r}")
    m = _LAT.match(lat_s)
    if not m:
        raise ValueError(f"bad latitude {lat_s!r}")
    lat = float(m.group(1)) * (1 if m.group(2) == "N" else -1)
    m = _LON.match(lon_s)
    if not m:
        raise ValueError(f"bad longitude {lon_s!r}")
    lon = float(m.group(1)) * (1 if m.group(2) == "E" else -1)
    wind = _opt_int(parts[6], MISSING_WIND)
    pressure = _opt_int(parts[7], MISSING_VALUE)
    radii = tuple(_opt_int(p, MISSING_VALUE) for p in parts[8:20])
    rmw = _opt_int(parts[20], MISSING_VALUE) if len(parts) == 21 else None
    return TrackPoint(ts, rid or None, status, lat, lon, wind, pressure, radii, rmw,
                      rmw_field=len(parts) == 21)


def _check_cadence(track: StormTrack):
    odd = [
        b.timestamp for a, b in zip(track.points, track.points[1:])
        if (b.timestamp - a.timestamp) not in (dt.timedelta(hours=3), dt.timedelta(hours=6))
    ]
    if odd:
        log.warning("%s: %d track gaps are neither 3 h nor 6 h (first at %s)",
                    track.basin_id, len(odd), odd[0].isoformat())


def parse_hurdat2(text: str) -> list[StormTrack]:
    """Parse a HURDAT2 archive held in ``text``."""
    lines = text.splitlines()
    tracks = []
    i = 0
    while i < len(lines):
        line = lines[i]
        i += 1
        if not line.strip():
            continue
        header = _fields(line)
        if len(header) != 3 or not _HEADER_ID.match(header[0]):
            raise Hurdat2Error(f"line {i}: expected a storm header, got {line.strip()!r}")
        basin_id, name, count_s = header
        try:
            count = int(count_s)
        except ValueError:
            raise Hurdat2Error(f"{basin_id} line {i}: bad row count {count_s!r}") from None
        header_line = i
        points = []
        while len(points) < count:
            if i >= len(lines) or not lines[i].strip():
                raise Hurdat2Error(
                    f"{basin_id} line {header_line}: header declares {count} rows, found {len(points)}"
                )
            parts = _fields(lines[i])
            i += 1
            if len(parts) == 3 and _HEADER_ID.match(parts[0]):
                raise Hurdat2Error(
                    f"{basin_id} line {header_line}: header declares {count} rows, found {len(points)}"
                )
            try:
                point = _parse_point(parts)
            except ValueError as exc:
                raise Hurdat2Error(f"{basin_id} line {i}: {exc}") from None
            if points and point.timestamp <= points[-1].timestamp:
                raise Hurdat2Error(f"{basin_id} line {i}: timestamps not strictly increasing")
            points.append(point)
        if i < len(lines) and lines[i].strip():
            nxt = _fields(lines[i])
            if not (len(nxt) == 3 and _HEADER_ID.match(nxt[0])):
                raise Hurdat2Error(
                    f"{basin_id} line {i + 1}: more data rows than the {count} declared"
                )
        track = StormTrack(basin_id, name, tuple(points))
        _check_cadence(track)
        tracks.append(track)
    return tracks


def read_hurdat2(path) -> list[StormTrack]:
    with open(path, encoding="utf-8") as fh:
        return parse_hurdat2(fh.read())


# --------------------------------------------------------------------------
# serialization


def _fmt_opt(value: int | None, missing: int, width: int) -> str:
    return f"{missing if value is None else value:>{width}d}"


def _format_point(p: TrackPoint) -> str:
    lat = f"{abs(p.lat):.1f}{'N' if p.lat >= 0 else 'S'}"
    lon = f"{abs(p.lon):.1f}{'E' if p.lon >= 0 else 'W'}"
    fields = [
        p.timestamp.strftime("%Y%m%d"),
        p.timestamp.strftime(" %H%M"),
        f"{p.record_id or '':>2}",
        f"{p.status:>3}",
        f"{lat:>6}",
        f"{lon:>7}",
        _fmt_opt(p.max_wind_kt, MISSING_WIND, 4),
        _fmt_opt(p.min_pressure_mb, MISSING_VALUE, 5),
    ]
    fields += [_fmt_opt(r, MISSING_VALUE, 5) for r in p.wind_radii]
    if p.rmw_field or p.radius_max_wind_nm is not None:
        fields.append(_fmt_opt(p.radius_max_wind_nm, MISSING_VALUE, 5))
    return ",".join(fields) + ","


def serialize_hurdat2(tracks: Sequence[StormTrack]) -> str:
    out = []
    for t in tracks:
        out.append(f"{t.basin_id},{t.name:>19},{len(t.points):>7},")
        out.extend(_format_point(p) for p in t.points)
    return "".join(line + "\n" for line in out)


# --------------------------------------------------------------------------
# intensity and kinematics


def saffir_simpson_category(max_wind_kt: int, thresholds: Sequence[int] = SAFFIR_SIMPSON_KT) -> int | None:
    """Category 1..5 for a sustained wind in knots, None below hurricane strength."""
    if max_wind_kt < 0:
        raise ValueError(f"wind speed must be non-negative, got {max_wind_kt}")
    category = None
    for cat, lower in enumerate(thresholds, 1):
        if max_wind_kt >= lower:
            category = cat
    return category


class Kinematics(NamedTuple):
    position: tuple[float, float]  # (lat, lon)
    velocity: tuple[float, float]  # projected (x, y) degrees per hour
    normal: tuple[float, float]  # projected unit left-hand normal


class TrackProjection:
    """Equirectangular plane with x = lon * cos(mean latitude), y = lat."""

    def __init__(self, track: StormTrack):
        if not track.points:
            raise ValueError(f"{track.basin_id}: empty track")
        self.track = track
        lats = np.array([p.lat for p in track.points])
        lons = np.array([p.lon for p in track.points])
        self.lat_ref = float(lats.mean())
        self.xscale = math.cos(math.radians(self.lat_ref))
        self.xy = np.column_stack([lons * self.xscale, lats])
        self.hours = np.array([(p.timestamp - track.start).total_seconds() / 3600.0 for p in track.points])
        seg = np.diff(self.xy, axis=0)
        dt_h = np.diff(self.hours)
        self.seg_velocity = seg / dt_h[:, None] if len(seg) else np.zeros((0, 2))
        self.seg_ok = np.hypot(seg[:, 0], seg[:, 1]) > 0 if len(seg) else np.zeros(0, bool)

    def to_xy(self, lat: float, lon: float) -> tuple[float, float]:
        return lon * self.xscale, lat

    def to_latlon(self, x: float, y: float) -> tuple[float, float]:
        return y, x / self.xscale

    def _hours(self, t: dt.datetime) -> float:
        return (t - self.track.start).total_seconds() / 3600.0

    def segment_index(self, t: dt.datetime) -> int:
        h = self._hours(t)
        if h < 0 or h > self.hours[-1]:
            raise ValueError(
                f"{self.track.basin_id}: {t.isoformat()} outside track span "
                f"{self.track.start.isoformat()}..{self.track.end.isoformat()}"
            )
        if len(self.hours) == 1:
            return 0
        i = int(np.searchsorted(self.hours, h, side="right")) - 1
        return min(i, len(self.hours) - 2)

    def segment_velocity(self, i: int) -> np.ndarray:
        """Velocity of segment ``i``; stationary segments borrow the nearest moving one."""
        if len(self.seg_ok) == 0 or not self.seg_ok.any():
            raise ValueError(f"{self.track.basin_id}: track never moves, velocity undefined")
        if self.seg_ok[i]:
            return self.seg_velocity[i]
        good = np.flatnonzero(self.seg_ok)
        j = good[np.argmin(np.abs(good - i))]
        return self.seg_velocity[j]

    def kinematics(self, t: dt.datetime) -> Kinematics:
        i = self.segment_index(t)
        h = self._hours(t)
        pts = self.track.points
        if len(self.hours) == 1 or h == self.hours[i]:
            lat, lon = pts[i].lat, pts[i].lon
        elif h == self.hours[i + 1]:
            lat, lon = pts[i + 1].lat, pts[i + 1].lon
        else:
            # the projection is linear, so interpolating lat/lon is the same line
            w = (h - self.hours[i]) / (self.hours[i + 1] - self.hours[i])
            lat = (1 - w) * pts[i].lat + w * pts[i + 1].lat
            lon = (1 - w) * pts[i].lon + w * pts[i + 1].lon
        v = self.segment_velocity(i)
        speed = math.hypot(v[0], v[1])
        normal = (-v[1] / speed, v[0] / speed)
        return Kinematics((lat, lon), (float(v[0]), float(v[1])), normal)


def track_kinematics(track: StormTrack, t: dt.datetime) -> Kinematics:
    """Interpolated position, segment velocity and left-hand normal at ``t``."""
    return TrackProjection(track).kinematics(t)
