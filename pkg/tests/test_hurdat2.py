import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import FIXTURES, UTC, make_track
from stormlens.bundled import synthetic_season_dir
from stormlens.hurdat2 import (
    Hurdat2Error,
    StormTrack,
    TrackPoint,
    TrackProjection,
    parse_hurdat2,
    read_hurdat2,
    saffir_simpson_category,
    serialize_hurdat2,
    track_kinematics,
)

H2 = FIXTURES / "hurdat2"


class TestParse:
    def test_single_row_harvey(self):
        (track,) = read_hurdat2(H2 / "harvey_one_row.txt")
        assert track.basin_id == "AL092017" and track.name == "HARVEY"
        (p,) = track.points
        assert (p.lat, p.lon) == (28.0, -96.5)
        assert p.max_wind_kt == 115 and p.min_pressure_mb == 937 and p.status == "HU"
        assert p.timestamp == dt.datetime(2017, 8, 26, 0, 0, tzinfo=UTC)
        assert p.record_id is None
        assert p.wind_radii[0] == 130

    def test_sentinels_become_absent(self):
        text = (H2 / "harvey_one_row.txt").read_text().replace(" 937,", "-999,").replace(" 115,", " -99,")
        (p,) = parse_hurdat2(text)[0].points
        assert p.min_pressure_mb is None and p.max_wind_kt is None

    def test_hemispheres(self):
        text = (H2 / "harvey_one_row.txt").read_text().replace("28.0N", "28.0S").replace("96.5W", "96.5E")
        (p,) = parse_hurdat2(text)[0].points
        assert (p.lat, p.lon) == (-28.0, 96.5)

    def test_mixed_row_widths(self):
        harvey, irma = read_hurdat2(H2 / "mixed_widths.txt")
        assert harvey.points[0].radius_max_wind_nm is None
        assert irma.points[0].radius_max_wind_nm == 99

    def test_empty(self):
        assert parse_hurdat2("") == []

    @pytest.mark.parametrize("fixture, storm, line, message", [
        ("too_few_rows.txt", "AL092017", 1, "declares 2 rows"),
        ("too_many_rows.txt", "AL092017", 3, "more data rows"),
        ("bad_latitude.txt", "AL092017", 3, "latitude"),
        ("bad_status.txt", "AL092017", 2, "status"),
        ("short_row.txt", "AL092017", 2, "20 or 21 fields"),
        ("non_monotone.txt", "AL092017", 4, "not strictly increasing"),
        ("bad_wind.txt", "AL092017", 2, "abc"),
        ("second_storm_bad.txt", "AL112017", 4, "longitude"),
    ])
    def test_malformed(self, fixture, storm, line, message):
        with pytest.raises(Hurdat2Error) as info:
            read_hurdat2(H2 / fixture)
        text = str(info.value)
        assert text.startswith(f"{storm} line {line}:")
        assert message in text

    def test_odd_cadence_only_warns(self, caplog):
        text = ("AL012017,              TEST,      3,\n"
                "20170826, 0000,  , HU, 28.0N,  96.5W, 115,  937" + ",    0" * 12 + ",\n"
                "20170826, 0600,  , HU, 28.4N,  97.0W, 115,  937" + ",    0" * 12 + ",\n"
                "20170826, 1700,  , HU, 28.7N,  97.3W, 115,  937" + ",    0" * 12 + ",\n")
        with caplog.at_level("WARNING"):
            (track,) = parse_hurdat2(text)
        assert len(track.points) == 3
        assert "neither 3 h nor 6 h" in caplog.text


class TestRoundTrip:
    def test_bundled_season(self):
        text = (synthetic_season_dir() / "season_2017.hurdat2").read_text()
        tracks = parse_hurdat2(text)
        widths = {len(line.rstrip(",").split(",")) for line in text.splitlines() if not line.startswith("AL")}
        assert len(tracks) >= 5 and widths == {20, 21}
        assert any(p.max_wind_kt is None for t in tracks for p in t.points)
        assert any(p.min_pressure_mb is None for t in tracks for p in t.points)
        assert serialize_hurdat2(tracks) == text
        assert parse_hurdat2(serialize_hurdat2(tracks)) == tracks

    def test_fixture_files(self):
        for name in ("harvey_one_row.txt", "mixed_widths.txt"):
            tracks = read_hurdat2(H2 / name)
            assert parse_hurdat2(serialize_hurdat2(tracks)) == tracks

    def test_empty_and_order(self):
        assert serialize_hurdat2([]) == ""
        a = make_track([(10, -50), (11, -51)], name="ALPHA", basin_id="AL012017")
        b = make_track([(20, -60), (21, -61)], name="BRAVO", basin_id="AL022017")
        text = serialize_hurdat2([a, b])
        headers = [line for line in text.splitlines() if line.startswith("AL")]
        assert [h.split(",")[0] for h in headers] == ["AL012017", "AL022017"]
        assert parse_hurdat2(text) == [a, b]

    @given(st.lists(st.tuples(st.floats(-89.9, 89.9), st.floats(-179.9, 179.9),
                              st.one_of(st.none(), st.integers(0, 185))), min_size=1, max_size=6))
    def test_round_trip_property(self, pts):
        start = dt.datetime(2019, 9, 1, tzinfo=UTC)
        points = [TrackPoint(start + dt.timedelta(hours=6 * i), None, "TS", round(lat, 1), round(lon, 1), w)
                  for i, (lat, lon, w) in enumerate(pts)]
        track = StormTrack("AL052019", "DORIAN", points)
        assert parse_hurdat2(serialize_hurdat2([track])) == [track]


class TestSaffirSimpson:
    @pytest.mark.parametrize("kt, cat", [(100, 3), (63, None), (64, 1), (82, 1), (83, 2), (95, 2), (96, 3),
                                         (112, 3), (113, 4), (136, 4), (137, 5), (185, 5), (0, None)])
    def test_thresholds(self, kt, cat):
        assert saffir_simpson_category(kt) == cat

    def test_negative_raises(self):
        with pytest.raises(ValueError):
            saffir_simpson_category(-1)

    def test_monotone(self):
        cats = [saffir_simpson_category(k) or 0 for k in range(0, 200)]
        assert all(a <= b for a, b in zip(cats, cats[1:]))

    def test_custom_thresholds(self):
        assert saffir_simpson_category(70, thresholds=(50, 60, 70, 80, 90)) == 3


class TestKinematics:
    def test_straight_segment(self):
        track = make_track([(10, -50), (10, -49)])
        k = track_kinematics(track, track.start + dt.timedelta(hours=3))
        assert k.position == pytest.approx((10.0, -49.5), abs=1e-12)
        assert k.velocity[0] > 0 and k.velocity[1] == 0
        assert k.normal == pytest.approx((0.0, 1.0), abs=1e-15)

    def test_exact_sample_position(self):
        track = make_track([(10.1, -50.3), (10.7, -49.9), (11.6, -49.2)])
        for p in track.points:
            assert track_kinematics(track, p.timestamp).position == (p.lat, p.lon)

    def test_outside_span_raises(self):
        track = make_track([(10, -50), (10, -49)])
        with pytest.raises(ValueError):
            track_kinematics(track, track.start - dt.timedelta(minutes=1))
        with pytest.raises(ValueError):
            track_kinematics(track, track.end + dt.timedelta(minutes=1))

    def test_stationary_segment_borrows(self):
        track = make_track([(10, -50), (10, -50), (10, -49)])
        k = track_kinematics(track, track.start + dt.timedelta(hours=2))
        assert k.normal == pytest.approx((0.0, 1.0))

    def test_never_moving_raises(self):
        track = make_track([(10, -50), (10, -50)])
        with pytest.raises(ValueError):
            track_kinematics(track, track.start)

    def test_projection_scale(self):
        track = make_track([(20, -60), (40, -60)])
        proj = TrackProjection(track)
        x, y = proj.to_xy(30, -60)
        assert x == pytest.approx(-60 * math.cos(math.radians(30))) and y == 30
        assert proj.to_latlon(x, y) == pytest.approx((30, -60))

    def test_noon_positions_on_straight_line(self):
        track = make_track([(10 + 0.3 * i, -50 + 0.5 * i) for i in range(12)], hours=6)
        proj = TrackProjection(track)
        p0, p1 = np.array(proj.to_xy(10, -50)), np.array(proj.to_xy(10 + 0.3 * 11, -50 + 0.5 * 11))
        t = track.start.replace(hour=12)
        while t <= track.end:
            lat, lon = track_kinematics(track, t).position
            v = np.array(proj.to_xy(lat, lon)) - p0
            d = p1 - p0
            assert abs(v[0] * d[1] - v[1] * d[0]) < 1e-9
            t += dt.timedelta(days=1)

    def test_normal_is_left_unit(self, rng):
        pts = np.cumsum(rng.normal(0, 0.5, (10, 2)), axis=0) + [20, -60]
        track = make_track(pts)
        for h in np.linspace(0, 54, 25):
            k = track_kinematics(track, track.start + dt.timedelta(hours=float(h)))
            vx, vy = k.velocity
            nx, ny = k.normal
            assert math.hypot(nx, ny) == pytest.approx(1.0)
            assert vx * nx + vy * ny == pytest.approx(0.0, abs=1e-12)
            assert vx * ny - vy * nx > 0  # normal is to the left of motion
