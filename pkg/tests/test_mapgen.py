import datetime as dt
import json
import math

import geojson
import numpy as np
import pytest
from shapely.geometry import LineString, LinearRing, Polygon

from conftest import UTC, make_track
from stormlens.hurdat2 import TrackProjection
from stormlens.mapgen import (
    SmoothedSeries,
    build_envelope,
    emit_geojson,
    noon_positions,
    ring_is_simple,
    scale_for_batch,
    smooth_rates,
)

D0 = dt.date(2017, 9, 1)


def brute_simple(ring):
    """Pairwise check of non-adjacent edges with exact orientation signs."""
    pts = [(float(x), float(y)) for x, y in ring[:-1]]
    n = len(pts)

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    def within(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            a, b, c, d = pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]
            o1, o2, o3, o4 = orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b)
            if o1 * o2 < 0 and o3 * o4 < 0:
                return False
            for o, p, q, r in ((o1, a, b, c), (o2, a, b, d), (o3, c, d, a), (o4, c, d, b)):
                if o == 0 and within(p, q, r):
                    return False
    return True


def constant(track, rate):
    return SmoothedSeries(tuple(p.timestamp for p in track.points), np.full(len(track.points), rate))


def quarter_circle(radius=10.0, n=31):
    ang = np.linspace(0, math.pi / 2, n)
    return make_track([(15 + radius * math.sin(a), -60 + radius * math.cos(a)) for a in ang])


class TestSmooth:
    def test_constant(self):
        track = make_track([(10, -50 + 0.5 * i) for i in range(20)])
        ts = [p.timestamp for p in track.points]
        s = smooth_rates((D0, [3e-5] * 10), ts)
        np.testing.assert_allclose(s.rates, 3e-5, rtol=1e-15)
        assert s.timestamps == tuple(ts)

    def test_impulse_three_hourly(self):
        start = dt.datetime(2017, 9, 1, tzinfo=UTC)
        ts = [start + dt.timedelta(hours=3 * i) for i in range(32)]
        daily = [0.0, 1e-4, 0.0, 0.0]
        s = smooth_rates((D0, daily), ts)
        for i, t in enumerate(ts):
            window = [u for u in ts if abs((u - t).total_seconds()) <= 12 * 3600]
            frac = sum(u.date() == dt.date(2017, 9, 2) for u in window) / len(window)
            assert s.rates[i] == pytest.approx(1e-4 * frac, rel=1e-12)
        assert s.rates.sum() == pytest.approx(8 * 1e-4, rel=1e-12)

    def test_no_overlap(self):
        track = make_track([(10, -50), (10, -49), (10, -48)])
        s = smooth_rates((dt.date(2016, 1, 1), [1e-4] * 5), [p.timestamp for p in track.points])
        assert np.all(s.rates == 0)

    def test_usage_series_input(self):
        from stormlens.corpus import PatternKind, StormPattern, UsageRateSeries

        series = UsageRateSeries.from_rates([2e-5, np.nan], StormPattern("x", PatternKind.HASHTAG), D0)
        track = make_track([(10, -50), (10, -49), (10, -48), (10, -47), (10, -46)])
        s = smooth_rates(series, [p.timestamp for p in track.points])
        assert s.rates[0] == pytest.approx(2e-5) and np.all(s.rates >= 0)


class TestEnvelope:
    def test_rectangle(self):
        track = make_track([(20.0, -70 + 0.5 * i) for i in range(15)])
        env = build_envelope(track, constant(track, 1e-4), k=2e4)
        w = 2.0
        np.testing.assert_allclose(env.left_xy[:, 1], 20 + w, atol=1e-9, rtol=0)
        np.testing.assert_allclose(env.right_xy[:, 1], 20 - w, atol=1e-9, rtol=0)
        np.testing.assert_allclose(env.left_xy[:, 0], env.centre_xy[:, 0], atol=1e-9, rtol=0)
        np.testing.assert_allclose(env.right_xy[:, 0], env.centre_xy[:, 0], atol=1e-9, rtol=0)
        ring = env.ring_xy()
        assert np.array_equal(ring[0], ring[-1]) and len(ring) == 2 * 15 + 1
        assert len(env.left) == len(env.right) == len(track.points)
        x0, x1 = env.centre_xy[0, 0], env.centre_xy[-1, 0]
        assert Polygon(ring).area == pytest.approx((x1 - x0) * 2 * w, rel=1e-12)

    @pytest.mark.parametrize("w", [1.0, 3.0, 6.0, 9.0])
    def test_quarter_circle_simple(self, w):
        track = quarter_circle()
        env = build_envelope(track, constant(track, 1e-4), k=w / 1e-4)
        ring = env.ring_xy()
        assert brute_simple(ring)
        assert ring_is_simple(ring)
        assert LinearRing(ring).is_simple
        assert Polygon(ring).is_valid

    def test_wide_turn_detected(self):
        # half-width beyond the turning radius folds the inner boundary
        track = quarter_circle(radius=3.0)
        env = build_envelope(track, constant(track, 1e-4), k=8.0 / 1e-4)
        ring = env.ring_xy()
        assert not brute_simple(ring)
        assert not ring_is_simple(ring)
        assert not LinearRing(ring).is_simple

    def test_random_rings_agree_with_shapely(self, rng):
        for _ in range(200):
            pts = rng.normal(size=(int(rng.integers(3, 9)), 2))
            ring = np.vstack([pts, pts[:1]])
            assert ring_is_simple(ring) == LinearRing(ring).is_simple == brute_simple(ring)

    def test_linear_in_k(self, rng):
        track = make_track(np.cumsum(rng.normal(0.3, 0.4, (12, 2)), axis=0) + [15, -60])
        smoothed = SmoothedSeries(tuple(p.timestamp for p in track.points), rng.uniform(0, 1e-4, 12))
        a = build_envelope(track, smoothed, 1e4)
        b = build_envelope(track, smoothed, 2e4)
        np.testing.assert_allclose(b.left_xy - b.centre_xy, 2 * (a.left_xy - a.centre_xy), rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(b.right_xy - b.centre_xy, 2 * (a.right_xy - a.centre_xy), rtol=1e-12, atol=1e-12)

    def test_zero_rate_degenerate(self):
        track = make_track([(20, -70), (20.5, -69), (21, -68)])
        env = build_envelope(track, constant(track, 0.0), k=1.0)
        assert env.degenerate
        doc = emit_geojson([env], [track], 2017)
        assert doc["features"][0]["properties"]["degenerate"] is True

    def test_track_inside_envelope(self, rng):
        for _ in range(10):
            steps = rng.normal(0, 0.2, (20, 2)) + [0.3, -0.5]
            track = make_track(np.cumsum(steps, axis=0) + [15, -40])
            env = build_envelope(track, constant(track, 1e-4), k=0.5e4)
            ring = env.ring_xy()
            if not LinearRing(ring).is_simple:
                continue
            assert Polygon(ring).buffer(1e-9).covers(LineString(env.centre_xy))

    def test_errors(self):
        track = make_track([(20, -70), (20, -69)])
        with pytest.raises(ValueError):
            build_envelope(track, constant(track, 1e-4), 0.0)
        with pytest.raises(ValueError):
            build_envelope(make_track([(20, -70)]), constant(make_track([(20, -70)]), 1.0), 1.0)

    def test_unprojection(self):
        track = make_track([(30, -60), (31, -59), (32, -57)])
        env = build_envelope(track, constant(track, 1e-4), k=1e4)
        proj = TrackProjection(track)
        for (lon, lat), xy in zip(env.left, env.left_xy):
            assert proj.to_xy(lat, lon) == pytest.approx(tuple(xy), abs=1e-12)


class TestScale:
    def test_batch_max_maps_to_cap(self):
        a = SmoothedSeries((), np.array([1e-5, 4e-5]))
        b = SmoothedSeries((), np.array([2e-4]))
        assert scale_for_batch([a, b], 8.0) * 2e-4 == pytest.approx(8.0)

    def test_all_zero(self):
        assert scale_for_batch([SmoothedSeries((), np.zeros(3))]) == 1.0


class TestGeoJSON:
    def test_noon_count(self):
        track = make_track([(20, -70 + 0.3 * i) for i in range(12)],
                           start=dt.datetime(2017, 9, 1, 6, tzinfo=UTC))  # 06:00 Sep 1 .. 00:00 Sep 4
        noons = noon_positions(track)
        assert [t.day for t, _, _ in noons] == [2, 3]
        assert all(t.hour == 12 for t, _, _ in noons)

    def test_valid_document(self):
        tracks = [quarter_circle(), make_track([(20.0, -70 + 0.5 * i) for i in range(15)], name="OTHER",
                                                basin_id="AL022017")]
        envs = [build_envelope(t, constant(t, 1e-4), 3e4) for t in tracks]
        doc = emit_geojson(envs, tracks, 2017)
        assert len(doc["features"]) == 4
        obj = geojson.loads(json.dumps(doc))
        assert obj.is_valid, obj.errors()
        for feat in doc["features"]:
            if feat["geometry"]["type"] == "Polygon":
                ring = feat["geometry"]["coordinates"][0]
                assert ring[0] == ring[-1]
                assert LinearRing(ring).is_ccw and Polygon(ring).is_valid
                assert set(feat["properties"]) >= {"name", "season", "k", "max_rate"}
            else:
                assert feat["geometry"]["type"] == "MultiPoint"

    def test_coordinates_lon_lat(self):
        track = make_track([(20.0, -70 + 0.5 * i) for i in range(9)])
        doc = emit_geojson([build_envelope(track, constant(track, 1e-4), 1e4)], [track])
        lons = [c[0] for c in doc["features"][0]["geometry"]["coordinates"][0]]
        assert all(-72 < x < -65 for x in lons)

    def test_mixed_k_rejected(self):
        track = make_track([(20, -70), (20, -69)])
        envs = [build_envelope(track, constant(track, 1e-4), 1.0), build_envelope(track, constant(track, 1e-4), 2.0)]
        with pytest.raises(ValueError):
            emit_geojson(envs, [track])

    def test_zero_width_ends_trimmed(self):
        track = make_track([(20.0, -70 + 0.5 * i) for i in range(8)])
        rates = np.array([0, 0, 1, 1, 1, 1, 0, 0], float) * 1e-4
        env = build_envelope(track, SmoothedSeries(tuple(p.timestamp for p in track.points), rates), 1e4)
        doc = emit_geojson([env], [track])
        feat = doc["features"][0]
        assert "simple" not in feat["properties"]
        assert Polygon(feat["geometry"]["coordinates"][0]).is_valid
