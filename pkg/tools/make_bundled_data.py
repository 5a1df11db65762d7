"""Regenerate the bundled Maria stand-in series and the synthetic season.

Run from the repository root:  python3 tools/make_bundled_data.py
Outputs are deterministic (fixed seed).
"""

from __future__ import annotations

import datetime as dt
import json
import math
from pathlib import Path

import numpy as np

from stormlens.corpus import CorpusKind, GramKind, NgramCountRow, format_counts
from stormlens.hurdat2 import StormTrack, TrackPoint, serialize_hurdat2
from stormlens.metrics import attention_quantile

DATA = Path(__file__).resolve().parents[1] / "src" / "stormlens" / "data"
UTC = dt.timezone.utc
SEED = 20170906


# --------------------------------------------------------------------------
# Maria 2017 stand-in: a 365-day hashtag series matching the table row
# (I = 4.9e-4, max 5.0e-5, Q0.9 = 166, Q0.99 = 363).


def maria_standin() -> np.ndarray:
    total, peak = 4.9e-4, 5.0e-5
    head_days, last_days = 30, 2
    tail_end = 363  # indices head_days..362 carry the constant tail
    n_tail = tail_end - head_days
    # H + n_tail*c = 0.9901 I and H + (166 - head_days + 0.5)*c = 0.9 I
    c = (0.9901 - 0.9) * total / (n_tail - (166 - head_days - 0.5))
    head_mass = 0.9901 * total - n_tail * c
    # geometric head starting at the peak with the required mass
    lo, hi = 1e-3, 1.0
    for _ in range(200):
        rho = 0.5 * (lo + hi)
        mass = peak * (1 - rho ** head_days) / (1 - rho)
        lo, hi = (rho, hi) if mass < head_mass else (lo, rho)
    f = np.empty(365)
    f[:head_days] = peak * rho ** np.arange(head_days)
    f[:head_days] *= head_mass / f[:head_days].sum()
    f[head_days:tail_end] = c
    f[tail_end:] = (total - f[:tail_end].sum()) / last_days
    assert attention_quantile(f, 0.9) == 166 and attention_quantile(f, 0.99) == 363
    assert abs(f.sum() - total) < 1e-15 and abs(f.max() - peak) < 1e-12
    return f


def write_maria():
    f = maria_standin()
    lines = [
        "# Maria 2017 hashtag usage stand-in (not measured data).",
        "# Shape built so integrated, max, Q0.9 and Q0.99 equal the comparison-table row.",
        "# start_date=2017-09-16 integrated=4.9e-4 max_rate=5.0e-5 q90_days=166 q99_days=363",
        "day,rate",
    ]
    lines += [f"{i},{v:.17g}" for i, v in enumerate(f)]
    (DATA / "maria_2017_hashtag_standin.csv").write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# synthetic season


STORMS = [
    # name, id, start, lat0, lon0, heading (deg ccw from east), turn deg/fix, speed deg/h, days, peak kt, rmw
    ("HARVEY", "AL092017", dt.datetime(2017, 8, 17, 6, tzinfo=UTC), 13.0, -55.0, 175, -1.0, 0.20, 9, 115, True),
    ("IRMA", "AL112017", dt.datetime(2017, 8, 30, 0, tzinfo=UTC), 16.1, -26.9, 185, -0.8, 0.22, 12, 155, False),
    ("JOSE", "AL122017", dt.datetime(2017, 9, 5, 12, tzinfo=UTC), 12.0, -36.0, 160, -3.0, 0.22, 10, 135, False),
    ("MARIA", "AL152017", dt.datetime(2017, 9, 16, 12, tzinfo=UTC), 12.2, -49.7, 165, -2.2, 0.20, 11, 150, True),
    ("NATE", "AL162017", dt.datetime(2017, 10, 4, 12, tzinfo=UTC), 11.0, -81.5, 100, -1.5, 0.30, 4, 80, False),
    ("EMILY", "AL062017", dt.datetime(2017, 7, 30, 18, tzinfo=UTC), 27.0, -83.5, 10, 1.0, 0.35, 3, 45, False),
]

# impacts: deaths, damage, category
IMPACTS = {
    "HARVEY": (107, 1.2e11, 4),
    "IRMA": (134, 7.7e10, 5),
    "JOSE": (1, 2.8e6, 4),
    "MARIA": (3057, 9.1e10, 5),
    "NATE": (48, 7.8e8, 1),
    "EMILY": (1, 1.0e7, "TS"),
}

# attention: peak rate, day of peak after start, p, q, r
ATTENTION = {
    "HARVEY": (3.5e-4, 9, 0.45, 0.030, 0.040),
    "IRMA": (4.6e-4, 11, 0.55, 0.040, 0.030),
    "JOSE": (8.0e-6, 7, 0.30, 0.050, 0.060),
    "MARIA": (5.0e-5, 5, 0.20, 0.015, 0.050),
    "NATE": (3.1e-5, 3, 0.60, 0.060, 0.030),
    "EMILY": (6.0e-6, 1, 0.70, 0.080, 0.020),
}


def _status(kt: int) -> str:
    return "TD" if kt < 34 else ("TS" if kt < 64 else "HU")


def _radii(kt: int) -> tuple:
    out = []
    for thr, base in ((34, 120), (50, 60), (64, 30)):
        out += [base + 10 * q if kt >= thr else 0 for q in range(4)]
    return tuple(out)


def make_track(spec) -> StormTrack:
    name, sid, start, lat, lon, heading, turn, speed, days, peak, rmw = spec
    n = days * 4 + 1
    points = []
    hdg = math.radians(heading)
    for i in range(n):
        t = start + dt.timedelta(hours=6 * i)
        frac = i / (n - 1)
        kt = int(round((25 + (peak - 25) * math.sin(math.pi * min(1.0, frac * 1.2)) ** 1.5) / 5) * 5)
        kt = max(kt, 20)
        radii = (None,) * 12 if i < 2 else _radii(kt)
        pressure = None if i == 0 else int(1010 - 0.8 * (kt - 25))
        wind = None if (i == 1 and name == "EMILY") else kt
        points.append(TrackPoint(t, None, _status(kt), round(lat, 1), round(lon, 1), wind, pressure,
                                 radii, (None if i < 2 else 15 + i % 3 * 5) if rmw else None, rmw_field=rmw))
        if i == n // 2:
            # landfall record 3 h later on the same path
            mid = dt.timedelta(hours=3)
            step = speed * 3
            llat = lat + step * math.sin(hdg)
            llon = lon + step * math.cos(hdg) / math.cos(math.radians(lat))
            points.append(TrackPoint(t + mid, "L", _status(kt), round(llat, 1), round(llon, 1), kt,
                                     pressure, _radii(kt), (20 if rmw else None), rmw_field=rmw))
        step = speed * 6
        lat += step * math.sin(hdg)
        lon += step * math.cos(hdg) / math.cos(math.radians(lat))
        hdg += math.radians(turn)
    return StormTrack(sid, name, points)


def attention_curve(spec, days: int, rng) -> np.ndarray:
    """Daily hashtag rate from the storm's first day: ramp to the peak, then bi-exponential decay."""
    peak, peak_day, p, q, r = spec
    f = np.zeros(days)
    ramp = np.arange(peak_day)
    f[:peak_day] = peak * np.exp(-0.9 * (peak_day - ramp))
    t = np.arange(days - peak_day, dtype=float)
    a = p + r
    shape = ((a - q - r) * np.exp(-a * t) + r * np.exp(-q * t)) / (a - q)
    f[peak_day:] = peak * shape
    return f * np.exp(rng.normal(0, 0.15, days))


def write_synthetic():
    rng = np.random.default_rng(SEED)
    out = DATA / "synthetic"
    out.mkdir(parents=True, exist_ok=True)
    tracks = [make_track(s) for s in STORMS]
    (out / "season_2017.hurdat2").write_text(serialize_hurdat2(tracks))

    lines = ["name,season,deaths,damage_usd,max_category"]
    for name, (deaths, damage, cat) in IMPACTS.items():
        lines.append(f"{name.title()},2017,{deaths},{damage:.6g},{cat}")
    lines.append("Katia,2017,3,3.2e6,2")  # no track and no usage: reported as a join error
    (out / "impacts.csv").write_text("\n".join(lines) + "\n")

    first, last = dt.date(2017, 7, 25), dt.date(2018, 10, 31)
    n_days = (last - first).days + 1
    outage = {dt.date(2017, 12, 25), dt.date(2018, 3, 3)}
    rates = {}
    for track in tracks:
        off = (track.start.date() - first).days
        f = np.zeros(n_days)
        curve = attention_curve(ATTENTION[track.name], n_days - off, rng)
        f[off:] = curve
        rates[track.name] = f
    hurricane_rate = 2e-6 + 3.0 * sum(rates.values())

    rows = []
    for i in range(n_days):
        day = first + dt.timedelta(days=i)
        if day in outage:
            continue
        for corpus, scale in ((CorpusKind.ALL, 1.0), (CorpusKind.ORGANIC, 0.55)):
            uni_total = int(5e7 * scale * rng.uniform(0.9, 1.1))
            bi_total = int(4e7 * scale * rng.uniform(0.9, 1.1))
            share = 1.0 if corpus is CorpusKind.ALL else 0.9
            day_rows = []
            for name, f in rates.items():
                tag = rng.poisson(f[i] * share * uni_total)
                big = rng.poisson(0.6 * f[i] * share * bi_total)
                if tag:
                    day_rows.append((GramKind.UNIGRAM, f"#hurricane{name.lower()}", int(tag), uni_total))
                if big:
                    day_rows.append((GramKind.BIGRAM, f"hurricane {name.lower()}", int(big), bi_total))
            day_rows.append((GramKind.UNIGRAM, "hurricane",
                             int(rng.poisson(min(hurricane_rate[i], 0.01) * share * uni_total)), uni_total))
            day_rows.append((GramKind.UNIGRAM, "the", int(0.04 * uni_total), uni_total))
            day_rows.append((GramKind.BIGRAM, "of the", int(0.005 * bi_total), bi_total))
            for kind, gram, count, total in sorted(day_rows, key=lambda r: (r[0].value, r[1])):
                rows.append(NgramCountRow(day, corpus, "en", kind, gram, count, total))
    (out / "counts.tsv").write_text(format_counts(rows))

    tweets = []
    texts = ["Stay safe everyone #Hurricane{n}", "Hurricane {n} is getting stronger",
             "thoughts with everyone in the path of hurricane {n}!", "RT: Hurricane {n} update #hurricane{n}"]
    for k in range(240):
        track = tracks[k % len(tracks)]
        t = track.start + dt.timedelta(hours=int(rng.integers(0, 96)))
        text = texts[k % len(texts)].format(n=track.name.title())
        tweets.append({"timestamp": t.isoformat(), "lang": "en" if k % 7 else "es",
                       "retweet": text.startswith("RT"), "text": text})
    tweets.append({"timestamp": "not a time", "lang": "en", "retweet": False, "text": "hurricane"})
    (out / "tweets.jsonl").write_text("".join(json.dumps(t) + "\n" for t in tweets))

    config = {
        "tweets": "tweets.jsonl",
        "counts": "counts.tsv",
        "hurdat2": "season_2017.hurdat2",
        "impacts": "impacts.csv",
        "output_dir": "stormlens-out",
        "window_days": 365,
        "sampler": {"chains": 8, "draws": 2000, "seed": 2017},
        "map": {"max_half_width_deg": 8.0},
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    write_maria()
    write_synthetic()
