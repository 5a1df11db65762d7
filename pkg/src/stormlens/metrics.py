"""Per-storm attention summaries and cross-storm comparisons."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import PatternKind, UsageRateSeries

RADAR_MEASURES = ("max_rate", "integrated", "q90_days", "q99_days", "damage_usd", "deaths")
SUMMARY_COLUMNS = ("storm", "season", "integrated", "max_rate", "deaths", "damage_usd",
                   "q99_days", "q90_days")


class MetricsError(ValueError):
    pass


def _rates(series) -> np.ndarray:
    if isinstance(series, UsageRateSeries):
        return series.filled()
    return np.nan_to_num(np.asarray(series, dtype=float), nan=0.0)


def integrated_usage(series, window_days: int = 365) -> float:
    """Sum of daily rates over day indices ``0 .. window_days-1``; missing days add 0."""
    return float(np.sum(_rates(series)[:window_days]))


def peak_usage(series) -> tuple[int, float]:
    """(day index, rate) of the earliest maximum; an all-zero series gives (0, 0.0)."""
    f = _rates(series)
    if f.size == 0:
        raise MetricsError("peak of an empty series")
    day = int(np.argmax(f))
    return day, float(f[day])


def attention_quantile(series, q: float, window_days: int | None = None) -> int:
    """Days from the window start until cumulative usage reaches ``q`` of the total.

    Returns the smallest ``d >= 1`` with ``sum(f[:d]) >= q * I``, where ``I``
    is the running total at the end of the window.
    """
    if not 0 < q < 1:
        raise MetricsError(f"quantile must lie in (0, 1), got {q}")
    f = _rates(series)
    if window_days is not None:
        f = f[:window_days]
    cum = np.cumsum(f)
    total = cum[-1] if cum.size else 0.0
    if not total > 0:
        raise MetricsError("attention quantile undefined for a series with zero total usage")
    return int(np.searchsorted(cum, q * total, side="left")) + 1


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1
        i = j + 1
    return ranks


def spearman_rho(xs, ys) -> float:
    """Spearman rank correlation with mid-ranks for ties."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise MetricsError("spearman_rho needs two equal-length vectors of at least 2 values")
    rx, ry = _midranks(x), _midranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    sx, sy = math.sqrt(rx @ rx), math.sqrt(ry @ ry)
    if sx == 0 or sy == 0:
        raise MetricsError("spearman_rho undefined for a constant vector")
    return float(np.clip((rx @ ry) / (sx * sy), -1.0, 1.0))


def attention_share(bigram_series, unigram_series) -> np.ndarray:
    """Daily ratio of a storm 2-gram's rate to the 1-gram "hurricane" rate.

    Days where the 1-gram rate is zero or missing come back as NaN.
    """
    b = np.asarray(bigram_series.rates if isinstance(bigram_series, UsageRateSeries) else bigram_series, float)
    u = np.asarray(unigram_series.rates if isinstance(unigram_series, UsageRateSeries) else unigram_series, float)
    if b.shape != u.shape:
        raise MetricsError("attention_share needs aligned series")
    out = np.full(b.shape, np.nan)
    ok = np.isfinite(u) & (u > 0)
    with np.errstate(invalid="ignore"):
        out[ok] = np.nan_to_num(b[ok], nan=0.0) / u[ok]
    return out


@dataclass(frozen=True)
class AttentionSummary:
    integrated: float
    max_rate: float
    max_day: int
    q90_days: int | None
    q99_days: int | None


def summarize_attention(series, window_days: int = 365) -> AttentionSummary:
    f = _rates(series)[:window_days]
    total = integrated_usage(f, window_days)
    day, peak = peak_usage(f) if f.size else (0, 0.0)
    if total > 0:
        q90, q99 = attention_quantile(f, 0.9), attention_quantile(f, 0.99)
    else:
        q90 = q99 = None
    return AttentionSummary(total, peak, day, q90, q99)


@dataclass(frozen=True)
class StormMeasures:
    storm: str
    season: int
    integrated: float
    max_rate: float
    q90_days: int | None
    q99_days: int | None
    deaths: int | None
    damage_usd: float | None


def storm_measures(dossier, kind: PatternKind | str = PatternKind.HASHTAG) -> StormMeasures:
    s = summarize_attention(dossier.series(kind), dossier.window_days)
    return StormMeasures(dossier.name, dossier.season, s.integrated, s.max_rate, s.q90_days, s.q99_days,
                         dossier.impact.deaths, dossier.impact.damage_usd)


@dataclass
class RadarTable:
    storms: list[tuple[str, int]]
    measures: tuple[str, ...]
    values: list[list[float | None]]
    column_max: dict[str, float | None]
    # row index holding each column's maximum (earliest on ties)
    argmax: dict[str, int | None]


def radar_table(rows: Sequence[StormMeasures], measures: Sequence[str] = RADAR_MEASURES) -> RadarTable:
    """Each measure divided by its maximum over the given storms."""
    if not rows:
        raise MetricsError("radar_table needs at least one storm")
    measures = tuple(measures)
    for m in measures:
        if m not in RADAR_MEASURES:
            raise MetricsError(f"unknown radar measure {m!r}")
    values = [[None] * len(measures) for _ in rows]
    column_max, argmax = {}, {}
    for j, m in enumerate(measures):
        raw = [getattr(r, m) for r in rows]
        present = [(i, float(v)) for i, v in enumerate(raw) if v is not None and math.isfinite(v)]
        top = max((v for _, v in present), default=0.0)
        if top <= 0:
            column_max[m], argmax[m] = None, None
            continue
        column_max[m] = top
        argmax[m] = next(i for i, v in present if v == top)
        for i, v in present:
            values[i][j] = v / top
    return RadarTable([(r.storm, r.season) for r in rows], measures, values, column_max, argmax)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def summary_csv(rows: Sequence[StormMeasures]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in SUMMARY_COLUMNS])
    return out.getvalue()


def radar_csv(table: RadarTable) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("storm", "season") + table.measures)
    for (name, season), vals in zip(table.storms, table.values):
        w.writerow([name, season] + [_fmt(v) for v in vals])
    return out.getvalue()
