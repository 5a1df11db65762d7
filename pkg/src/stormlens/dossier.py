"""Storm impacts and the per-storm join of track, impacts and attention."""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import CorpusKind, CountIndex, NgramCountRow, PatternKind, StormPattern, UsageRateSeries
from .hurdat2 import StormTrack

IMPACT_COLUMNS = ("name", "season", "deaths", "damage_usd", "max_category")
TROPICAL_STORM = "TS"
DEFAULT_STUDY_WINDOW = (2008, 2019)


class DossierError(ValueError):
    pass


@dataclass(frozen=True)
class StormImpact:
    name: str
    season: int
    deaths: int | None = None
    damage_usd: float | None = None
    # 1..5, or "TS" for storms that never reached hurricane strength
    max_category: int | str | None = None

    def __post_init__(self):
        if self.deaths is not None and self.deaths < 0:
            raise DossierError(f"{self.key}: negative deaths")
        if self.damage_usd is not None and not (self.damage_usd >= 0 and math.isfinite(self.damage_usd)):
            raise DossierError(f"{self.key}: damage must be a non-negative finite number")
        cat = self.max_category
        if cat is not None and cat != TROPICAL_STORM and cat not in (1, 2, 3, 4, 5):
            raise DossierError(f"{self.key}: bad category {cat!r}")

    @property
    def key(self) -> tuple[str, int]:
        return self.name.casefold(), self.season

    @property
    def is_hurricane(self) -> bool:
        return isinstance(self.max_category, int)


def _opt(text: str, conv):
    text = text.strip()
    if not text or text.lower() == "nan":
        return None
    return conv(text)


def _category(text: str):
    text = text.strip()
    if not text:
        return None
    if text.upper() == TROPICAL_STORM:
        return TROPICAL_STORM
    return int(text)


def parse_impacts(text: str, study_window: tuple[int, int] | None = DEFAULT_STUDY_WINDOW) -> list[StormImpact]:
    """Parse the impacts CSV; blank deaths/damage/category are unknown."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return []
    missing = [c for c in IMPACT_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise DossierError(f"impacts CSV lacks columns {missing}")
    out: list[StormImpact] = []
    seen = set()
    for lineno, row in enumerate(reader, 2):
        try:
            impact = StormImpact(
                name=row["name"].strip(),
                season=int(row["season"]),
                deaths=_opt(row["deaths"], lambda s: int(float(s))),
                damage_usd=_opt(row["damage_usd"], float),
                max_category=_category(row["max_category"] or ""),
            )
        except (ValueError, TypeError) as exc:
            raise DossierError(f"impacts line {lineno}: {exc}") from exc
        if impact.key in seen:
            raise DossierError(f"impacts line {lineno}: duplicate storm {impact.name} {impact.season}")
        if study_window and not (study_window[0] <= impact.season <= study_window[1]):
            raise DossierError(
                f"impacts line {lineno}: season {impact.season} outside study window {study_window}"
            )
        seen.add(impact.key)
        out.append(impact)
    return out


def read_impacts(path, study_window=DEFAULT_STUDY_WINDOW) -> list[StormImpact]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_impacts(fh.read(), study_window)


class SeriesStore:
    """Resolves storm patterns to usage series from one corpus and language."""

    def __init__(self, rows: Iterable[NgramCountRow], corpus_kind=CorpusKind.ALL, language: str = "en"):
        self.index = CountIndex(rows, corpus_kind, language)

    def first_active(self, pattern: StormPattern, season: int) -> dt.date | None:
        days = [d for d, c in self.index.pattern_counts(pattern).items() if c > 0 and d.year == season]
        return min(days) if days else None

    def covers(self, pattern: StormPattern, start: dt.date, days: int) -> bool:
        totals = self.index.day_totals[pattern.gram_kind]
        end = start + dt.timedelta(days=days)
        return any(start <= d < end for d in totals)

    def series(self, pattern: StormPattern, start: dt.date, days: int) -> UsageRateSeries:
        return self.index.series(pattern, start, start + dt.timedelta(days=days - 1))


@dataclass(frozen=True)
class StormDossier:
    impact: StormImpact
    track: StormTrack | None
    hashtag_series: UsageRateSeries
    bigram_series: UsageRateSeries
    window_start: dt.date
    window_days: int = 365

    def __post_init__(self):
        for s in (self.hashtag_series, self.bigram_series):
            if s.start_date != self.window_start or len(s) > self.window_days:
                raise DossierError(f"{self.name}: series not aligned to the {self.window_days}-day window")

    @property
    def name(self) -> str:
        return self.impact.name

    @property
    def season(self) -> int:
        return self.impact.season

    def series(self, kind: PatternKind | str) -> UsageRateSeries:
        return self.hashtag_series if PatternKind(kind) is PatternKind.HASHTAG else self.bigram_series


def find_track(impact: StormImpact, tracks: Sequence[StormTrack]) -> StormTrack | None:
    name = impact.name.casefold()
    for t in tracks:
        if t.name.casefold() == name and t.season == impact.season:
            return t
    return None


def assemble_dossier(impact: StormImpact, tracks: Sequence[StormTrack], series_store: SeriesStore,
                     window_days: int = 365) -> StormDossier:
    """Join one storm's track, impacts and attention series.

    The window opens on the date of the first best-track fix when a track
    matches (name, season), otherwise on the first day of nonzero usage.
    """
    patterns = [StormPattern(impact.name, PatternKind.HASHTAG), StormPattern(impact.name, PatternKind.BIGRAM)]
    track = find_track(impact, tracks)
    if track is not None:
        start = track.start.date()
    else:
        firsts = [d for d in (series_store.first_active(p, impact.season) for p in patterns) if d]
        if not firsts:
            raise DossierError(
                f"{impact.name} {impact.season}: no track and no usage for patterns "
                + ", ".join(repr(p.gram) for p in patterns)
            )
        start = min(firsts)
    if not any(series_store.covers(p, start, window_days) for p in patterns):
        raise DossierError(
            f"{impact.name} {impact.season}: no series found for patterns "
            + ", ".join(repr(p.gram) for p in patterns)
            + f" in the {window_days} days from {start.isoformat()}"
        )
    hashtag, bigram = (series_store.series(p, start, window_days) for p in patterns)
    return StormDossier(impact, track, hashtag, bigram, start, window_days)


@dataclass
class JoinResult:
    dossiers: list[StormDossier] = field(default_factory=list)
    errors: list[tuple[StormImpact, str]] = field(default_factory=list)


def assemble_all(impacts: Iterable[StormImpact], tracks: Sequence[StormTrack], series_store: SeriesStore,
                 window_days: int = 365) -> JoinResult:
    """Assemble every impact; failures are collected, never dropped."""
    result = JoinResult()
    for impact in impacts:
        try:
            result.dossiers.append(assemble_dossier(impact, tracks, series_store, window_days))
        except DossierError as exc:
            result.errors.append((impact, str(exc)))
    return result
