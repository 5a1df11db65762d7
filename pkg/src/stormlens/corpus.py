"""Daily n-gram counts and usage-rate series for storm-name patterns.

A usage rate is a gram's count on a day divided by the total count of all
grams of the same kind (1-grams or 2-grams) in the same corpus and language
on that day.  Two corpora are tracked: ``all`` (every tweet, retweets
included) and ``organic`` (originally authored tweets only).
"""

from __future__ import annotations

import datetime as dt
import io
import logging
import os
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

log = logging.getLogger(__name__)

_KEEP_LEADING = frozenset("#@")


class CorpusError(ValueError):
    pass


class CorpusKind(str, Enum):
    ALL = "all"
    ORGANIC = "organic"


class GramKind(Enum):
    UNIGRAM = 1
    BIGRAM = 2


class PatternKind(str, Enum):
    HASHTAG = "hashtag"
    BIGRAM = "bigram"


@dataclass(frozen=True)
class NgramCountRow:
    date: dt.date
    corpus_kind: CorpusKind
    language: str
    gram_kind: GramKind
    gram: str
    count: int
    day_total: int

    def __post_init__(self):
        if self.count < 0:
            raise CorpusError(f"negative count for {self.gram!r} on {self.date}")
        if self.day_total <= 0:
            raise CorpusError(f"day_total must be positive ({self.date}, {self.gram!r})")
        if self.count > self.day_total:
            raise CorpusError(
                f"count {self.count} exceeds day_total {self.day_total} "
                f"for {self.gram!r} on {self.date}"
            )


@dataclass(frozen=True)
class StormPattern:
    storm_name: str
    kind: PatternKind

    def __post_init__(self):
        name = self.storm_name
        if not name or any(ch.isspace() for ch in name):
            raise CorpusError(f"storm name must be one non-empty word, got {name!r}")
        object.__setattr__(self, "kind", PatternKind(self.kind))

    @property
    def gram(self) -> str:
        """The lowercase gram this pattern matches."""
        name = self.storm_name.casefold()
        if self.kind is PatternKind.HASHTAG:
            return "#hurricane" + name
        return "hurricane " + name

    @property
    def gram_kind(self) -> GramKind:
        return GramKind.UNIGRAM if self.kind is PatternKind.HASHTAG else GramKind.BIGRAM

    def __str__(self) -> str:
        return self.gram


@dataclass(frozen=True, eq=False)
class UsageRateSeries:
    """Daily usage rates over a contiguous window of days.

    ``rates[i]`` is the rate on ``start_date + i`` days; NaN marks a day with
    no day total (missing), which is different from a zero rate.
    """

    pattern: StormPattern
    corpus_kind: CorpusKind
    language: str
    start_date: dt.date
    rates: np.ndarray
    counts: np.ndarray
    day_totals: np.ndarray = field(repr=False)

    def __post_init__(self):
        rates = np.array(self.rates, dtype=float)
        counts = np.array(self.counts, dtype=np.int64)
        totals = np.array(self.day_totals, dtype=np.int64)
        if not (rates.shape == counts.shape == totals.shape) or rates.ndim != 1:
            raise CorpusError("rates, counts and day_totals must be 1-d and aligned")
        ok = ~np.isnan(rates)
        if np.any((rates[ok] < 0) | (rates[ok] > 1)):
            raise CorpusError("usage rates must lie in [0, 1]")
        for arr in (rates, counts, totals):
            arr.setflags(write=False)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "day_totals", totals)

    @classmethod
    def from_rates(
        cls,
        rates,
        pattern: StormPattern,
        start_date: dt.date,
        corpus_kind: CorpusKind = CorpusKind.ALL,
        language: str = "en",
    ) -> "UsageRateSeries":
        """Series from precomputed rates (no raw counts available)."""
        rates = np.asarray(rates, dtype=float)
        counts = np.zeros(rates.shape, dtype=np.int64)
        totals = np.where(np.isnan(rates), 0, 1).astype(np.int64)
        return cls(pattern, CorpusKind(corpus_kind), language, start_date, rates, counts, totals)

    def __len__(self) -> int:
        return len(self.rates)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.rates)

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self) - 1)

    def date_of(self, index: int) -> dt.date:
        return self.start_date + dt.timedelta(days=int(index))

    def filled(self) -> np.ndarray:
        """Rates with missing days set to zero."""
        return np.nan_to_num(self.rates, nan=0.0)

    def window(self, start: dt.date, days: int) -> "UsageRateSeries":
        """Re-index onto ``days`` days from ``start``; uncovered days are missing."""
        offset = (start - self.start_date).days
        rates = np.full(days, np.nan)
        counts = np.zeros(days, dtype=np.int64)
        totals = np.zeros(days, dtype=np.int64)
        lo, hi = max(offset, 0), min(offset + days, len(self))
        if lo < hi:
            rates[lo - offset:hi - offset] = self.rates[lo:hi]
            counts[lo - offset:hi - offset] = self.counts[lo:hi]
            totals[lo - offset:hi - offset] = self.day_totals[lo:hi]
        return UsageRateSeries(self.pattern, self.corpus_kind, self.language, start,
                               rates, counts, totals)


# --------------------------------------------------------------------------
# tokenization and ingestion


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS"


def tokenize_line(text: str) -> list[str]:
    """Lowercased whitespace tokens with edge punctuation stripped.

    A '#' or '@' directly in front of the token body survives, so
    ``"(#HurricaneIrma)!!"`` gives ``"#hurricaneirma"``.
    """
    tokens = []
    for raw in text.split():
        start, end = 0, len(raw)
        while end > start and _is_punct(raw[end - 1]):
            end -= 1
        while start < end and _is_punct(raw[start]):
            start += 1
        if start == end:
            continue
        body = raw[start:end].lower()
        if start > 0 and raw[start - 1] in _KEEP_LEADING:
            body = raw[start - 1] + body
        tokens.append(body)
    return tokens


def _bigrams(tokens: list[str]) -> list[str]:
    return [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]


class CountAccumulator:
    """Per-day gram counts keyed by (date, corpus, language, gram kind).

    Accumulators built over disjoint shards combine with :meth:`merge`, which
    is associative and commutative.
    """

    def __init__(self):
        self._counts: dict[tuple, Counter] = defaultdict(Counter)

    def add(self, day: dt.date, language: str, is_retweet: bool, tokens: list[str]):
        grams = {GramKind.UNIGRAM: tokens, GramKind.BIGRAM: _bigrams(tokens)}
        corpora = [CorpusKind.ALL] if is_retweet else [CorpusKind.ALL, CorpusKind.ORGANIC]
        for corpus in corpora:
            for kind, items in grams.items():
                if items:
                    self._counts[(day, corpus, language, kind)].update(items)

    def merge(self, other: "CountAccumulator") -> "CountAccumulator":
        out = CountAccumulator()
        for src in (self, other):
            for key, counter in src._counts.items():
                out._counts[key].update(counter)
        return out

    def rows(self) -> list[NgramCountRow]:
        out = []
        order = lambda k: (k[0], k[1].value, k[2], k[3].value)  # noqa: E731
        for key in sorted(self._counts, key=order):
            counter = self._counts[key]
            total = sum(counter.values())
            day, corpus, lang, kind = key
            for gram in sorted(counter):
                out.append(NgramCountRow(day, corpus, lang, kind, gram, counter[gram], total))
        return out


@dataclass
class IngestResult:
    rows: list[NgramCountRow]
    n_tweets: int = 0
    skipped: list[tuple[int, str]] = field(default_factory=list)


def _parse_instant(value) -> dt.datetime:
    if isinstance(value, dt.datetime):
        ts = value
    elif isinstance(value, (int, float)) and not isinstance(value, bool):
        return dt.datetime.fromtimestamp(value, tz=dt.timezone.utc)
    elif isinstance(value, str):
        s = value.strip()
        if s.endswith("Z"):
            s = s[:-1] + "+00:00"
        ts = dt.datetime.fromisoformat(s)
    else:
        raise ValueError(f"unsupported timestamp {value!r}")
    if ts.tzinfo is None:
        return ts.replace(tzinfo=dt.timezone.utc)
    return ts.astimezone(dt.timezone.utc)


def ingest_tweets(stream: Iterable[tuple]) -> IngestResult:
    """Count unigrams and adjacent-pair bigrams per UTC day.

    ``stream`` yields ``(timestamp, language, is_retweet, text)``.  Records
    whose timestamp does not parse are skipped and listed in
    ``IngestResult.skipped`` as ``(record_index, reason)``.
    """
    acc = CountAccumulator()
    skipped = []
    n = 0
    for i, (stamp, language, is_retweet, text) in enumerate(stream):
        try:
            ts = _parse_instant(stamp)
        except (ValueError, TypeError, OverflowError, OSError) as exc:
            skipped.append((i, f"bad timestamp {stamp!r}: {exc}"))
            continue
        acc.add(ts.date(), language, bool(is_retweet), tokenize_line(text))
        n += 1
    if skipped:
        log.warning("skipped %d of %d tweets with malformed timestamps", len(skipped), n + len(skipped))
    return IngestResult(acc.rows(), n, skipped)


# --------------------------------------------------------------------------
# pattern matching and usage series


def match_storm_pattern(gram: str, gram_kind: GramKind, pattern: StormPattern) -> bool:
    gram_kind = GramKind(gram_kind)
    if gram_kind is not pattern.gram_kind:
        raise CorpusError(
            f"{pattern.kind.value} pattern needs {pattern.gram_kind.name.lower()} grams, "
            f"got {gram_kind.name.lower()}"
        )
    return gram.casefold() == pattern.gram


class CountIndex:
    """Lookup tables over count rows for one corpus kind and language."""

    def __init__(self, rows: Iterable[NgramCountRow], corpus_kind: CorpusKind, language: str):
        self.corpus_kind = CorpusKind(corpus_kind)
        self.language = language
        self.day_totals: dict[GramKind, dict[dt.date, int]] = {k: {} for k in GramKind}
        self.grams: dict[tuple[GramKind, str], dict[dt.date, int]] = defaultdict(dict)
        for row in rows:
            if row.corpus_kind is not self.corpus_kind or row.language != language:
                continue
            totals = self.day_totals[row.gram_kind]
            seen = totals.setdefault(row.date, row.day_total)
            if seen != row.day_total:
                raise CorpusError(
                    f"inconsistent day_total on {row.date.isoformat()} "
                    f"({self.corpus_kind.value}/{language}/{row.gram_kind.value}-gram): "
                    f"{seen} vs {row.day_total}"
                )
            per_day = self.grams[(row.gram_kind, row.gram.casefold())]
            per_day[row.date] = per_day.get(row.date, 0) + row.count

    def has_gram(self, pattern: StormPattern) -> bool:
        return (pattern.gram_kind, pattern.gram) in self.grams

    def pattern_counts(self, pattern: StormPattern) -> Mapping[dt.date, int]:
        return self.grams.get((pattern.gram_kind, pattern.gram), {})

    def gram_rates(self, gram: str, gram_kind: GramKind, start: dt.date, end: dt.date) -> np.ndarray:
        """Daily rates of an arbitrary gram over ``start..end`` (NaN where missing)."""
        days = (end - start).days + 1
        totals_by_day = self.day_totals[gram_kind]
        hits = self.grams.get((gram_kind, gram.casefold()), {})
        rates = np.full(max(days, 0), np.nan)
        for i in range(len(rates)):
            day = start + dt.timedelta(days=i)
            if day in totals_by_day:
                rates[i] = hits.get(day, 0) / totals_by_day[day]
        return rates

    def series(self, pattern: StormPattern, start: dt.date, end: dt.date) -> UsageRateSeries:
        days = (end - start).days + 1
        if days <= 0:
            raise CorpusError(f"empty window {start}..{end}")
        totals_by_day = self.day_totals[pattern.gram_kind]
        hits = self.pattern_counts(pattern)
        rates = np.full(days, np.nan)
        counts = np.zeros(days, dtype=np.int64)
        totals = np.zeros(days, dtype=np.int64)
        for i in range(days):
            day = start + dt.timedelta(days=i)
            total = totals_by_day.get(day)
            if total is None:
                continue
            c = hits.get(day, 0)
            if c > total:
                raise CorpusError(f"matched count {c} exceeds day_total {total} on {day.isoformat()}")
            counts[i] = c
            totals[i] = total
            rates[i] = c / total
        return UsageRateSeries(pattern, self.corpus_kind, self.language, start, rates, counts, totals)


def build_usage_series(
    rows: Iterable[NgramCountRow],
    pattern: StormPattern,
    corpus_kind: CorpusKind,
    language: str,
    window: tuple[dt.date, dt.date],
) -> UsageRateSeries:
    """Usage-rate series of ``pattern`` over the inclusive date ``window``."""
    start, end = window
    return CountIndex(rows, corpus_kind, language).series(pattern, start, end)


# --------------------------------------------------------------------------
# counts file


def _iter_lines(source) -> Iterator[str]:
    if isinstance(source, (str, os.PathLike)) and not (isinstance(source, str) and "\n" in source):
        with open(source, encoding="utf-8") as fh:
            yield from fh
    elif isinstance(source, str):
        yield from io.StringIO(source)
    else:
        yield from source


def read_counts(source) -> list[NgramCountRow]:
    """Read a tab-separated counts file (path, text, or line iterable)."""
    rows = []
    for lineno, line in enumerate(_iter_lines(source), 1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 7:
            raise CorpusError(f"line {lineno}: expected 7 tab-separated fields, got {len(parts)}")
        date, corpus, lang, kind, gram, count, total = parts
        try:
            rows.append(NgramCountRow(
                dt.date.fromisoformat(date), CorpusKind(corpus), lang,
                GramKind(int(kind)), gram, int(count), int(total),
            ))
        except (ValueError, CorpusError) as exc:
            raise CorpusError(f"line {lineno}: {exc}") from exc
    return rows


def format_counts(rows: Iterable[NgramCountRow], header: bool = True) -> str:
    out = io.StringIO()
    if header:
        out.write("# date\tcorpus\tlang\tkind\tgram\tcount\tday_total\n")
    for r in rows:
        out.write(
            f"{r.date.isoformat()}\t{r.corpus_kind.value}\t{r.language}\t{r.gram_kind.value}"
            f"\t{r.gram}\t{r.count}\t{r.day_total}\n"
        )
    return out.getvalue()


def write_counts(path: str | Path, rows: Iterable[NgramCountRow]) -> Path:
    from ._io import atomic_write_text

    return atomic_write_text(path, format_counts(rows))
