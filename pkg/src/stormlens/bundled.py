"""Bundled reference data: the 26-storm comparison table, the Maria stand-in
series and a small synthetic season for end-to-end runs."""

from __future__ import annotations

import csv
import datetime as dt
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .corpus import CorpusKind, PatternKind, StormPattern, UsageRateSeries
from .dossier import TROPICAL_STORM


def data_path(*parts: str) -> Path:
    """Filesystem path of a bundled data file."""
    return Path(str(resources.files("stormlens").joinpath("data", *parts)))


def synthetic_season_dir() -> Path:
    return data_path("synthetic")


def _num(text: str) -> float | None:
    v = float(text)
    return None if math.isnan(v) else v


def hurricane_compare() -> list[dict]:
    """Rows of the 26-storm comparison table as plain records.

    Keys: name, season, integrated, max_rate, deaths, damage_usd, q99_days,
    q90_days, max_category.  Absent damage is ``None``.
    """
    with open(data_path("hurricane_compare.csv"), newline="", encoding="utf-8") as fh:
        rows = []
        for r in csv.DictReader(fh):
            cat = r["max_category"]
            rows.append({
                "name": r["name"],
                "season": int(r["season"]),
                "integrated": float(r["integrated"]),
                "max_rate": float(r["max_rate"]),
                "deaths": int(r["deaths"]),
                "damage_usd": _num(r["damage_usd"]),
                "q99_days": int(r["q99_days"]),
                "q90_days": int(r["q90_days"]),
                "max_category": cat if cat == TROPICAL_STORM else int(cat),
            })
    return rows


def maria_standin() -> tuple[UsageRateSeries, dict]:
    """Maria 2017 hashtag stand-in series and the metadata in its header."""
    meta, rates = {}, []
    with open(data_path("maria_2017_hashtag_standin.csv"), encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                for item in line[1:].split():
                    if "=" in item:
                        k, v = item.split("=", 1)
                        meta[k] = v
            elif line[0].isdigit():
                rates.append(float(line.split(",")[1]))
    start = dt.date.fromisoformat(meta.pop("start_date"))
    meta = {k: (int(v) if k.endswith("_days") else float(v)) for k, v in meta.items()}
    series = UsageRateSeries.from_rates(np.array(rates), StormPattern("Maria", PatternKind.HASHTAG), start,
                                        CorpusKind.ALL, "en")
    return series, meta
