"""Pipeline configuration loaded from JSON."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .decay import DecayConfig

DEFAULTS: dict[str, Any] = {
    "tweets": None,
    "counts": None,
    "hurdat2": None,
    "impacts": None,
    "output_dir": "stormlens-out",
    "window_days": 365,
    "language": "en",
    "corpus_kind": "all",
    "study_window": [2008, 2019],
    "storms": None,
    "seasons": None,
    "decay": {},
    "sampler": {"chains": 8, "draws": 2000, "burn_in": None, "seed": None},
    "regress": {"models": ["reg1", "reg2", "reg3", "per_category"], "dump_chains": False},
    "map": {"max_half_width_deg": 8.0},
}


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    base_dir: Path
    tweets: Path | None = None
    counts: Path | None = None
    hurdat2: Path | None = None
    impacts: Path | None = None
    output_dir: Path = Path("stormlens-out")
    window_days: int = 365
    language: str = "en"
    corpus_kind: str = "all"
    study_window: tuple[int, int] | None = (2008, 2019)
    storms: list[str] | None = None
    seasons: list[int] | None = None
    decay: DecayConfig = field(default_factory=DecayConfig)
    sampler: dict = field(default_factory=dict)
    regress: dict = field(default_factory=dict)
    map: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "PipelineConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(raw, path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path) -> "PipelineConfig":
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = {**DEFAULTS, **raw}
        for key in ("sampler", "regress", "map"):
            merged[key] = {**DEFAULTS[key], **raw.get(key, {})}

        def resolve(p):
            if p is None:
                return None
            p = Path(p)
            return p if p.is_absolute() else base_dir / p

        window = merged["study_window"]
        try:
            decay = DecayConfig.from_dict(merged["decay"])
        except TypeError as exc:
            raise ConfigError(f"bad decay settings: {exc}") from None
        return cls(
            base_dir=base_dir,
            tweets=resolve(merged["tweets"]),
            counts=resolve(merged["counts"]),
            hurdat2=resolve(merged["hurdat2"]),
            impacts=resolve(merged["impacts"]),
            output_dir=resolve(merged["output_dir"]),
            window_days=int(merged["window_days"]),
            language=merged["language"],
            corpus_kind=merged["corpus_kind"],
            study_window=tuple(window) if window else None,
            storms=merged["storms"],
            seasons=merged["seasons"],
            decay=decay,
            sampler=merged["sampler"],
            regress=merged["regress"],
            map=merged["map"],
        )

    def require(self, *names: str) -> list[Path]:
        """Paths for ``names``; each must be configured and exist."""
        out = []
        for name in names:
            p = getattr(self, name)
            if p is None:
                raise ConfigError(f"config does not set '{name}'")
            if not p.exists():
                raise ConfigError(f"{name} path does not exist: {p}")
            out.append(p)
        return out
