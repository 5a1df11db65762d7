"""Command-line pipeline: ``stormlens <cmd> --config <path>``.

Commands:
  ingest     raw tweets (JSON lines) -> n-gram counts file
  metrics    per-storm attention summary CSVs
  fit-decay  decay model fit report CSV
  regress    posterior summary CSV per regression model
  map        attention-envelope GeoJSON per season
  report     everything above plus the radar table and attention-share series

The config is a JSON object.  Keys and defaults:
  tweets        raw tweets, one JSON object per line (ingest only)
  counts        n-gram counts TSV
  hurdat2       HURDAT2 best-track file
  impacts       storm impacts CSV (name,season,deaths,damage_usd,max_category)
  output_dir    "stormlens-out"
  window_days   365
  language      "en"
  corpus_kind   "all" | "organic"
  study_window  [2008, 2019]
  storms        list of storm names to keep (null keeps all)
  seasons       list of seasons to keep (null keeps all)
  decay         {"min_consecutive_days": 6, "p_bounds": [0.001, 10], ...}
  sampler       {"chains": 8, "draws": 2000, "burn_in": null, "seed": null}
  regress       {"models": ["reg1", "reg2", "reg3", "per_category"], "dump_chains": false}
  map           {"max_half_width_deg": 8.0}
Relative paths are resolved against the config file's directory.  A seed
(config ``sampler.seed`` or ``--seed``) is required by fit-decay, regress
and report.  Set STORMLENS_LOG (e.g. DEBUG, INFO) for log output.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from ._io import atomic_write_text
from .bayes import (BayesError, ModelKind, RegressionSpec, build_design, dump_chains, sample_posterior,
                    summarize_posterior)
from .bayes.model import SamplerConfig
from .config import ConfigError, PipelineConfig
from .corpus import CorpusError, CorpusKind, GramKind, PatternKind, format_counts, ingest_tweets, read_counts
from .decay import (MODEL_ORDER, DecayError, compare_decay_models, decay_segment, eligible_for_fit, fit_decay,
                    fit_report_csv)
from .dossier import DossierError, SeriesStore, assemble_all, read_impacts
from .hurdat2 import Hurdat2Error, read_hurdat2
from .mapgen import build_envelope, emit_geojson, scale_for_batch, smooth_rates
from .metrics import MetricsError, attention_share, radar_csv, radar_table, storm_measures, summary_csv

log = logging.getLogger("stormlens")

COMMANDS = ("ingest", "metrics", "fit-decay", "regress", "map", "report")
PER_CATEGORY_GROUPS = ("TS", 1, 2, 3, 4, 5, "all")
SHARE_UNIGRAM = "hurricane"

EXIT_USAGE = 2
EXIT_FAILURE = 1


class PipelineError(RuntimeError):
    pass


class Artifacts:
    """Artifacts staged in memory and written only once a command succeeds."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def commit(self) -> list[Path]:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name in sorted(self.files):
            written.append(atomic_write_text(self.out_dir / name, self.files[name]))
        return written


# --------------------------------------------------------------------------
# shared loading


def _load_dossiers(cfg: PipelineConfig):
    counts, hurdat2, impacts = cfg.require("counts", "hurdat2", "impacts")
    rows = read_counts(counts)
    tracks = read_hurdat2(hurdat2)
    storms = read_impacts(impacts, cfg.study_window)
    if cfg.storms is not None:
        keep = {s.casefold() for s in cfg.storms}
        storms = [s for s in storms if s.name.casefold() in keep]
    if cfg.seasons is not None:
        storms = [s for s in storms if s.season in set(cfg.seasons)]
    store = SeriesStore(rows, CorpusKind(cfg.corpus_kind), cfg.language)
    joined = assemble_all(storms, tracks, store, cfg.window_days)
    for impact, msg in joined.errors:
        log.warning("skipping %s %s: %s", impact.name, impact.season, msg)
    if not joined.dossiers:
        raise PipelineError("no storm could be joined to a track and a usage series")
    return joined, tracks, store


def _join_errors_csv(joined) -> str:
    lines = ["storm,season,error"]
    for impact, msg in joined.errors:
        lines.append(f"{impact.name},{impact.season},\"{msg.replace(chr(34), chr(39))}\"")
    return "\n".join(lines) + "\n"


def _seed(cfg: PipelineConfig, args) -> int:
    seed = args.seed if args.seed is not None else cfg.sampler.get("seed")
    if seed is None:
        raise ConfigError(f"'{args.command}' needs a seed: set sampler.seed in the config or pass --seed")
    return int(seed)


# --------------------------------------------------------------------------
# commands


def _tweets(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                yield obj["timestamp"], obj.get("lang", ""), bool(obj.get("retweet", False)), obj["text"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                log.warning("%s:%d: skipping unreadable tweet (%s)", path, lineno, exc)


def cmd_ingest(cfg: PipelineConfig, args, out: Artifacts):
    (tweets,) = cfg.require("tweets")
    result = ingest_tweets(_tweets(tweets))
    if result.skipped:
        log.warning("skipped %d tweets with unreadable timestamps", len(result.skipped))
    out.add("counts.tsv", format_counts(result.rows))
    log.info("ingested %d tweets into %d count rows", result.n_tweets, len(result.rows))


def cmd_metrics(cfg: PipelineConfig, args, out: Artifacts, joined=None):
    if joined is None:
        joined, _, _ = _load_dossiers(cfg)
    for kind in PatternKind:
        rows = [storm_measures(d, kind) for d in joined.dossiers]
        out.add(f"attention_summary_{kind.value}.csv", summary_csv(rows))
    out.add("join_errors.csv", _join_errors_csv(joined))
    return joined


def _fit_one(job):
    name, season, kind, series, decay_cfg = job
    if not eligible_for_fit(series, decay_cfg.min_consecutive_days):
        return name, season, kind, None
    segment = decay_segment(series)
    return name, season, kind, {m: fit_decay(segment, m, decay_cfg) for m in MODEL_ORDER}


def _pool_map(fn, jobs, n_jobs):
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def cmd_fit_decay(cfg: PipelineConfig, args, out: Artifacts, joined=None):
    seed = _seed(cfg, args)
    if joined is None:
        joined, _, _ = _load_dossiers(cfg)
    decay_cfg = replace(cfg.decay, seed=seed)
    jobs = [(d.name, d.season, kind.value, d.series(kind), decay_cfg)
            for d in joined.dossiers for kind in PatternKind]
    records, by_storm, skipped = [], {}, []
    for name, season, kind, fits in _pool_map(_fit_one, jobs, args.jobs):
        if fits is None:
            skipped.append(f"{name} {season} {kind}")
            continue
        for m in MODEL_ORDER:
            records.append((name, season, kind, fits[m]))
        by_storm[f"{name} {season} {kind}"] = fits
    if skipped:
        log.info("too few consecutive positive days to fit: %s", "; ".join(skipped))
    out.add("decay_fits.csv", fit_report_csv(records))
    comparison = compare_decay_models(by_storm)
    means = comparison.mean_mse()
    lines = ["model,mean_mse,n_fits,rank"]
    for rank, m in enumerate(comparison.overall_ranking(), 1):
        lines.append(f"{m.value},{means[m]:.10g},{len(comparison.mse[m])},{rank}")
    out.add("decay_model_comparison.csv", "\n".join(lines) + "\n")
    return joined


def _regression_specs(cfg: PipelineConfig, sampler: SamplerConfig) -> list[RegressionSpec]:
    specs = []
    for name in cfg.regress.get("models", ()):
        if name == ModelKind.PER_CATEGORY.value:
            specs += [RegressionSpec(ModelKind.PER_CATEGORY, impact=impact, category=cat, sampler=sampler)
                      for impact in ("deaths", "damage") for cat in PER_CATEGORY_GROUPS]
        else:
            try:
                specs.append(RegressionSpec(ModelKind(name), sampler=sampler))
            except ValueError:
                raise ConfigError(f"unknown regression model {name!r}") from None
    return specs


def cmd_regress(cfg: PipelineConfig, args, out: Artifacts, joined=None):
    seed = _seed(cfg, args)
    if joined is None:
        joined, _, _ = _load_dossiers(cfg)
    s = cfg.sampler
    sampler = SamplerConfig(chains=int(s["chains"]), draws=int(s["draws"]), burn_in=s.get("burn_in"),
                            seed=seed, jobs=args.jobs)
    skipped = []
    for spec in _regression_specs(cfg, sampler):
        try:
            data = build_design(joined.dossiers, spec)
        except BayesError as exc:
            skipped.append(f"{spec.label},\"{exc}\"")
            log.info("skipping %s", exc)
            continue
        for label, why in data.dropped:
            log.info("%s: dropped %s (%s)", spec.label, label, why)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            samples = sample_posterior(spec, data)
        for w in samples.warnings:
            log.warning(w)
        out.add(f"posterior_{spec.label}.csv", summarize_posterior(samples).to_csv())
        if cfg.regress.get("dump_chains"):
            for c, text in dump_chains(samples).items():
                out.add(f"chains/{spec.label}_chain{c}.csv", text)
    out.add("regress_skipped.csv", "\n".join(["model,reason"] + skipped) + "\n")
    return joined


def cmd_map(cfg: PipelineConfig, args, out: Artifacts, joined=None):
    if joined is None:
        joined, _, _ = _load_dossiers(cfg)
    with_track = [d for d in joined.dossiers if d.track is not None and len(d.track.points) >= 2]
    if not with_track:
        raise PipelineError("no joined storm has a track to map")
    smoothed = {}
    for d in with_track:
        series = d.series(PatternKind.HASHTAG)
        smoothed[d.impact.key] = smooth_rates(series, [p.timestamp for p in d.track.points])
    max_deg = args.scale_max_degrees if args.scale_max_degrees is not None else cfg.map["max_half_width_deg"]
    # one k for every season in the batch keeps maps comparable across years
    k = scale_for_batch(list(smoothed.values()), max_deg)
    for season in sorted({d.season for d in with_track}):
        batch = [d for d in with_track if d.season == season]
        envs = [build_envelope(d.track, smoothed[d.impact.key], k) for d in batch]
        doc = emit_geojson(envs, [d.track for d in batch], season)
        out.add(f"attention_map_{season}.geojson", json.dumps(doc, indent=1) + "\n")
    return joined


def _share_csv(dossier, store: SeriesStore) -> str:
    bigram = dossier.series(PatternKind.BIGRAM)
    start, days = dossier.window_start, len(bigram)
    uni = store.index.gram_rates(SHARE_UNIGRAM, GramKind.UNIGRAM, start, start + dt.timedelta(days=days - 1))
    share = attention_share(bigram, uni)
    lines = ["date,bigram_rate,unigram_rate,share"]
    for i in range(days):
        b, u = bigram.rates[i], uni[i]
        vals = ["" if v != v else f"{v:.10g}" for v in (b, u, share[i])]
        lines.append(",".join([(start + dt.timedelta(days=i)).isoformat()] + vals))
    return "\n".join(lines) + "\n"


def cmd_report(cfg: PipelineConfig, args, out: Artifacts):
    joined, _, store = _load_dossiers(cfg)
    cmd_metrics(cfg, args, out, joined)
    cmd_fit_decay(cfg, args, out, joined)
    cmd_regress(cfg, args, out, joined)
    cmd_map(cfg, args, out, joined)
    rows = [storm_measures(d, PatternKind.HASHTAG) for d in joined.dossiers]
    out.add("radar_table.csv", radar_csv(radar_table(rows)))
    for d in joined.dossiers:
        out.add(f"attention_share/{d.name.lower()}_{d.season}.csv", _share_csv(d, store))


HANDLERS = {
    "ingest": cmd_ingest,
    "metrics": cmd_metrics,
    "fit-decay": cmd_fit_decay,
    "regress": cmd_regress,
    "map": cmd_map,
    "report": cmd_report,
}

EXPECTED_ERRORS = (ConfigError, PipelineError, CorpusError, Hurdat2Error, DossierError, MetricsError,
                   DecayError, BayesError, OSError)


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stormlens",
        description=__doc__.split("\n\n", 1)[1],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=COMMANDS, help="pipeline stage to run")
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker processes for per-storm and per-chain work (default: logical cores)")
    parser.add_argument("--seed", type=int, default=None, help="overrides sampler.seed from the config")
    parser.add_argument("--scale-max-degrees", type=float, default=None,
                        help="envelope half-width (deg) of the batch's largest smoothed rate (default 8)")
    parser.add_argument("--version", action="version", version=f"stormlens {__version__}")
    return parser


def _configure_logging():
    level = os.environ.get("STORMLENS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(command: str | None, exc: BaseException, code: int) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "command": command}
    print(json.dumps(err), file=sys.stderr)
    return code


def run_pipeline(config: str | os.PathLike, command: str, jobs: int = 1, seed: int | None = None,
                 scale_max_degrees: float | None = None) -> list[Path]:
    """Run ``command`` with the config at ``config``; returns the artifacts written."""
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    if jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    cfg = PipelineConfig.load(config)
    args = argparse.Namespace(command=command, jobs=jobs, seed=seed, scale_max_degrees=scale_max_degrees)
    out = Artifacts(cfg.output_dir)
    HANDLERS[command](cfg, args, out)
    return out.commit()


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        written = run_pipeline(args.config, args.command, args.jobs, args.seed, args.scale_max_degrees)
    except ConfigError as exc:
        return _fail(args.command, exc, EXIT_USAGE)
    except EXPECTED_ERRORS as exc:
        return _fail(args.command, exc, EXIT_FAILURE)
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
