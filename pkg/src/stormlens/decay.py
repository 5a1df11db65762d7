"""Attention-decay model fits on the post-peak log usage rate.

Three models are fitted in log10 space:

* bi-exponential  S(t) = N/(p+r-q) * [(p-q) exp(-(p+r)t) + r exp(-qt)]
* exponential     S(t) = N exp(-pt)
* power law       S(t) = A (t+1)^(-alpha)

For the bi-exponential the amplitude enters log S additively, so it is
profiled out in closed form and only (p, q, r) are searched.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares

LN2 = math.log(2.0)
LN10 = math.log(10.0)


class DecayError(ValueError):
    pass


class DecayModel(str, Enum):
    BIEXPONENTIAL = "biexponential"
    EXPONENTIAL = "exponential"
    POWERLAW = "powerlaw"


MODEL_ORDER = (DecayModel.BIEXPONENTIAL, DecayModel.EXPONENTIAL, DecayModel.POWERLAW)


@dataclass(frozen=True)
class DecayConfig:
    p_bounds: tuple[float, float] = (1e-3, 10.0)
    q_bounds: tuple[float, float] = (1e-3, 1e-1)
    r_bounds: tuple[float, float] = (1e-3, 10.0)
    alpha_bounds: tuple[float, float] = (1e-6, 10.0)
    n_starts: int = 5
    seed_grid: int = 10
    min_consecutive_days: int = 6
    seed: int = 0

    @classmethod
    def from_dict(cls, d: Mapping) -> "DecayConfig":
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**kw)


@dataclass(frozen=True)
class DecayParams:
    model: DecayModel
    N: float | None = None
    p: float | None = None
    q: float | None = None
    r: float | None = None
    A: float | None = None
    alpha: float | None = None


@dataclass(frozen=True)
class DecayFit:
    params: DecayParams
    tau1: float | None
    tau2: float | None
    mse: float
    n_points: int
    success: bool = True
    message: str = field(default="", compare=False)

    @property
    def model(self) -> DecayModel:
        return self.params.model


# --------------------------------------------------------------------------
# segments


def _rates(series) -> np.ndarray:
    rates = getattr(series, "rates", series)
    return np.asarray(rates, dtype=float)


def decay_segment(series) -> tuple[np.ndarray, np.ndarray]:
    """Days since peak and log10 rate for positive days from the peak onward."""
    f = _rates(series)
    filled = np.nan_to_num(f, nan=0.0)
    if filled.size == 0 or not filled.max() > 0:
        raise DecayError("decay segment needs a positive maximum")
    peak = int(np.argmax(filled))
    tail = filled[peak:]
    keep = tail > 0
    t = np.flatnonzero(keep).astype(float)
    return t, np.log10(tail[keep])


def eligible_for_fit(series, min_consecutive_days: int = 6) -> bool:
    """True iff the series has a run of at least ``min_consecutive_days`` positive days."""
    f = np.nan_to_num(_rates(series), nan=0.0)
    run = best = 0
    for v in f:
        run = run + 1 if v > 0 else 0
        best = max(best, run)
    return best >= min_consecutive_days


# --------------------------------------------------------------------------
# model curves


def biexp_log_shape(t, p, q, r) -> np.ndarray:
    """Natural log of S(t)/N for the bi-exponential, stable near p+r = q.

    Uses S/N = exp(-(p+r)t) + r * (exp(-qt) - exp(-(p+r)t)) / (p+r-q); the
    divided difference is evaluated with expm1 and its t*exp(-qt) limit.
    """
    t = np.asarray(t, dtype=float)
    p, q, r = (np.asarray(v, dtype=float) for v in (p, q, r))
    a = p + r
    d = a - q
    dt_ = d * t
    small = np.abs(dt_) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(small, t * (1 - 0.5 * dt_), -np.expm1(-dt_) / np.where(d == 0, 1.0, d))
        log_phi = -q * t + np.log(ratio)
        log_second = np.log(r) + log_phi
    # t = 0: the transfer term vanishes, S(0) = N
    log_second = np.where(t == 0, -np.inf, log_second)
    return np.logaddexp(-a * t, log_second)


def model_log10(params: DecayParams, t) -> np.ndarray:
    """log10 S(t) for fitted parameters."""
    t = np.asarray(t, dtype=float)
    if params.model is DecayModel.BIEXPONENTIAL:
        return math.log10(params.N) + biexp_log_shape(t, params.p, params.q, params.r) / LN10
    if params.model is DecayModel.EXPONENTIAL:
        return math.log10(params.N) - params.p * t / LN10
    return math.log10(params.A) - params.alpha * np.log10(t + 1.0)


def half_lives(params: DecayParams) -> tuple[float | None, float | None]:
    """(tau1, tau2) in days; tau2 only for the bi-exponential, neither for the power law."""
    if params.model is DecayModel.BIEXPONENTIAL:
        return LN2 / (params.p + params.r), LN2 / params.q
    if params.model is DecayModel.EXPONENTIAL:
        return LN2 / params.p, None
    return None, None


# --------------------------------------------------------------------------
# fitting


def _profiled(y: np.ndarray, shape10: np.ndarray) -> tuple[float, np.ndarray]:
    """Best log10 amplitude and residuals for a fixed curve shape."""
    diff = y - shape10
    level = diff.mean(axis=-1, keepdims=True)
    return level, diff - level


def _fit_biexp(t, y, cfg: DecayConfig) -> DecayFit:
    bounds = np.log(np.array([cfg.p_bounds, cfg.q_bounds, cfg.r_bounds], dtype=float))
    lo, hi = bounds[:, 0], bounds[:, 1]

    def shape10(u):
        p, q, r = np.exp(u)
        return biexp_log_shape(t, p, q, r) / LN10

    def resid(u):
        return _profiled(y, shape10(u))[1]

    # coarse vectorized grid gives one start; the rest are log-spaced diagonals
    g = cfg.seed_grid
    axes = [np.linspace(lo[k], hi[k], g) for k in range(3)]
    P, Q, R = (np.exp(a).reshape(-1, 1) for a in np.meshgrid(*axes, indexing="ij"))
    grid_shapes = biexp_log_shape(t[None, :], P, Q, R) / LN10
    _, grid_res = _profiled(y[None, :], grid_shapes)
    grid_mse = np.mean(grid_res ** 2, axis=1)
    k = int(np.argmin(grid_mse))
    starts = [np.log(np.array([P[k, 0], Q[k, 0], R[k, 0]]))]
    rng = np.random.default_rng(cfg.seed)
    for i in range(cfg.n_starts):
        frac = (i + 0.5) / cfg.n_starts
        u = lo + frac * (hi - lo)
        u = u + rng.normal(scale=0.05, size=3) * (hi - lo)
        starts.append(np.clip(u, lo + 1e-9, hi - 1e-9))

    best = None
    for u0 in starts:
        u0 = np.clip(u0, lo + 1e-12, hi - 1e-12)
        res = least_squares(resid, u0, bounds=(lo, hi), method="trf", x_scale=1.0,
                            ftol=1e-15, xtol=1e-15, gtol=1e-15, max_nfev=2000)
        mse = float(np.mean(res.fun ** 2))
        if best is None or mse < best[0]:
            best = (mse, res)
    mse, res = best
    p, q, r = np.exp(res.x)
    level, _ = _profiled(y, shape10(res.x))
    params = DecayParams(DecayModel.BIEXPONENTIAL, N=float(10 ** level[0]), p=float(p), q=float(q), r=float(r))
    tau1, tau2 = half_lives(params)
    return DecayFit(params, tau1, tau2, mse, len(t), bool(res.success), res.message)


def _fit_line(x, y, slope_bounds) -> tuple[float, float]:
    """Least-squares ``y = b + m x`` with ``m`` clipped to ``slope_bounds``."""
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    m = float(((x - xm) * (y - ym)).sum() / sxx) if sxx > 0 else 0.0
    m = min(max(m, slope_bounds[0]), slope_bounds[1])
    return float(ym - m * xm), m


def _fit_exponential(t, y, cfg: DecayConfig) -> DecayFit:
    # log10 S = log10 N - (p / ln 10) t
    lo, hi = cfg.p_bounds
    b, m = _fit_line(t, y, (-hi / LN10, -lo / LN10))
    params = DecayParams(DecayModel.EXPONENTIAL, N=10 ** b, p=-m * LN10)
    mse = float(np.mean((y - (b + m * t)) ** 2))
    tau1, _ = half_lives(params)
    return DecayFit(params, tau1, None, mse, len(t))


def _fit_powerlaw(t, y, cfg: DecayConfig) -> DecayFit:
    x = np.log10(t + 1.0)
    lo, hi = cfg.alpha_bounds
    b, m = _fit_line(x, y, (-hi, -lo))
    params = DecayParams(DecayModel.POWERLAW, A=10 ** b, alpha=-m)
    mse = float(np.mean((y - (b + m * x)) ** 2))
    return DecayFit(params, None, None, mse, len(t))


def fit_decay(segment, model_kind: DecayModel | str = DecayModel.BIEXPONENTIAL,
              config: DecayConfig | None = None) -> DecayFit:
    """Fit one decay model to ``segment = (t, log10_rate)`` by least squares in log10 space."""
    cfg = config or DecayConfig()
    model = DecayModel(model_kind)
    t, y = (np.asarray(a, dtype=float) for a in segment)
    if t.shape != y.shape or t.ndim != 1:
        raise DecayError("segment must be two aligned 1-d arrays")
    need = 4 if model is DecayModel.BIEXPONENTIAL else 2
    if len(t) < need:
        raise DecayError(f"{model.value} fit needs at least {need} points, got {len(t)}")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise DecayError("segment contains non-finite values")
    if model is DecayModel.BIEXPONENTIAL:
        return _fit_biexp(t, y, cfg)
    if model is DecayModel.EXPONENTIAL:
        return _fit_exponential(t, y, cfg)
    return _fit_powerlaw(t, y, cfg)


@dataclass
class ModelComparison:
    rankings: dict[str, list[DecayModel]]
    mse: dict[DecayModel, list[float]]

    def mean_mse(self) -> dict[DecayModel, float]:
        return {m: float(np.mean(v)) for m, v in self.mse.items() if v}

    def overall_ranking(self) -> list[DecayModel]:
        means = self.mean_mse()
        return sorted(means, key=lambda m: (means[m], MODEL_ORDER.index(m)))


def compare_decay_models(fits: Mapping[str, Mapping[DecayModel, DecayFit]]) -> ModelComparison:
    """Rank models per storm by MSE and collect each model's MSE across storms.

    Equal MSEs keep the bi-exponential / exponential / power-law order.
    """
    rankings, table = {}, {m: [] for m in MODEL_ORDER}
    for storm, by_model in fits.items():
        models = [DecayModel(m) for m in by_model]
        rankings[storm] = sorted(models, key=lambda m: (by_model[m].mse, MODEL_ORDER.index(m)))
        for m in models:
            table[m].append(by_model[m].mse)
    return ModelComparison(rankings, {m: v for m, v in table.items() if v})


FIT_REPORT_COLUMNS = ("storm", "season", "pattern_kind", "model", "N", "p", "q", "r",
                      "tau1", "tau2", "mse", "n_points")


def _num(v) -> str:
    return "" if v is None else f"{v:.10g}"


def fit_report_csv(records: Sequence[tuple[str, int, str, DecayFit]]) -> str:
    """CSV rows for ``(storm, season, pattern_kind, fit)`` records."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(FIT_REPORT_COLUMNS)
    for storm, season, kind, fit in records:
        p = fit.params
        amp = p.N if p.N is not None else p.A
        w.writerow([storm, season, kind, p.model.value, _num(amp), _num(p.p if p.p is not None else p.alpha),
                    _num(p.q), _num(p.r), _num(fit.tau1), _num(fit.tau2), _num(fit.mse), fit.n_points])
    return out.getvalue()
