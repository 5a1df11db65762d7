"""Log-log attention/impact regressions: designs, priors and log posteriors.

All models share the likelihood ``log10(I + 1e-8) ~ normal(X a, sigma)``.
``sigma`` (and the per-category intercept precision ``tau``) are sampled on
the log scale; the log posterior includes the matching Jacobian terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Sequence

import numpy as np

I_OFFSET = 1e-8
DEATH_OFFSET = 0.1
DAMAGE_OFFSET = 1e4
LOG_2PI = math.log(2 * math.pi)
MAX_LOG_SCALE = 300.0  # exp() of a log-scale parameter beyond this overflows its square


class BayesError(ValueError):
    pass


class ModelKind(str, Enum):
    PER_CATEGORY = "per_category"
    REG1 = "reg1"
    REG2 = "reg2"
    REG3 = "reg3"


@dataclass(frozen=True)
class Normal:
    mean: float
    sd: float

    def logpdf(self, x: float) -> float:
        z = (x - self.mean) / self.sd
        return -0.5 * z * z - math.log(self.sd) - 0.5 * LOG_2PI

    def dlogpdf(self, x: float) -> float:
        return -(x - self.mean) / (self.sd * self.sd)


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 8
    draws: int = 2000
    burn_in: int | None = None  # None: 1000 per-category, 500 for regressions 1-3
    seed: int = 0
    target_accept: float = 0.8
    max_tree_depth: int = 10
    dense_metric: bool = True
    jobs: int = 1


@dataclass(frozen=True)
class RegressionSpec:
    model: ModelKind
    impact: str | None = None  # "deaths" or "damage" (per-category only)
    category: Any = None  # "TS", 1..5 or "all" (per-category only)
    priors: dict[str, Normal] = field(default_factory=dict)
    intercept_mean: float = -8.0
    tau_shape: float = 3.0
    tau_rate: float = 1.0
    sigma_scale: float = 5.0
    fixed_sigma: float | None = None
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def __post_init__(self):
        object.__setattr__(self, "model", ModelKind(self.model))
        if self.model is ModelKind.PER_CATEGORY and self.impact not in ("deaths", "damage"):
            raise BayesError("per-category model needs impact 'deaths' or 'damage'")

    @property
    def label(self) -> str:
        if self.model is ModelKind.PER_CATEGORY:
            return f"per_category_{self.impact}_{self.category}"
        return self.model.value

    @property
    def coefficients(self) -> tuple[str, ...]:
        if self.model is ModelKind.PER_CATEGORY:
            return ("a0", "a1")
        names = ("a0", "a_death", "a_damage")
        if self.model in (ModelKind.REG2, ModelKind.REG3):
            names += ("a_dD",)
        if self.model is ModelKind.REG3:
            names += ("a_C2", "a_C3", "a_C4", "a_C5")
        return names

    @property
    def hierarchical(self) -> bool:
        return self.model is ModelKind.PER_CATEGORY

    @property
    def param_names(self) -> tuple[str, ...]:
        """Names of the reported (constrained) parameters in sampling order."""
        names = self.coefficients
        if self.hierarchical:
            names += ("tau",)
        if self.fixed_sigma is None:
            names += ("sigma",)
        return names

    @property
    def dim(self) -> int:
        return len(self.param_names)

    def burn_in(self) -> int:
        if self.sampler.burn_in is not None:
            return self.sampler.burn_in
        return 1000 if self.hierarchical else 500

    def prior(self, name: str) -> Normal:
        if name in self.priors:
            return self.priors[name]
        if name == "a0":
            return Normal(self.intercept_mean, 3.0)
        return Normal(0.0, 1.0)

    def with_sampler(self, **kw) -> "RegressionSpec":
        return replace(self, sampler=replace(self.sampler, **kw))


def regression_spec(name: str, **kw) -> RegressionSpec:
    """Spec from a label such as ``reg1`` or ``per_category:deaths:4``."""
    if name.startswith("per_category"):
        _, impact, cat = name.split(":")
        cat = cat if cat in ("TS", "all") else int(cat)
        return RegressionSpec(ModelKind.PER_CATEGORY, impact=impact, category=cat, **kw)
    return RegressionSpec(ModelKind(name), **kw)


@dataclass(frozen=True, eq=False)
class RegressionData:
    y: np.ndarray
    X: np.ndarray
    columns: tuple[str, ...]
    labels: tuple[str, ...] = ()
    dropped: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        X = np.asarray(self.X, dtype=float).reshape(len(y), len(self.columns))
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise BayesError("regression data must be finite")
        for j, c in enumerate(self.columns):
            if c.startswith("a_C") and not np.all((X[:, j] == 0) | (X[:, j] == 1)):
                raise BayesError(f"indicator column {c} must be 0/1")
        if "a_C1" in self.columns:
            raise BayesError("category 1 is the baseline and has no indicator column")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return len(self.y)


def _get(record, name, default=None):
    if isinstance(record, dict):
        return record.get(name, default)
    return getattr(record, name, default)


def _record_fields(record) -> dict:
    """Flatten a dossier or a plain record into the fields the designs need."""
    if hasattr(record, "impact") and hasattr(record, "hashtag_series"):
        from ..metrics import integrated_usage

        imp = record.impact
        return dict(name=imp.name, season=imp.season, deaths=imp.deaths, damage_usd=imp.damage_usd,
                    max_category=imp.max_category,
                    integrated=integrated_usage(record.hashtag_series, record.window_days))
    return dict(name=_get(record, "name", _get(record, "storm")), season=_get(record, "season"),
                deaths=_get(record, "deaths"), damage_usd=_get(record, "damage_usd"),
                max_category=_get(record, "max_category"), integrated=_get(record, "integrated"))


def _missing(v) -> bool:
    return v is None or (isinstance(v, float) and math.isnan(v))


def build_design(records: Iterable, spec: RegressionSpec) -> RegressionData:
    """Design matrix for ``spec`` from dossiers or flat storm records.

    Regressions 1-3 drop tropical storms; per-category models keep only
    their category (``"all"`` keeps every hurricane).  Rows with an absent
    impact are dropped and reported in ``RegressionData.dropped``.
    """
    ys, rows, labels, dropped = [], [], [], []
    for rec in records:
        r = _record_fields(rec)
        label = f"{r['name']} {r['season']}"
        cat = r["max_category"]
        if spec.model is ModelKind.PER_CATEGORY:
            if spec.category == "all":
                if not isinstance(cat, int):
                    continue
            elif cat != spec.category:
                continue
            needed = ("deaths",) if spec.impact == "deaths" else ("damage_usd",)
        else:
            if not isinstance(cat, int):
                if cat is not None:
                    continue
                if spec.model is ModelKind.REG3:
                    dropped.append((label, "unknown category"))
                    continue
            needed = ("deaths", "damage_usd")
        absent = [k for k in needed + ("integrated",) if _missing(r[k])]
        if absent:
            dropped.append((label, "missing " + ", ".join(absent)))
            continue
        y = math.log10(r["integrated"] + I_OFFSET)
        if spec.model is ModelKind.PER_CATEGORY:
            x = (math.log10(r["deaths"] + DEATH_OFFSET) if spec.impact == "deaths"
                 else math.log10(r["damage_usd"] + DAMAGE_OFFSET))
            row = [1.0, x]
        else:
            xd = math.log10(r["deaths"] + DEATH_OFFSET)
            xD = math.log10(r["damage_usd"] + DAMAGE_OFFSET)
            row = [1.0, xd, xD]
            if spec.model in (ModelKind.REG2, ModelKind.REG3):
                row.append(xd * xD)
            if spec.model is ModelKind.REG3:
                row += [1.0 if cat == j else 0.0 for j in (2, 3, 4, 5)]
        ys.append(y)
        rows.append(row)
        labels.append(label)
    if len(ys) < 3:
        raise BayesError(f"{spec.label}: only {len(ys)} usable rows, need at least 3")
    return RegressionData(np.array(ys), np.array(rows), spec.coefficients, tuple(labels), tuple(dropped))


# --------------------------------------------------------------------------
# log posterior


def initial_point(spec: RegressionSpec) -> np.ndarray:
    """Prior means on the sampling scale."""
    theta = [spec.prior(c).mean for c in spec.coefficients]
    if spec.hierarchical:
        theta.append(math.log(spec.tau_shape / spec.tau_rate))
    if spec.fixed_sigma is None:
        theta.append(math.log(spec.sigma_scale * math.sqrt(2 / math.pi)))
    return np.array(theta)


def constrain(spec: RegressionSpec, theta: np.ndarray) -> np.ndarray:
    """Map sampling-scale parameters (log tau, log sigma) to reported values."""
    out = np.array(theta, dtype=float, copy=True)
    k = len(spec.coefficients)
    out[..., k:] = np.exp(out[..., k:])
    return out


def log_posterior_grad(params, data: RegressionData, spec: RegressionSpec) -> tuple[float, np.ndarray]:
    """Log posterior density (normalized priors and likelihood) and its gradient.

    ``params`` are on the sampling scale: coefficients, then ``log tau`` for
    the per-category model, then ``log sigma`` unless sigma is fixed.
    """
    theta = np.asarray(params, dtype=float)
    k = len(spec.coefficients)
    if theta.shape != (spec.dim,):
        raise BayesError(f"{spec.label}: expected {spec.dim} parameters, got {theta.shape}")
    a = theta[:k]
    grad = np.zeros_like(theta)
    pos = k
    if not np.all(np.isfinite(theta)):
        names = [spec.param_names[i] for i in np.flatnonzero(~np.isfinite(theta))]
        raise BayesError(f"{spec.label}: non-finite value for {', '.join(names)}")
    if spec.hierarchical:
        log_tau = theta[pos]
        tau_pos = pos
        if log_tau > MAX_LOG_SCALE:
            raise BayesError(f"{spec.label}: non-finite log density, tau overflows (log tau = {log_tau:.3g})")
        pos += 1
    if spec.fixed_sigma is None:
        log_sigma = theta[pos]
        if abs(log_sigma) > MAX_LOG_SCALE:
            raise BayesError(f"{spec.label}: non-finite log density, sigma out of range (log sigma = {log_sigma:.3g})")
        sigma = math.exp(log_sigma)
    else:
        sigma = spec.fixed_sigma
        log_sigma = math.log(sigma)

    # likelihood
    n = data.n
    inv_var = 1.0 / (sigma * sigma)
    if n:
        resid = data.y - data.X @ a
        ss = float(resid @ resid)
        grad[:k] = data.X.T @ resid * inv_var
    else:
        ss = 0.0
    lp = -n * log_sigma - 0.5 * n * LOG_2PI - 0.5 * ss * inv_var

    # coefficient priors
    for j, name in enumerate(spec.coefficients):
        if spec.hierarchical and name == "a0":
            tau = math.exp(log_tau)
            dev = a[j] - spec.intercept_mean
            lp += 0.5 * log_tau - 0.5 * LOG_2PI - 0.5 * tau * dev * dev
            grad[j] += -tau * dev
            # gamma(shape, rate) on tau, plus log-Jacobian of tau = exp(log_tau)
            lp += (spec.tau_shape * math.log(spec.tau_rate) - math.lgamma(spec.tau_shape)
                   + spec.tau_shape * log_tau - spec.tau_rate * tau)
            grad[tau_pos] += 0.5 - 0.5 * tau * dev * dev + spec.tau_shape - spec.tau_rate * tau
        else:
            prior = spec.prior(name)
            lp += prior.logpdf(a[j])
            grad[j] += prior.dlogpdf(a[j])

    if spec.fixed_sigma is None:
        s2 = spec.sigma_scale ** 2
        # half-normal on sigma plus log-Jacobian
        lp += (0.5 * math.log(2 / math.pi) - math.log(spec.sigma_scale) - 0.5 * sigma * sigma / s2
               + log_sigma)
        grad[pos] = -n + ss * inv_var - sigma * sigma / s2 + 1.0

    if not math.isfinite(lp):
        raise BayesError(f"{spec.label}: non-finite log density at {dict(zip(spec.param_names, theta))}")
    bad = ~np.isfinite(grad)
    if bad.any():
        names = [spec.param_names[i] for i in np.flatnonzero(bad)]
        raise BayesError(f"{spec.label}: non-finite gradient for {', '.join(names)}")
    return lp, grad


def fold_change(coefficient: float) -> float:
    """Multiplicative attention change per 10-fold increase in an impact."""
    if not math.isfinite(coefficient):
        raise BayesError("fold change of a non-finite coefficient")
    return 10.0 ** coefficient
