"""Convergence diagnostics and posterior summaries for multi-chain draws."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

SUMMARY_COLUMNS = ("param", "mean", "sd", "mc_error", "hpd_2.5", "hpd_97.5", "n_eff", "Rhat")


def _as_chains(draws, min_chains: int = 2) -> np.ndarray:
    x = np.asarray(draws, dtype=float)
    if x.ndim != 2:
        raise ValueError("draws must be shaped (chains, draws)")
    if x.shape[0] < min_chains:
        raise ValueError("convergence diagnostics need at least 2 chains")
    if x.shape[1] < 4:
        raise ValueError("convergence diagnostics need at least 4 draws per chain")
    return x


def _split(x: np.ndarray) -> np.ndarray:
    half = x.shape[1] // 2
    return np.concatenate([x[:, :half], x[:, x.shape[1] - half:]], axis=0)


def split_rhat(draws) -> float:
    """Split-chain potential scale reduction factor.

    A single chain is accepted here (its two halves are compared);
    :func:`convergence_diagnostics` still insists on several chains.
    """
    x = np.asarray(draws, dtype=float)
    x = _split(_as_chains(x[None, :] if x.ndim == 1 else x, min_chains=1))
    n = x.shape[1]
    w = x.var(axis=1, ddof=1).mean()
    b = n * x.mean(axis=1).var(ddof=1)
    if w == 0:
        return 1.0 if b == 0 else math.inf
    var_plus = (n - 1) / n * w + b / n
    return float(math.sqrt(var_plus / w))


def _autocov(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of each row, via FFT."""
    n = x.shape[1]
    xc = x - x.mean(axis=1, keepdims=True)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size, axis=1)
    acov = np.fft.irfft(f * np.conj(f), size, axis=1)[:, :n]
    return acov / n


def effective_sample_size(draws) -> float:
    """Multi-chain ESS on split chains with Geyer's initial monotone sequence."""
    x = _split(_as_chains(draws))
    m, n = x.shape
    acov = _autocov(x)
    chain_var = acov[:, 0] * n / (n - 1)
    w = chain_var.mean()
    var_plus = (n - 1) / n * w + x.mean(axis=1).var(ddof=1)
    if var_plus == 0:
        return float("nan")
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # sum autocorrelation pairs while positive, forcing them monotone
    tau = -1.0
    prev = math.inf
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        pair = min(pair, prev)
        tau += 2.0 * pair
        prev = pair
    ess = m * n / tau
    return float(min(ess, m * n * math.log10(m * n)))


@dataclass(frozen=True)
class Diagnostics:
    rhat: float
    n_eff: float
    mc_error: float


def convergence_diagnostics(samples) -> dict[str, Diagnostics]:
    """R-hat, effective sample size and Monte Carlo error per parameter.

    ``samples`` is a :class:`PosteriorSamples` or a mapping of parameter
    name to a (chains, draws) array.
    """
    draws = getattr(samples, "draws", samples)
    out = {}
    for name, x in draws.items():
        x = _as_chains(x)
        sd = float(x.std(ddof=1))
        if sd == 0:
            out[name] = Diagnostics(1.0, float("nan"), 0.0)
            continue
        ess = effective_sample_size(x)
        out[name] = Diagnostics(split_rhat(x), ess, sd / math.sqrt(ess))
    return out


def hpd_interval(draws, mass: float = 0.95) -> tuple[float, float]:
    """Shortest interval holding ``ceil(mass * n)`` sorted draws (leftmost on ties)."""
    x = np.sort(np.asarray(draws, dtype=float).ravel())
    n = len(x)
    if n == 0:
        raise ValueError("hpd of no draws")
    k = min(n, max(1, math.ceil(round(mass * n, 9))))
    widths = x[k - 1:] - x[:n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


@dataclass
class SummaryRow:
    param: str
    mean: float
    sd: float
    mc_error: float
    hpd_lo: float
    hpd_hi: float
    n_eff: float
    rhat: float

    def values(self) -> tuple:
        return (self.param, self.mean, self.sd, self.mc_error, self.hpd_lo, self.hpd_hi, self.n_eff, self.rhat)


@dataclass
class SummaryTable:
    rows: list[SummaryRow]

    def __getitem__(self, name: str) -> SummaryRow:
        for r in self.rows:
            if r.param == name:
                return r
        raise KeyError(name)

    @property
    def columns(self) -> tuple[str, ...]:
        return SUMMARY_COLUMNS

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in self.rows:
            w.writerow([r.param] + [f"{v:.10g}" for v in r.values()[1:]])
        return out.getvalue()


def summarize_posterior(samples, mass: float = 0.95) -> SummaryTable:
    draws = getattr(samples, "draws", samples)
    diags = convergence_diagnostics(draws)
    rows = []
    for name, x in draws.items():
        x = np.asarray(x, dtype=float)
        lo, hi = hpd_interval(x, mass)
        d = diags[name]
        rows.append(SummaryRow(name, float(x.mean()), float(x.std(ddof=1)), d.mc_error, lo, hi, d.n_eff, d.rhat))
    return SummaryTable(rows)
