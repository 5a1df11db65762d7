"""Multi-chain posterior sampling for the regression models."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import BayesError, RegressionData, RegressionSpec, constrain, initial_point, log_posterior_grad
from .nuts import ChainResult, nuts_chain

log = logging.getLogger(__name__)

DIVERGENCE_WARN_FRACTION = 0.10
INIT_JITTER = 0.1


@dataclass
class PosteriorSamples:
    draws: dict[str, np.ndarray]  # name -> (chains, draws), reported scale
    seed: int
    spec: RegressionSpec
    step_sizes: list[float] = field(default_factory=list)
    divergences: int = 0
    n_draws_total: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def divergent_fraction(self) -> float:
        return self.divergences / self.n_draws_total if self.n_draws_total else 0.0


class _Target:
    """Picklable log density, optionally shifted by a constant."""

    def __init__(self, data: RegressionData, spec: RegressionSpec, shift: float = 0.0):
        self.data, self.spec, self.shift = data, spec, shift

    def __call__(self, theta):
        lp, grad = log_posterior_grad(theta, self.data, self.spec)
        return lp + self.shift, grad


def _run_chain(spec: RegressionSpec, data: RegressionData, chain: int, shift: float) -> ChainResult:
    cfg = spec.sampler
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, chain]))
    target = _Target(data, spec, shift)
    theta0 = initial_point(spec)
    for _ in range(100):
        start = theta0 + rng.normal(scale=INIT_JITTER, size=theta0.shape)
        try:
            target(start)
            break
        except BayesError:
            continue
    else:
        raise BayesError(f"{spec.label}: chain {chain} found no finite starting point")
    try:
        return nuts_chain(target, start, spec.burn_in(), cfg.draws, rng, cfg.target_accept,
                          cfg.max_tree_depth, cfg.dense_metric)
    except BayesError as exc:
        raise BayesError(f"{spec.label}: chain {chain} left the support: {exc}") from exc


def sample_posterior(spec: RegressionSpec, data: RegressionData, log_density_shift: float = 0.0) -> PosteriorSamples:
    """Draw ``chains x draws`` post-burn-in samples with NUTS.

    Each chain seeds its own generator from ``(seed, chain index)``, so the
    result does not depend on whether chains run serially or in a pool
    (``spec.sampler.jobs``).
    """
    cfg = spec.sampler
    if cfg.chains < 1 or cfg.draws < 1:
        raise BayesError("need at least one chain and one draw")
    args = [(spec, data, c, log_density_shift) for c in range(cfg.chains)]
    if cfg.jobs > 1 and cfg.chains > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, cfg.chains)) as pool:
            results = list(pool.map(_run_chain, *zip(*args)))
    else:
        results = [_run_chain(*a) for a in args]

    stacked = np.stack([constrain(spec, r.draws) for r in results])  # (chains, draws, dim)
    draws = {name: stacked[:, :, j] for j, name in enumerate(spec.param_names)}
    n_div = int(sum(r.divergent.sum() for r in results))
    total = cfg.chains * cfg.draws
    out = PosteriorSamples(draws, cfg.seed, spec, [r.step_size for r in results], n_div, total)
    if out.divergent_fraction > DIVERGENCE_WARN_FRACTION:
        msg = f"{spec.label}: {out.divergent_fraction:.1%} divergent transitions"
        out.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return out


def dump_chains(samples: PosteriorSamples) -> dict[int, str]:
    """One CSV text per chain with a column per parameter."""
    names = list(samples.draws)
    n_chains = next(iter(samples.draws.values())).shape[0]
    out = {}
    for c in range(n_chains):
        cols = np.column_stack([samples.draws[n][c] for n in names])
        lines = [",".join(names)]
        lines += [",".join(f"{v:.17g}" for v in row) for row in cols]
        out[c] = "\n".join(lines) + "\n"
    return out
