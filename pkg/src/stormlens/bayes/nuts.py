"""No-U-Turn sampler with dual-averaging step size and windowed metric adaptation.

Multinomial trajectory sampling with the generalized (momentum-sum) U-turn
criterion.  Warmup follows the usual schedule: a fast initial buffer, slow
windows of doubling length that each end with a metric update, and a final
fast buffer for the step size alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

LogpGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]

MAX_DELTA_H = 1000.0


@dataclass
class ChainResult:
    draws: np.ndarray  # (n_draws, dim), sampling scale
    step_size: float
    inv_metric: np.ndarray
    divergent: np.ndarray  # (n_draws,) bool
    accept_stat: np.ndarray
    tree_depth: np.ndarray
    n_leapfrog: np.ndarray
    warmup_divergences: int


class _DualAveraging:
    def __init__(self, step_size: float, target: float, gamma=0.05, t0=10.0, kappa=0.75):
        self.mu = math.log(10 * step_size)
        self.target, self.gamma, self.t0, self.kappa = target, gamma, t0, kappa
        self.h_bar = 0.0
        self.log_eps_bar = 0.0
        self.m = 0

    def update(self, accept: float) -> float:
        self.m += 1
        m = self.m
        w = 1.0 / (m + self.t0)
        self.h_bar = (1 - w) * self.h_bar + w * (self.target - accept)
        log_eps = self.mu - math.sqrt(m) / self.gamma * self.h_bar
        eta = m ** -self.kappa
        self.log_eps_bar = eta * log_eps + (1 - eta) * self.log_eps_bar
        return math.exp(log_eps)

    @property
    def final(self) -> float:
        return math.exp(self.log_eps_bar)


def warmup_windows(n_warmup: int, init_buffer=75, term_buffer=50, base_window=25) -> list[tuple[int, int]]:
    """Slow adaptation windows as ``(start, end)`` iteration ranges."""
    if n_warmup < 20:
        return []
    if init_buffer + base_window + term_buffer > n_warmup:
        init_buffer = int(0.15 * n_warmup)
        term_buffer = int(0.1 * n_warmup)
        base_window = n_warmup - init_buffer - term_buffer
    ends = []
    start, size = init_buffer, base_window
    last = n_warmup - term_buffer
    while start < last:
        end = start + size
        # stretch the final window when the next one would not fit
        if end + 2 * size > last:
            end = last
        ends.append((start, end))
        start, size = end, 2 * size
    return ends


class _Sampler:
    def __init__(self, logp_grad: LogpGrad, inv_metric: np.ndarray, rng: np.random.Generator,
                 max_depth: int):
        self.logp_grad = logp_grad
        self.rng = rng
        self.max_depth = max_depth
        self.set_metric(inv_metric)

    def set_metric(self, inv_metric: np.ndarray):
        inv_metric = np.array(inv_metric, dtype=float)
        if inv_metric.ndim == 1:
            inv_metric = np.diag(inv_metric)
        self.inv_metric = inv_metric
        # momentum ~ N(0, M) with M the inverse of inv_metric
        self.chol_m = np.linalg.cholesky(np.linalg.inv(inv_metric))

    def kinetic(self, p):
        return 0.5 * float(p @ (self.inv_metric @ p))

    def draw_momentum(self):
        return self.chol_m @ self.rng.standard_normal(len(self.chol_m))

    def leapfrog(self, theta, p, grad, eps):
        p = p + 0.5 * eps * grad
        theta = theta + eps * (self.inv_metric @ p)
        logp, grad = self.logp_grad(theta)
        p = p + 0.5 * eps * grad
        return theta, p, grad, logp

    def find_reasonable_step(self, theta, logp, grad) -> float:
        eps = 1.0
        p = self.draw_momentum()
        h0 = -logp + self.kinetic(p)

        def delta(e):
            try:
                _, p1, _, lp1 = self.leapfrog(theta, p, grad, e)
            except (ValueError, FloatingPointError, OverflowError):
                return -math.inf
            h1 = -lp1 + self.kinetic(p1)
            return h0 - h1 if math.isfinite(h1) else -math.inf

        d = delta(eps)
        direction = 1 if d > math.log(0.8) else -1
        for _ in range(100):
            eps_next = eps * (2.0 ** direction)
            d = delta(eps_next)
            if (direction == 1 and not d > math.log(0.8)) or (direction == -1 and d > math.log(0.8)):
                return eps if direction == 1 else eps_next
            eps = eps_next
        return eps

    # -- trajectory building --------------------------------------------

    def _uturn(self, p_minus, p_plus, rho) -> bool:
        return float((self.inv_metric @ p_minus) @ rho) <= 0 or float((self.inv_metric @ p_plus) @ rho) <= 0

    def _build(self, theta, p, grad, direction, depth, eps, h0):
        """Returns (theta-, p-, grad-, theta+, p+, grad+, prop_theta, prop_logp, prop_grad,
        log_sum_w, rho, ok, diverged, sum_accept, n_leapfrog)."""
        if depth == 0:
            try:
                theta1, p1, grad1, logp1 = self.leapfrog(theta, p, grad, direction * eps)
                h1 = -logp1 + self.kinetic(p1)
            except (ValueError, FloatingPointError, OverflowError):
                h1 = math.inf
            if not math.isfinite(h1) or h1 - h0 > MAX_DELTA_H:
                return (theta, p, grad, theta, p, grad, theta, None, grad,
                        -math.inf, p, False, True, 0.0, 1)
            log_w = h0 - h1
            accept = 1.0 if log_w > 0 else math.exp(log_w)
            return (theta1, p1, grad1, theta1, p1, grad1, theta1, logp1, grad1,
                    log_w, p1, True, False, accept, 1)

        left = self._build(theta, p, grad, direction, depth - 1, eps, h0)
        if not left[11]:
            return left
        if direction == 1:
            start = left[3], left[4], left[5]
        else:
            start = left[0], left[1], left[2]
        right = self._build(*start, direction, depth - 1, eps, h0)
        n_leap = left[14] + right[14]
        accept = left[13] + right[13]
        if not right[11]:
            return (*left[:11], False, right[12], accept, n_leap)

        log_sum = np.logaddexp(left[9], right[9])
        if self.rng.random() < math.exp(right[9] - log_sum):
            prop = right[6], right[7], right[8]
        else:
            prop = left[6], left[7], left[8]
        rho = left[10] + right[10]
        if direction == 1:
            tm, pm, gm = left[0], left[1], left[2]
            tp, pp, gp = right[3], right[4], right[5]
        else:
            tm, pm, gm = right[0], right[1], right[2]
            tp, pp, gp = left[3], left[4], left[5]
        ok = not self._uturn(pm, pp, rho)
        return (tm, pm, gm, tp, pp, gp, *prop, float(log_sum), rho, ok, False, accept, n_leap)

    def transition(self, theta, logp, grad, eps):
        p0 = self.draw_momentum()
        h0 = -logp + self.kinetic(p0)
        tm = tp = theta
        pm = pp = p0
        gm = gp = grad
        prop = theta, logp, grad
        log_sum_w = 0.0
        rho = p0.copy()
        depth = 0
        sum_accept, n_leap = 0.0, 0
        diverged = False
        while depth < self.max_depth:
            direction = 1 if self.rng.random() < 0.5 else -1
            if direction == 1:
                sub = self._build(tp, pp, gp, 1, depth, eps, h0)
                tp, pp, gp = sub[3], sub[4], sub[5]
            else:
                sub = self._build(tm, pm, gm, -1, depth, eps, h0)
                tm, pm, gm = sub[0], sub[1], sub[2]
            sum_accept += sub[13]
            n_leap += sub[14]
            depth += 1
            if sub[12]:
                diverged = True
            if not sub[11]:
                break
            # biased progressive sampling favours the new subtree
            if self.rng.random() < math.exp(min(0.0, sub[9] - log_sum_w)):
                prop = sub[6], sub[7], sub[8]
            log_sum_w = float(np.logaddexp(log_sum_w, sub[9]))
            rho = rho + sub[10]
            if self._uturn(pm, pp, rho):
                break
        accept = sum_accept / max(n_leap, 1)
        return prop, accept, depth, n_leap, diverged


def _regularized_cov(samples: np.ndarray, dense: bool) -> np.ndarray:
    n, d = samples.shape
    if dense:
        cov = np.cov(samples, rowvar=False).reshape(d, d)
        return (n / (n + 5.0)) * cov + 1e-3 * (5.0 / (n + 5.0)) * np.eye(d)
    var = samples.var(axis=0, ddof=1)
    return np.diag((n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0)))


def nuts_chain(logp_grad: LogpGrad, theta0: np.ndarray, n_warmup: int, n_draws: int,
               rng: np.random.Generator, target_accept: float = 0.8, max_depth: int = 10,
               dense_metric: bool = True, inv_metric: np.ndarray | None = None) -> ChainResult:
    """Run one NUTS chain; warmup draws are discarded."""
    theta = np.array(theta0, dtype=float)
    d = len(theta)
    sampler = _Sampler(logp_grad, np.eye(d) if inv_metric is None else inv_metric, rng, max_depth)
    logp, grad = logp_grad(theta)
    eps = sampler.find_reasonable_step(theta, logp, grad)
    da = _DualAveraging(eps, target_accept)
    windows = warmup_windows(n_warmup)
    closes = {end for _, end in windows}
    collect = range(windows[0][0], windows[-1][1]) if windows else range(0)
    buffer = []
    warm_div = 0
    for it in range(n_warmup):
        (theta, logp, grad), accept, _, _, div = sampler.transition(theta, logp, grad, eps)
        warm_div += div
        eps = da.update(accept)
        if it in collect:
            buffer.append(theta)
        if it + 1 in closes:
            sampler.set_metric(_regularized_cov(np.array(buffer), dense_metric))
            buffer = []
            eps = sampler.find_reasonable_step(theta, logp, grad)
            da = _DualAveraging(eps, target_accept)
    if n_warmup:
        eps = da.final

    draws = np.empty((n_draws, d))
    divergent = np.zeros(n_draws, bool)
    accept_stat = np.empty(n_draws)
    depth = np.empty(n_draws, int)
    n_leap = np.empty(n_draws, int)
    for i in range(n_draws):
        (theta, logp, grad), acc, dep, nl, div = sampler.transition(theta, logp, grad, eps)
        draws[i] = theta
        divergent[i] = div
        accept_stat[i] = acc
        depth[i] = dep
        n_leap[i] = nl
    return ChainResult(draws, eps, sampler.inv_metric, divergent, accept_stat, depth, n_leap, warm_div)

