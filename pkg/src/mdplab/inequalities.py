"""Closed-form exponential tail bounds and Monte-Carlo domination checks.

The constants (2, 4*sqrt(e), 80, 8, 64) are taken verbatim; nothing here
tries to be tight. Domination verdicts compare the analytic bound against
the exact binomial (Clopper-Pearson) upper confidence limit of the
empirical exceedance frequency, so a "violated" verdict is statistically
meaningful, not sampling noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .core import ProcessModel, RngStream

__all__ = [
    "TailBoundReport",
    "azuma_bound",
    "puw_bound",
    "projection_bound",
    "blocking_bound_first_term",
    "blocking_second_term_statistic",
    "clopper_pearson_upper",
    "verify_domination",
]


def azuma_bound(n: int, c: float, t: float) -> float:
    """Two-sided martingale bound 2 exp(-t^2 / (2 n c^2))."""
    if n < 1 or c <= 0 or t < 0:
        raise ValueError("require n >= 1, c > 0, t >= 0")
    return 2.0 * math.exp(-(t * t) / (2.0 * n * c * c))


def puw_bound(n: int, t: float, x_inf: float, cond_norms: Sequence[float],
              extended: bool = False) -> float:
    """4 sqrt(e) exp(-t^2 / (2 n [x_inf + 80 sum_j j^{-3/2} cond_norms_j]^2)).

    cond_norms[j-1] = ||E(S_j | F_0)||_inf. By default the sum runs over
    j <= n exactly as in the finite-n statement; extended=True uses the whole
    supplied sequence (the infinite-sum variant).
    """
    if n < 1 or t < 0 or x_inf < 0:
        raise ValueError("require n >= 1, t >= 0, x_inf >= 0")
    cn = np.asarray(cond_norms, dtype=float)
    if np.any(cn < 0):
        raise ValueError("conditional norms must be nonnegative")
    if not extended:
        cn = cn[:n]
    j = np.arange(1, cn.size + 1, dtype=float)
    bracket = x_inf + 80.0 * float(np.sum(j ** (-1.5) * cn))
    return 4.0 * math.sqrt(math.e) * math.exp(-(t * t) / (2.0 * n * bracket * bracket))


def projection_bound(n: int, x: float, g_weights: Sequence[float],
                     p_seq: Sequence[float]):
    """Maximal-inequality pair from summable projection norms.

    With D = sum_j p_j and G^2 = sum_{i<=n} g_i^2, returns
    (moment_bound, tail_value): moment_bound(t) = 4 exp(G^2 D^2 t^2 / 2) and
    tail_value = 8 exp(-x^2 / (2 G^2 D^2)).
    """
    g = np.asarray(g_weights, dtype=float)[:n]
    p = np.asarray(p_seq, dtype=float)
    if x < 0 or np.any(p < 0):
        raise ValueError("require x >= 0 and nonnegative projection norms")
    D = float(np.sum(p))
    G2 = float(np.sum(g * g))
    if D == 0.0 or G2 == 0.0:
        raise ValueError("degenerate weights: D and G must be positive")

    def moment_bound(t: float) -> float:
        return 4.0 * math.exp(0.5 * G2 * D * D * t * t)

    tail_value = 8.0 * math.exp(-(x * x) / (2.0 * G2 * D * D))
    return moment_bound, tail_value


def blocking_bound_first_term(n: int, B: float, c: int, delta: float) -> float:
    """First blocking term 2 exp(-delta^2 n / (64 B^2 c)), guarded by cB/n <= delta/2."""
    if n < 1 or B <= 0 or c < 1 or delta <= 0:
        raise ValueError("require n >= 1, B > 0, c >= 1, delta > 0")
    if c * B / n > delta / 2.0 + 1e-12:
        raise ValueError(f"block constraint violated: cB/n = {c * B / n:.4g} "
                         f"> delta/2 = {delta / 2.0:.4g}")
    return 2.0 * math.exp(-(delta * delta) * n / (64.0 * B * B * c))


def blocking_second_term_statistic(kernel, f_values: np.ndarray,
                                   states: np.ndarray, c: int) -> float:
    """max over blocks of |c^{-1} sum_block E(X_j | F_{block start})|.

    Exact on kernel models: E(X_{start+s} | state) = (K^s f)(state). States
    index the kernel nodes by nearest match (exact for finite-state chains
    and node-aligned grids).
    """
    f = np.asarray(f_values, dtype=float)
    mu_f = kernel.mu(f)
    cum = np.zeros_like(f)
    v = f.copy()
    for _ in range(c):
        v = kernel.apply(v)
        cum = cum + (v - mu_f)
    nodes = np.asarray(kernel.nodes, dtype=float)
    starts = np.asarray(states, dtype=float)[:: c][: len(states) // c]
    idx = np.abs(starts[:, None] - nodes[None, :]).argmin(axis=1)
    return float(np.max(np.abs(cum[idx]))) / c


def clopper_pearson_upper(k: int, n: int, confidence: float = 0.95) -> float:
    """Exact binomial upper confidence limit for k successes in n trials."""
    if not 0 <= k <= n or n < 1:
        raise ValueError("need 0 <= k <= n, n >= 1")
    if k == n:
        return 1.0
    return float(stats.beta.ppf(confidence, k + 1, n - k))


@dataclass
class TailBoundReport:
    threshold: float
    bound: float
    p_hat: float
    replicas: int
    ci_upper: float
    verdict: str  # dominated | violated

    def to_csv_row(self):
        return (self.threshold, self.bound, self.p_hat, self.ci_upper, self.verdict)


def _bound_evaluator(model: ProcessModel, bound_spec: dict, n: int) -> Callable[[float], float]:
    spec = dict(bound_spec)
    kind = spec.pop("kind")
    if kind == "azuma":
        c = spec.get("c", model.bound)
        if c < model.bound * (1 - 1e-9):
            raise ValueError(f"azuma increment c={c} below model bound {model.bound}")
        return lambda t: azuma_bound(n, c, t)
    if kind == "puw":
        x_inf = spec.get("x_inf", model.bound)
        if x_inf < model.bound * (1 - 1e-9):
            raise ValueError(f"puw x_inf={x_inf} below model bound {model.bound}")
        cond_norms = np.asarray(spec.get("cond_norms", np.zeros(n)), dtype=float)
        return lambda t: puw_bound(n, t, x_inf, cond_norms)
    if kind == "projection":
        p_seq = np.asarray(spec["p_seq"], dtype=float)
        if float(np.sum(p_seq)) < model.bound * (1 - 1e-9):
            raise ValueError("projection norms sum below the model bound; "
                             "the spec cannot dominate ||X||_inf")
        g = spec.get("g_weights", np.ones(n))
        return lambda x: projection_bound(n, x, g, p_seq)[1]
    raise ValueError(f"unknown bound kind {kind!r}")


def verify_domination(model: ProcessModel, bound_spec: dict,
                      thresholds: Sequence[float], replicas: int, n: int,
                      stream: RngStream, chunk: int = 1024):
    """Empirical P(max_k |S_k| >= t) vs analytic bound, per threshold.

    Chunked sampling: each chunk of replicas shares one derived generator,
    so the run is deterministic in (master seed, chunk size).
    """
    if replicas < 1000:
        raise ValueError("need at least 10^3 replicas for a meaningful verdict")
    evaluator = _bound_evaluator(model, bound_spec, n)
    thresholds = sorted(float(t) for t in thresholds)
    maxima = np.empty(replicas)
    done = 0
    ci = 0
    while done < replicas:
        rng = stream.child(ci).generator()
        take = min(chunk, replicas - done)
        for r in range(take):
            out = model.sampler(n, rng)
            values = out[0] if isinstance(out, tuple) else out
            maxima[done + r] = np.max(np.abs(np.cumsum(values)))
        done += take
        ci += 1
    reports = []
    for t in thresholds:
        k = int(np.sum(maxima >= t))
        p_hat = k / replicas
        upper = clopper_pearson_upper(k, replicas)
        b = evaluator(t)
        verdict = "dominated" if upper <= b else "violated"
        reports.append(TailBoundReport(threshold=t, bound=b, p_hat=p_hat,
                                       replicas=replicas, ci_upper=upper,
                                       verdict=verdict))
    return reports
