"""Evaluation statistics: prediction errors, the discrete Weibull model, timing summaries
and the paired Wilcoxon signed-rank test."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_ndtr

PERCENTILE_POINTS = tuple(round(0.1 * i, 1) for i in range(11))
EXACT_WILCOXON_MAX_N = 25


def error_count(predicted: np.ndarray, truth: np.ndarray) -> int:
    """Number of cells where two complete boards differ."""
    a, b = np.asarray(predicted), np.asarray(truth)
    if a.shape != b.shape:
        raise ValueError(f"board shapes differ: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


# ---------------------------------------------------------------------------
# Discrete Weibull


@dataclass(frozen=True)
class WeibullParams:
    alpha: float  # scale
    beta: float  # shape

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("Weibull parameters must be positive")


def weibull_cdf(f, params: WeibullParams):
    """P(F <= f) = 1 - exp(-((f + 1) / alpha) ** beta)."""
    f = np.asarray(f, dtype=np.float64)
    return -np.expm1(-(((f + 1) / params.alpha) ** params.beta))


def weibull_logpmf(f, params: WeibullParams):
    f = np.asarray(f, dtype=np.float64)
    lo = (f / params.alpha) ** params.beta
    hi = ((f + 1) / params.alpha) ** params.beta
    # log(exp(-lo) - exp(-hi)) computed without cancellation
    return -lo + np.log(-np.expm1(lo - hi))


def weibull_pmf(f, params: WeibullParams):
    return np.exp(weibull_logpmf(f, params))


def sample_discrete_weibull(params: WeibullParams, size: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling: the smallest f >= 0 with cdf(f) >= u."""
    u = rng.random(size)
    x = params.alpha * (-np.log1p(-u)) ** (1.0 / params.beta)
    return np.maximum(np.ceil(x) - 1, 0).astype(np.int64)


@dataclass
class WeibullFit:
    params: WeibullParams
    neg_log_likelihood: float
    initial: WeibullParams
    initial_neg_log_likelihood: float
    samples: int

    def mode(self, upto: Optional[int] = None) -> int:
        upto = upto or int(max(self.params.alpha * 10, 100))
        return int(np.argmax(weibull_pmf(np.arange(upto + 1), self.params)))


def _neg_log_likelihood(values: np.ndarray, counts: np.ndarray, params: WeibullParams) -> float:
    return float(-(counts * weibull_logpmf(values, params)).sum())


def _initial_guess(values: np.ndarray, counts: np.ndarray) -> WeibullParams:
    # -log(1 - F) = ((f + 1) / alpha) ** beta is a line in log(f + 1)
    ecdf = np.cumsum(counts) / counts.sum()
    keep = ecdf < 1.0
    x = np.log(values[keep] + 1.0)
    y = np.log(-np.log1p(-ecdf[keep]))
    if len(x) >= 2:
        beta, intercept = np.polyfit(x, y, 1)
        if beta > 0:
            return WeibullParams(float(np.exp(-intercept / beta)), float(beta))
    beta = 1.0
    alpha = float(np.exp(x[0] - y[0])) if len(x) else float(values.mean() + 1)
    return WeibullParams(alpha, beta)


def fit_weibull(samples: Sequence[int]) -> WeibullFit:
    """Maximum-likelihood discrete Weibull fit (Nelder-Mead on log alpha, log beta)."""
    data = np.asarray(samples)
    if data.size < 10:
        raise ValueError("need at least 10 samples to fit")
    if (data < 0).any() or not np.all(data == np.round(data)):
        raise ValueError("samples must be non-negative integers")
    if np.all(data == data[0]):
        raise ValueError("cannot fit a Weibull to identical samples")
    values, counts = np.unique(data.astype(np.int64), return_counts=True)
    start = _initial_guess(values, counts)
    start_nll = _neg_log_likelihood(values, counts, start)

    def objective(theta):
        a, b = np.exp(theta)
        if not (np.isfinite(a) and np.isfinite(b)) or a <= 0 or b <= 0:
            return np.inf
        nll = _neg_log_likelihood(values, counts, WeibullParams(a, b))
        return nll if np.isfinite(nll) else np.inf

    res = minimize(objective, np.log([start.alpha, start.beta]), method="Nelder-Mead",
                   options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 4000})
    if res.fun <= start_nll:
        a, b = np.exp(res.x)
        best, nll = WeibullParams(float(a), float(b)), float(res.fun)
    else:
        best, nll = start, start_nll
    return WeibullFit(best, nll, start, start_nll, int(data.size))


# ---------------------------------------------------------------------------
# Timing summaries


def time_stats(durations: Sequence[float]) -> dict:
    """Mean, sample std, median and the 0.0, 0.1, ..., 1.0 percentiles (linear interpolation)."""
    x = np.asarray(durations, dtype=np.float64)
    if x.size == 0:
        raise ValueError("no durations")
    return {
        "count": int(x.size),
        "mean": float(x.mean()),
        "std": float(x.std(ddof=1)) if x.size > 1 else 0.0,
        "median": float(np.median(x)),
        "percentiles": {f"{p:.1f}": float(np.percentile(x, 100 * p)) for p in PERCENTILE_POINTS},
    }


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank test


@dataclass
class WilcoxonResult:
    W: float  # sum of ranks of positive differences
    w_minus: float
    signed: float  # W - w_minus; flips sign when the pairs are swapped
    p_value: float
    method: str
    n: int
    log10_p: float = 0.0  # stays finite when p_value underflows to 0.0

    def to_json(self) -> dict:
        return asdict(self)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _exact_p(doubled_ranks: list[int], observed: int) -> float:
    """P(|T - E T| >= |t - E T|) for T the doubled positive-rank sum under random signs."""
    total = sum(doubled_ranks)
    dist = np.zeros(total + 1, dtype=np.int64)
    dist[0] = 1
    for r in doubled_ranks:
        shifted = np.zeros_like(dist)
        shifted[r:] = dist[:total + 1 - r]
        dist = dist + shifted
    # distances measured in doubled units: 2T - total
    dev = abs(2 * observed - total)
    t = np.arange(total + 1)
    hits = int(dist[np.abs(2 * t - total) >= dev].sum())
    return min(1.0, hits / 2 ** len(doubled_ranks))


def wilcoxon_signed_rank(pairs: Sequence[tuple[float, float]], method: str = "auto") -> WilcoxonResult:
    """Two-sided paired signed-rank test on the differences ``a - b``.

    Zero differences are dropped and ties get average ranks. ``method`` is
    ``"exact"`` (enumeration of all sign assignments), ``"normal"`` (tie- and
    continuity-corrected approximation) or ``"auto"`` (exact up to 25 pairs).
    """
    d = np.array([a - b for a, b in pairs], dtype=np.float64)
    d = d[d != 0]
    n = int(d.size)
    if n == 0:
        raise ValueError("all differences are zero")
    if n < 5:
        raise ValueError(f"need at least 5 non-zero differences, got {n}")
    if method == "auto":
        method = "exact" if n <= EXACT_WILCOXON_MAX_N else "normal"
    ranks = _average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    if method == "exact":
        doubled = [int(round(2 * r)) for r in ranks]
        p = _exact_p(doubled, int(round(2 * w_plus)))
        log10_p = math.log10(p)
    elif method == "normal":
        _, tie_counts = np.unique(np.abs(d), return_counts=True)
        mean = n * (n + 1) / 4
        var = n * (n + 1) * (2 * n + 1) / 24 - float((tie_counts**3 - tie_counts).sum()) / 48
        if var <= 0:
            p, log10_p = 1.0, 0.0
        else:
            z = max(abs(w_plus - mean) - 0.5, 0.0) / math.sqrt(var)
            log_p = min(0.0, math.log(2) + float(log_ndtr(-z)))
            p, log10_p = math.exp(log_p), log_p / math.log(10)
    else:
        raise ValueError(f"unknown method {method!r}")
    return WilcoxonResult(w_plus, w_minus, w_plus - w_minus, float(p), method, n, float(log10_p))


def format_p(result: WilcoxonResult) -> str:
    """p-value text that never collapses to zero."""
    if result.p_value > 0:
        return f"{result.p_value:.3g}"
    exponent = math.floor(result.log10_p)
    return f"{10 ** (result.log10_p - exponent):.2f}e{exponent}"
