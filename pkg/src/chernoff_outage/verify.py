"""Empirical-CDF and bound-validity checks against the analytic CDF."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .approximations import APPROXIMATIONS, approx_threshold, hybrid_threshold
from .bounds import Method, ThresholdResult, cher_lb, poly_lb
from .ncx2 import NCX2Params, cdf, exact_threshold, sample



def dkw_epsilon(n: int, alpha: float = 0.01) -> float:
    """Half-width of the DKW band holding with probability ``1 - alpha``."""
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def ks_upper_bound(samples: np.ndarray, cdf_fn, grid_points: int = 20_000) -> float:
    """Upper bound on ``sup_x |F_n(x) - F(x)|`` from ``F`` on a subset of order statistics.

    Between two consecutive evaluated order statistics both CDFs are
    monotone, so the supremum there is bounded by the cross differences of
    the end values. With ``grid_points >= len(samples)`` the bound is the
    exact Kolmogorov-Smirnov statistic.
    """
    xs = np.sort(np.asarray(samples, dtype=float))
    n = xs.size
    idx = np.unique(np.linspace(0, n - 1, min(n, grid_points)).round().astype(np.int64))
    f = np.asarray(cdf_fn(xs[idx]), dtype=float)
    # Empirical CDF just below / at each evaluated sample.
    left = np.searchsorted(xs, xs[idx], side="left") / n
    right = np.searchsorted(xs, xs[idx], side="right") / n
    worst = max(float(np.max(f - left)), float(np.max(right - f)), 1.0 - float(f[-1]), float(f[0]))
    # Open intervals between evaluated points.
    gaps_hi = left[1:] - f[:-1]
    gaps_lo = f[1:] - right[:-1]
    if gaps_hi.size:
        worst = max(worst, float(np.max(gaps_hi)), float(np.max(gaps_lo)))
    return worst


@dataclass(frozen=True)
class DKWReport:
    samples: int
    alpha: float
    band: float
    ks_bound: float
    passed: bool


def dkw_check(samples: np.ndarray, cdf_fn, alpha: float = 0.01, grid_points: int = 20_000) -> DKWReport:
    band = dkw_epsilon(len(samples), alpha)
    stat = ks_upper_bound(samples, cdf_fn, grid_points)
    return DKWReport(len(samples), alpha, band, stat, stat <= band)


def sampling_check(params: NCX2Params, n: int, seed: int, alpha: float = 0.01) -> DKWReport:
    draws = sample(params, np.random.default_rng(seed), size=n)
    return dkw_check(draws, lambda x: cdf(params, x), alpha)


def estimate(params: NCX2Params, epsilon: float, method, delta_beta: float | None = None,
             ratio_switch: float | None = None):
    """Dispatch a threshold computation by method tag."""
    method = Method(method)
    if method is Method.CHER:
        return cher_lb(params, epsilon, delta_beta)
    if method is Method.POLY:
        return poly_lb(params, epsilon)
    if method is Method.HYBRID:
        kwargs = {} if ratio_switch is None else {"ratio_switch": ratio_switch}
        return hybrid_threshold(params, epsilon, delta_beta=delta_beta, **kwargs)
    if method is Method.EXACT:
        return ThresholdResult(exact_threshold(params, epsilon), Method.EXACT, 0)
    if method in APPROXIMATIONS:
        return approx_threshold(params, epsilon, method)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class BoundRow:
    method: str
    epsilon: float
    value: float
    achieved_cdf: float
    exact: float
    violation: bool


def bound_validity(params: NCX2Params, epsilons, methods, delta_beta: float | None = None,
                   slack: float = 1e-12) -> list[BoundRow]:
    """Achieved outage of each method; a violation is ``cdf(value) > epsilon + slack``."""
    rows = []
    for eps in epsilons:
        exact = exact_threshold(params, eps)
        for m in methods:
            res = estimate(params, eps, m, delta_beta).with_cdf(params)
            rows.append(BoundRow(str(Method(m)), eps, res.value, res.achieved_cdf, exact,
                                 res.achieved_cdf > eps + slack))
    return rows


def rows_as_dicts(rows) -> list[dict]:
    return [asdict(r) for r in rows]
