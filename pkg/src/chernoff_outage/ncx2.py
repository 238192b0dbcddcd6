"""Non-central chi-squared distribution in the (K, sigma^2, M^2) parameterization.

A variable ``beta = sum_k alpha_k**2`` with ``alpha_k ~ N(mu_k, sigma2)`` for
``k = 0..K-1`` is non-central chi-squared with ``K`` degrees of freedom, per
component variance ``sigma2`` and non-centrality energy ``m2 = sum_k mu_k**2``.
Dividing by ``sigma2`` gives the textbook ``(k, lambda)`` form with
``lambda = m2 / sigma2``.

The CDF and the generalized Marcum Q-function are both evaluated as Poisson
mixtures of regularized incomplete gamma functions. The lower and upper tails
are summed separately, so a tiny CDF value keeps its relative accuracy instead
of being obtained as ``1 - Q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

__all__ = [
    "NumericalError",
    "NCX2Params",
    "StandardizedParams",
    "marcum_q",
    "cdf",
    "pdf",
    "mean",
    "variance",
    "sample",
    "exact_threshold",
]

# Poisson mass allowed outside the summation window.
RESIDUAL_MASS = 1e-16
MAX_TERMS = 2_000_000
# Upper bound on elements materialized per (terms x points) block.
_BLOCK = 1 << 22


class NumericalError(ArithmeticError):
    """A series or search failed to converge within its iteration cap."""


@dataclass(frozen=True)
class StandardizedParams:
    """Textbook form: ``beta = scale * X`` with ``X ~ chi2'(k, lam)``."""

    k: int
    lam: float
    scale: float

    def to_params(self) -> NCX2Params:
        return NCX2Params(self.k, self.scale, self.lam * self.scale)


@dataclass(frozen=True)
class NCX2Params:
    """Degrees of freedom ``dof`` (K), per-component variance ``sigma2`` and
    non-centrality energy ``m2`` (M^2)."""

    dof: int
    sigma2: float
    m2: float

    def __post_init__(self):
        if int(self.dof) != self.dof or self.dof < 1:
            raise ValueError(f"dof must be a positive integer, got {self.dof!r}")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise ValueError(f"sigma2 must be positive and finite, got {self.sigma2!r}")
        if not (self.m2 >= 0 and math.isfinite(self.m2)):
            raise ValueError(f"m2 must be non-negative and finite, got {self.m2!r}")
        object.__setattr__(self, "dof", int(self.dof))
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "m2", float(self.m2))

    @property
    def lam(self) -> float:
        return self.m2 / self.sigma2

    def mean(self) -> float:
        return self.m2 + self.dof * self.sigma2

    def variance(self) -> float:
        return 2.0 * self.dof * self.sigma2**2 + 4.0 * self.sigma2 * self.m2

    def standardized(self) -> StandardizedParams:
        return StandardizedParams(self.dof, self.lam, self.sigma2)


class _PoissonMixture:
    """Gamma(shape0 + j) components weighted by Poisson(j; mu) probabilities."""

    def __init__(self, shape0: float, mu: float):
        self.shape0 = shape0
        self.mu = mu
        last = _poisson_cutoff(mu)
        j = np.arange(last + 1, dtype=float)
        log_w = -mu + special.xlogy(j, mu) - special.gammaln(j + 1.0)
        weights = np.exp(log_w)
        # gammaln rounding at large j leaves the sum off by ~1e-14; rescale to the retained mass.
        weights *= special.pdtr(last, mu) / math.fsum(weights)
        self.shapes = shape0 + j
        self.weights = weights

    def _blocks(self, y: np.ndarray):
        step = max(1, _BLOCK // self.shapes.size)
        for start in range(0, y.size, step):
            yield slice(start, start + step), y[start:start + step]

    def _mix(self, y, kernel) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.empty_like(y)
        for sl, chunk in self._blocks(y):
            vals = kernel(self.shapes[:, None], chunk[None, :])
            out[sl] = self.weights @ vals
        if not np.all(np.isfinite(out)):
            raise NumericalError("Poisson mixture produced a non-finite value")
        return out

    def lower(self, y):
        return self._mix(y, special.gammainc)

    def upper(self, y):
        return self._mix(y, special.gammaincc)

    def density(self, y):
        def gamma_pdf(a, t):
            with np.errstate(divide="ignore"):
                return np.exp(special.xlogy(a - 1.0, t) - t - special.gammaln(a))

        return self._mix(y, gamma_pdf)


def _poisson_cutoff(mu: float) -> int:
    """Smallest index with Poisson(mu) mass beyond it below RESIDUAL_MASS."""
    if mu == 0.0:
        return 0
    last = int(mu + 10.0 * math.sqrt(mu) + 30.0)
    while special.pdtrc(last, mu) >= RESIDUAL_MASS:
        last = int(1.5 * last) + 10
        if last > MAX_TERMS:
            raise NumericalError(
                f"Poisson series for non-centrality {2 * mu:g} needs more than "
                f"{MAX_TERMS} terms"
            )
    return last


@lru_cache(maxsize=256)
def _mixture(shape0: float, mu: float) -> _PoissonMixture:
    return _PoissonMixture(shape0, mu)


def _scalar_or_array(values: np.ndarray, like):
    if np.ndim(like) == 0:
        return float(values[0])
    return values.reshape(np.shape(like))


def marcum_q(order: float, a: float, b: float) -> float:
    """Generalized Marcum Q-function ``Q_order(a, b)``.

    Evaluated as ``sum_j Pois(j; a^2/2) * Q(order + j, b^2/2)`` with ``Q`` the
    regularized upper incomplete gamma function.
    """
    if not order > 0:
        raise ValueError(f"order must be positive, got {order!r}")
    if a < 0 or b < 0:
        raise ValueError("a and b must be non-negative")
    if b == 0:
        return 1.0
    mix = _mixture(float(order), 0.5 * float(a) ** 2)
    return float(min(1.0, mix.upper(0.5 * float(b) ** 2)[0]))


def cdf(params: NCX2Params, x):
    """``P(beta <= x)``; accepts a scalar or an array of non-negative points."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise ValueError("x must be non-negative")
    mix = _mixture(0.5 * params.dof, 0.5 * params.lam)
    vals = mix.lower(xs.ravel() / (2.0 * params.sigma2))
    return _scalar_or_array(np.clip(vals, 0.0, 1.0), x)


def pdf(params: NCX2Params, x):
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= 0):
        raise ValueError("x must be positive")
    scale = 2.0 * params.sigma2
    mix = _mixture(0.5 * params.dof, 0.5 * params.lam)
    return _scalar_or_array(mix.density(xs.ravel() / scale) / scale, x)


def mean(params: NCX2Params) -> float:
    return params.mean()


def variance(params: NCX2Params) -> float:
    return params.variance()


def sample(params: NCX2Params, rng: np.random.Generator, size=None):
    """Draw ``beta`` by summing ``K`` squared Gaussians.

    The whole non-centrality is placed on the first component; by rotational
    invariance only ``m2`` matters.
    """
    n = 1 if size is None else int(size)
    sigma = math.sqrt(params.sigma2)
    out = np.empty(n)
    rows = max(1, (1 << 22) // params.dof)
    for start in range(0, n, rows):
        stop = min(n, start + rows)
        z = rng.standard_normal((stop - start, params.dof))
        z *= sigma
        z[:, 0] += math.sqrt(params.m2)
        out[start:stop] = np.einsum("ij,ij->i", z, z)
    return float(out[0]) if size is None else out


def exact_threshold(params: NCX2Params, epsilon: float, tol: float | None = None) -> float:
    """Outage threshold ``beta_T`` with ``cdf(beta_T) = epsilon``, by bisection.

    With ``tol=None`` the bracket is shrunk until its width is below
    ``1e-12 * min(mean, upper end)``, which keeps 12 significant digits even
    for thresholds many orders of magnitude below the mean. An explicit
    ``tol`` is an absolute bracket width.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0,1)")
    if tol is not None and not tol > 0:
        raise ValueError("tol must be positive")
    mix = _mixture(0.5 * params.dof, 0.5 * params.lam)
    scale = 2.0 * params.sigma2

    def below(x: float) -> bool:
        return mix.lower(x / scale)[0] < epsilon

    center = params.mean()
    hi = center + 10.0 * math.sqrt(params.variance())
    grow = 0
    while below(hi):
        hi *= 2.0
        grow += 1
        if grow > 2000:
            raise NumericalError("could not bracket the threshold from above")
    lo = 0.0
    for _ in range(4000):
        width_tol = tol if tol is not None else 1e-12 * min(center, hi)
        if hi - lo <= width_tol:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return mid
        if below(mid):
            lo = mid
        else:
            hi = mid
    raise NumericalError("bisection did not reach the requested tolerance")
