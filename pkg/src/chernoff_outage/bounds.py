"""Lower bounds of the outage threshold.

``cher_lb`` solves ``epsilon = inf_{nu>0} s(nu, beta)`` for ``beta`` where

    s(nu, beta) = exp(nu*beta - nu*M2/(1 + 2*sigma2*nu)) / (1 + 2*sigma2*nu)**(K/2)

is the Chernoff bound of ``P(beta_rv <= beta)``. For fixed ``beta`` in
``(0, M2 + K*sigma2)`` the infimum is reached at a unique closed-form ``nu*``,
and ``s(nu*(beta), beta)`` increases with ``beta``, so the root is found by
bisection over that interval. ``poly_lb`` is the first-term polynomial bound,
which is only guaranteed in the central case.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .ncx2 import NCX2Params, cdf

__all__ = [
    "Method",
    "ThresholdResult",
    "chernoff_s_log",
    "nu_star",
    "default_delta_beta",
    "bisection_steps",
    "cher_lb",
    "cher_lb_central",
    "cher_lb_batch",
    "poly_lb",
]

DEFAULT_REL_DELTA_BETA = 1e-10


class Method(str, enum.Enum):
    CHER = "cher"
    POLY = "poly"
    EXACT = "exact"
    ATY_FIRST = "aty_first"
    ATY_CLOSER = "aty_closer"
    SANKARAN_Z1 = "sankaran_z1"
    SANKARAN_Z2 = "sankaran_z2"
    HYBRID = "hybrid"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ThresholdResult:
    """A threshold estimate.

    ``flags`` carries qualitative outcomes such as ``"below_resolution"``
    (search interval narrower than the tolerance), ``"clamped"`` (a negative
    Gaussian-approximation threshold forced to 0) or ``"deterministic"``.
    ``bracket`` is the final ``(beta_low, beta_up)`` of a line search.
    """

    value: float
    method: Method
    iterations: int = 0
    achieved_cdf: float | None = None
    flags: frozenset = field(default_factory=frozenset)
    bracket: tuple[float, float] | None = None
    raw_value: float | None = None

    def with_cdf(self, params: NCX2Params) -> ThresholdResult:
        if self.achieved_cdf is not None:
            return self
        value = cdf(params, self.value) if math.isfinite(self.value) else 1.0
        return replace(self, achieved_cdf=value)


def chernoff_s_log(params: NCX2Params, nu: float, beta: float) -> float:
    """Natural log of the Chernoff function ``s(nu, beta)``."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    if not beta > 0:
        raise ValueError("beta must be positive")
    g = 2.0 * params.sigma2 * nu
    return nu * beta - nu * params.m2 / (1.0 + g) - 0.5 * params.dof * math.log1p(g)


def nu_star(params: NCX2Params, beta: float) -> float:
    """Minimizer over ``nu > 0`` of ``s(nu, beta)`` for ``0 < beta < mean``.

    Uses the root of ``beta*u**2 - K*sigma2*u - M2 = 0`` with
    ``u = 1 + 2*sigma2*nu``, rearranged so no cancellation occurs as ``beta``
    approaches either end of the interval.
    """
    k_s2 = params.dof * params.sigma2
    if not 0.0 < beta < params.m2 + k_s2:
        raise ValueError(
            "beta must lie strictly inside (0, m2 + K*sigma2); no minimizing nu > 0 exists"
        )
    root = math.sqrt(k_s2 * k_s2 + 4.0 * beta * params.m2)
    gap = (params.m2 - beta) + k_s2
    # root - K*sigma2 written as 4*beta*M2/(root + K*sigma2).
    return gap / (2.0 * beta * params.sigma2 * (1.0 + 2.0 * params.m2 / (root + k_s2)))


def _log_s_at_optimum(params: NCX2Params, beta: float) -> float:
    return chernoff_s_log(params, nu_star(params, beta), beta)


def default_delta_beta(params: NCX2Params) -> float:
    return DEFAULT_REL_DELTA_BETA * params.mean()


def bisection_steps(width: float, delta_beta: float) -> int:
    """``ceil(log2(width / delta_beta))``, counted by exact halvings."""
    if width <= delta_beta:
        return 0
    n = max(0, math.ceil(math.log2(width / delta_beta)) - 2)
    while math.ldexp(width, -n) > delta_beta:
        n += 1
    return n


def _check(epsilon: float, delta_beta: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0,1)")
    if not delta_beta > 0:
        raise ValueError("delta_beta must be positive")


def _line_search(log_s, upper: float, log_eps: float, steps: int):
    lo, up = 0.0, upper
    for _ in range(steps):
        mid = 0.5 * (lo + up)
        # s(nu*, beta) grows with beta: at or above epsilon the root lies below mid.
        if log_s(mid) >= log_eps:
            up = mid
        else:
            lo = mid
    return lo, up


def cher_lb(params: NCX2Params, epsilon: float, delta_beta: float | None = None) -> ThresholdResult:
    """Chernoff lower bound of the outage threshold by line search.

    The returned value is the lower bracket end, whose Chernoff bound does
    not exceed ``epsilon``. ``delta_beta`` is an absolute tolerance and
    defaults to ``1e-10 * (m2 + K*sigma2)``.
    """
    if delta_beta is None:
        delta_beta = default_delta_beta(params)
    _check(epsilon, delta_beta)
    upper = params.mean()
    if upper <= delta_beta:
        return ThresholdResult(0.0, Method.CHER, 0, flags=frozenset({"below_resolution"}),
                               bracket=(0.0, upper))
    steps = bisection_steps(upper, delta_beta)
    lo, up = _line_search(lambda b: _log_s_at_optimum(params, b), upper, math.log(epsilon), steps)
    flags = frozenset({"below_resolution"}) if lo == 0.0 else frozenset()
    return ThresholdResult(lo, Method.CHER, steps, flags=flags, bracket=(lo, up))


def cher_lb_central(dof: int, sigma2: float, epsilon: float,
                    delta_beta: float | None = None) -> ThresholdResult:
    """Closed-form fast path of ``cher_lb`` for ``m2 = 0``.

    Substituting ``nu* = K/(2*beta) - 1/(2*sigma2)`` gives
    ``log s = (K/2) * (1 - t + log t)`` with ``t = beta / (K*sigma2)``.
    """
    params = NCX2Params(dof, sigma2, 0.0)
    if delta_beta is None:
        delta_beta = default_delta_beta(params)
    _check(epsilon, delta_beta)
    upper = dof * sigma2
    if upper <= delta_beta:
        return ThresholdResult(0.0, Method.CHER, 0, flags=frozenset({"below_resolution"}),
                               bracket=(0.0, upper))
    half_k = 0.5 * dof

    def log_s(beta: float) -> float:
        t = beta / upper
        return half_k * (1.0 - t + math.log(t))

    steps = bisection_steps(upper, delta_beta)
    lo, up = _line_search(log_s, upper, math.log(epsilon), steps)
    flags = frozenset({"below_resolution"}) if lo == 0.0 else frozenset()
    return ThresholdResult(lo, Method.CHER, steps, flags=flags, bracket=(lo, up))


def cher_lb_batch(dof, sigma2, m2, epsilon: float, delta_beta) -> np.ndarray:
    """Vectorized ``cher_lb(...).value`` over arrays of parameters.

    Each element runs exactly the number of halvings the scalar search would,
    so results coincide with ``cher_lb`` element by element.
    """
    dof, sigma2, m2, delta_beta = np.broadcast_arrays(
        np.asarray(dof, float), np.asarray(sigma2, float),
        np.asarray(m2, float), np.asarray(delta_beta, float))
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0,1)")
    if np.any(delta_beta <= 0) or np.any(sigma2 <= 0) or np.any(m2 < 0):
        raise ValueError("invalid batch parameters")
    k_s2 = dof * sigma2
    upper = m2 + k_s2
    steps = np.array([bisection_steps(u, d) for u, d in zip(upper.ravel(), delta_beta.ravel())],
                     dtype=int).reshape(upper.shape)
    lo = np.zeros_like(upper)
    up = upper.copy()
    log_eps = math.log(epsilon)
    for i in range(int(steps.max(initial=0))):
        active = steps > i
        mid = 0.5 * (lo + up)
        root = np.sqrt(k_s2 * k_s2 + 4.0 * mid * m2)
        with np.errstate(divide="ignore", invalid="ignore"):
            nu = ((m2 - mid) + k_s2) / (2.0 * mid * sigma2 * (1.0 + 2.0 * m2 / (root + k_s2)))
            g = 2.0 * sigma2 * nu
            log_s = nu * mid - nu * m2 / (1.0 + g) - 0.5 * dof * np.log1p(g)
        exceed = log_s >= log_eps
        up = np.where(active & exceed, mid, up)
        lo = np.where(active & ~exceed, mid, lo)
    return lo


def poly_lb(params: NCX2Params, epsilon: float) -> ThresholdResult:
    """Polynomial bound ``2*sigma2*(eps*Gamma(K/2+1))**(2/K) * exp(M2/(K*sigma2))``.

    A valid lower bound only for ``m2 = 0``; it overshoots the true
    threshold once the non-centrality is large relative to ``sigma2``.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0,1)")
    k = params.dof
    log_value = (math.log(2.0 * params.sigma2)
                 + (2.0 / k) * (math.log(epsilon) + special.gammaln(0.5 * k + 1.0))
                 + params.m2 / (k * params.sigma2))
    value = math.exp(log_value) if log_value < 709.0 else math.inf
    return ThresholdResult(value, Method.POLY, 0)
