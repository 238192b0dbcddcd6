"""Gaussianizing approximations of the outage threshold.

Each approximation maps ``X = beta / sigma2 ~ chi2'(k, lam)`` through a power
transform that is treated as Gaussian, then reads the threshold off the
Gaussian quantile ``z`` of the lower-tail probability ``epsilon``.

Transforms (cumulants of X: ``mu = k + lam``, ``k2 = 2(k + 2 lam)``,
``k3 = 8(k + 3 lam)``; ``e = X/mu - 1`` has ``c2 = k2/mu**2``, ``c3 = k3/mu**3``):

aty_first
    Cube root (Abdel-Aty, first approximation). ``(X/mu)**(1/3)`` is normal
    with mean ``1 - c2/9`` and variance ``c2/9``.
aty_closer
    Cube root refined to second order (Abdel-Aty, closer approximation):
    mean ``1 - c2/9 + 5 c3/81 - 10 c2**2/81``, variance
    ``c2/9 - 2 c3/27 + 4 c2**2/27`` and a Cornish-Fisher skewness term from
    the third cumulant ``c3/27 - 2 c2**2/27``.
sankaran_z1
    Square root (Sankaran, z1): ``sqrt(X - (k-1)/2) - sqrt(lam + (k-1)/2)``
    is standard normal.
sankaran_z2
    Square root (Sankaran, z2): z1 divided by the standard deviation
    ``sqrt((k + 2 lam) / (2 lam + k + 1))`` of ``sqrt(X - (k-1)/2)``.

When the Gaussian quantile of the transformed variable is negative the
threshold has no valid preimage; it is clamped to 0 and flagged, and the
signed back-transform is kept in ``raw_value``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from scipy import special

from .bounds import Method, ThresholdResult, cher_lb
from .ncx2 import NCX2Params

__all__ = [
    "APPROXIMATIONS",
    "GaussianApprox",
    "gaussian_q",
    "gaussian_q_inv",
    "approx_threshold",
    "hybrid_threshold",
]

DEFAULT_RATIO_SWITCH = 120.0


def gaussian_q(x: float) -> float:
    """Standard normal upper-tail probability ``P(Z > x)``."""
    return float(special.ndtr(-x))


def gaussian_q_inv(p: float) -> float:
    """Inverse of :func:`gaussian_q`."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0,1)")
    if p > 0.5:
        return float(special.ndtri(1.0 - p))
    return float(-special.ndtri(p))


def _signed_power(y: float, power: int) -> float:
    return math.copysign(abs(y) ** power, y)


def _aty_first(k: int, lam: float, z: float) -> tuple[float, float]:
    mu = k + lam
    c2 = 2.0 * (k + 2.0 * lam) / mu**2
    y = 1.0 - c2 / 9.0 + z * math.sqrt(c2 / 9.0)
    return y, mu * _signed_power(y, 3)


def _aty_closer(k: int, lam: float, z: float) -> tuple[float, float]:
    mu = k + lam
    c2 = 2.0 * (k + 2.0 * lam) / mu**2
    c3 = 8.0 * (k + 3.0 * lam) / mu**3
    m = 1.0 - c2 / 9.0 + 5.0 * c3 / 81.0 - 10.0 * c2**2 / 81.0
    v = c2 / 9.0 - 2.0 * c3 / 27.0 + 4.0 * c2**2 / 27.0
    skew = (c3 / 27.0 - 2.0 * c2**2 / 27.0) / v**1.5
    y = m + math.sqrt(v) * (z + skew * (z * z - 1.0) / 6.0)
    return y, mu * _signed_power(y, 3)


def _sankaran_z1(k: int, lam: float, z: float) -> tuple[float, float]:
    shift = 0.5 * (k - 1)
    r = z + math.sqrt(lam + shift)
    return r, shift + _signed_power(r, 2)


def _sankaran_z2(k: int, lam: float, z: float) -> tuple[float, float]:
    shift = 0.5 * (k - 1)
    sd = math.sqrt((k + 2.0 * lam) / (2.0 * lam + k + 1.0))
    r = z * sd + math.sqrt(lam + shift)
    return r, shift + _signed_power(r, 2)


@dataclass(frozen=True)
class GaussianApprox:
    """``inverse(k, lam, z)`` returns ``(transformed quantile, X threshold)``."""

    kind: Method
    transform: str
    inverse: Callable[[int, float, float], tuple[float, float]]


APPROXIMATIONS = {
    Method.ATY_FIRST: GaussianApprox(Method.ATY_FIRST, "cube-root", _aty_first),
    Method.ATY_CLOSER: GaussianApprox(Method.ATY_CLOSER, "cube-root", _aty_closer),
    Method.SANKARAN_Z1: GaussianApprox(Method.SANKARAN_Z1, "square-root", _sankaran_z1),
    Method.SANKARAN_Z2: GaussianApprox(Method.SANKARAN_Z2, "square-root", _sankaran_z2),
}


def approx_threshold(params: NCX2Params, epsilon: float, kind) -> ThresholdResult:
    try:
        approx = APPROXIMATIONS[Method(kind)]
    except (ValueError, KeyError):
        raise ValueError(f"unknown approximation kind: {kind!r}") from None
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0,1)")
    std = params.standardized()
    z = -gaussian_q_inv(epsilon)
    root, x = approx.inverse(std.k, std.lam, z)
    raw = x * std.scale
    if root < 0.0 or raw < 0.0:
        return ThresholdResult(0.0, approx.kind, 0, flags=frozenset({"clamped"}), raw_value=raw)
    return ThresholdResult(raw, approx.kind, 0, raw_value=raw)


def hybrid_threshold(params: NCX2Params, epsilon: float,
                     ratio_switch: float = DEFAULT_RATIO_SWITCH,
                     delta_beta: float | None = None) -> ThresholdResult:
    """z2 approximation when ``m2/sigma2 > ratio_switch``, Chernoff bound otherwise."""
    if not ratio_switch > 0:
        raise ValueError("ratio_switch must be positive")
    if params.lam > ratio_switch:
        base = approx_threshold(params, epsilon, Method.SANKARAN_Z2)
        branch = "z2_branch"
    else:
        base = cher_lb(params, epsilon, delta_beta)
        branch = "cher_branch"
    return ThresholdResult(base.value, Method.HYBRID, base.iterations,
                           flags=base.flags | {branch}, bracket=base.bracket,
                           raw_value=base.raw_value)
