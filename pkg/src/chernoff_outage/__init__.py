"""Outage thresholds of non-central chi-squared variables and MIMO gain prediction."""

__version__ = "0.1.0"

from .approximations import approx_threshold, gaussian_q, gaussian_q_inv, hybrid_threshold
from .bounds import (
    Method,
    ThresholdResult,
    cher_lb,
    cher_lb_batch,
    cher_lb_central,
    chernoff_s_log,
    nu_star,
    poly_lb,
)
from .ncx2 import (
    NCX2Params,
    NumericalError,
    StandardizedParams,
    cdf,
    exact_threshold,
    marcum_q,
    mean,
    pdf,
    sample,
    variance,
)

__all__ = [
    "Method",
    "NCX2Params",
    "NumericalError",
    "StandardizedParams",
    "ThresholdResult",
    "approx_threshold",
    "cdf",
    "cher_lb",
    "cher_lb_batch",
    "cher_lb_central",
    "chernoff_s_log",
    "exact_threshold",
    "gaussian_q",
    "gaussian_q_inv",
    "hybrid_threshold",
    "marcum_q",
    "mean",
    "nu_star",
    "pdf",
    "poly_lb",
    "sample",
    "variance",
]
