"""Beamforming-gain prediction over a first-order Markov MIMO channel.

The transmitter knows a stale channel ``H_t`` (N receive x M transmit
antennas) and transmits one stream with matched-filter weights
``w ~ H_t^H 1_N``. At transmission time the channel has evolved to
``H_{t+tau} = rho * H_t + Omega`` with ``Omega`` i.i.d. ``CN(0, 1 - rho**2)``,
and the receiver combines to a gain ``beta = ||H_{t+tau} w||**2``. Given
``H_t`` and ``w``, ``beta`` is non-central chi-squared with ``K = 2N``,
``sigma2 = (1 - rho**2) ||w||**2 / 2`` and ``M2 = rho**2 ||H_t w||**2``.

``CN(0, s)`` here always means independent real and imaginary parts, each
``N(0, s/2)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import bounds
from .approximations import APPROXIMATIONS, DEFAULT_RATIO_SWITCH, approx_threshold
from .bounds import Method, ThresholdResult, cher_lb
from .ncx2 import NCX2Params, exact_threshold

__all__ = [
    "SPEED_OF_LIGHT",
    "InfeasiblePowerError",
    "MarkovChannelConfig",
    "GainModel",
    "OutageEstimate",
    "SimConfig",
    "ExperimentResult",
    "doppler_rho",
    "rayleigh_channel",
    "evolve_channel",
    "mf_beamformer",
    "gain_model",
    "realized_gain",
    "predict_gain_lb",
    "adapt_energy",
    "mrc_baseline_params",
    "sample_realized_gains",
    "wilson_interval",
    "run_outage_experiment",
    "SIM_METHODS",
]

SPEED_OF_LIGHT = 299_792_458.0
BLOCK_TRIALS = 4096
SIM_METHODS = ("cher", "poly", "hybrid", "exact", "oracle",
               "aty_first", "aty_closer", "sankaran_z1", "sankaran_z2")


class InfeasiblePowerError(ValueError):
    """No finite symbol energy meets the target (predicted gain is zero)."""


def doppler_rho(carrier_hz: float, velocity_mps: float, lag_s: float) -> float:
    """Channel correlation ``J0(2 pi f_d tau)`` with ``f_d = v f_c / c``."""
    if not carrier_hz > 0:
        raise ValueError("carrier frequency must be positive")
    if velocity_mps < 0 or lag_s < 0:
        raise ValueError("velocity and lag must be non-negative")
    f_d = velocity_mps * carrier_hz / SPEED_OF_LIGHT
    return float(special.j0(2.0 * math.pi * f_d * lag_s))


@dataclass(frozen=True)
class MarkovChannelConfig:
    carrier_hz: float = 3.5e9
    velocity_mps: float = 20.0
    lag_s: float = 5e-4
    rho: float = field(init=False)
    sigma_omega2: float = field(init=False)

    def __post_init__(self):
        rho = doppler_rho(self.carrier_hz, self.velocity_mps, self.lag_s)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "sigma_omega2", 1.0 - rho * rho)


def _complex_normal(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    scale = math.sqrt(0.5 * variance)
    return scale * rng.standard_normal(shape) + 1j * (scale * rng.standard_normal(shape))


def rayleigh_channel(n_rx: int, n_tx: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """I.i.d. ``CN(0, 1)`` channel matrix (or a stack of ``size`` of them)."""
    shape = (n_rx, n_tx) if size is None else (size, n_rx, n_tx)
    return _complex_normal(rng, shape, 1.0)


def evolve_channel(h_t: np.ndarray, cfg: MarkovChannelConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.sigma_omega2 == 0.0:
        return np.array(h_t, dtype=complex, copy=True)
    return cfg.rho * h_t + _complex_normal(rng, np.shape(h_t), cfg.sigma_omega2)


def mf_beamformer(h_t: np.ndarray, normalization: str = "effective") -> np.ndarray:
    """Matched-filter beam ``H_t^H 1_N``, scaled to unit effective gain.

    ``normalization="effective"`` enforces ``||H_t w|| = 1`` so the realized
    gain is normalized and its massive-MIMO limit is ``rho**2``;
    ``"unit"`` enforces ``||w|| = 1`` instead.
    """
    h_t = np.asarray(h_t, dtype=complex)
    beam = h_t.conj().sum(axis=0)
    if normalization == "effective":
        norm = np.linalg.norm(h_t @ beam)
    elif normalization == "unit":
        norm = np.linalg.norm(beam)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError("degenerate channel: matched-filter beam is zero")
    return beam / norm


@dataclass(frozen=True)
class GainModel:
    """Conditional distribution of the realized gain given ``H_t`` and ``w``.

    With no channel innovation (``sigma2 == 0``) the gain is the constant ``m2``.
    """

    dof: int
    sigma2: float
    m2: float
    beam: np.ndarray = field(repr=False, compare=False)
    rho: float = 1.0

    @property
    def deterministic(self) -> bool:
        return self.sigma2 == 0.0

    @property
    def params(self) -> NCX2Params:
        if self.deterministic:
            raise ValueError("deterministic gain model has no chi-squared parameters")
        return NCX2Params(self.dof, self.sigma2, self.m2)


def gain_model(h_t: np.ndarray, w: np.ndarray, cfg: MarkovChannelConfig) -> GainModel:
    h_t = np.asarray(h_t, dtype=complex)
    w = np.asarray(w, dtype=complex)
    w_energy = float(np.vdot(w, w).real)
    if not w_energy > 0:
        raise ValueError("beamformer must be non-zero")
    m2 = cfg.rho**2 * float(np.sum(np.abs(h_t @ w) ** 2))
    sigma2 = cfg.sigma_omega2 * w_energy / 2.0
    return GainModel(2 * h_t.shape[0], sigma2, m2, w, cfg.rho)


def realized_gain(h_next: np.ndarray, w: np.ndarray) -> float:
    return float(np.sum(np.abs(np.asarray(h_next) @ np.asarray(w)) ** 2))


def predict_gain_lb(model: GainModel, epsilon: float, delta_beta: float | None = 1e-10) -> ThresholdResult:
    if model.deterministic:
        if not 0.0 < epsilon < 1.0:
            raise ValueError("epsilon must lie in (0,1)")
        return ThresholdResult(model.m2, Method.CHER, 0, flags=frozenset({"deterministic"}))
    return cher_lb(model.params, epsilon, delta_beta)


def adapt_energy(snr_target: float, gain_lb: float, noise_var: float) -> float:
    """Symbol energy ``snr_target * noise_var / gain_lb``."""
    if not snr_target > 0 or not noise_var > 0:
        raise ValueError("snr_target and noise_var must be positive")
    if not gain_lb > 0:
        raise InfeasiblePowerError("predicted gain is zero; no finite energy meets the target")
    return snr_target * noise_var / gain_lb


def mrc_baseline_params(n_rx: int) -> NCX2Params:
    """Receive-only MRC gain under unit-variance Rayleigh fading."""
    if n_rx < 1:
        raise ValueError("n_rx must be at least 1")
    return NCX2Params(2 * n_rx, 0.5, 0.0)


def sample_realized_gains(h_t: np.ndarray, w: np.ndarray, cfg: MarkovChannelConfig,
                          n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` realized gains ``||(rho H_t + Omega) w||**2`` from full innovation draws."""
    h_t = np.asarray(h_t, dtype=complex)
    w = np.asarray(w, dtype=complex)
    n_rx, n_tx = h_t.shape
    mean_part = cfg.rho * (h_t @ w)
    out = np.empty(n)
    rows = max(1, (1 << 20) // (n_rx * n_tx))
    for start in range(0, n, rows):
        stop = min(n, start + rows)
        omega = _complex_normal(rng, (stop - start, n_rx, n_tx), cfg.sigma_omega2)
        alpha = mean_part + omega @ w
        out[start:stop] = np.sum(alpha.real**2 + alpha.imag**2, axis=1)
    return out


@dataclass(frozen=True)
class OutageEstimate:
    failures: int
    trials: int
    rate: float
    ci95: tuple[float, float]


def wilson_interval(failures: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials < 1:
        raise ValueError("trials must be positive")
    if not 0 <= failures <= trials:
        raise ValueError("failures must lie in [0, trials]")
    z = float(special.ndtri(0.5 + 0.5 * confidence))
    p = failures / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lower = 0.0 if failures == 0 else max(0.0, center - half)
    upper = 1.0 if failures == trials else min(1.0, center + half)
    return lower, upper


def outage_estimate(failures: int, trials: int) -> OutageEstimate:
    return OutageEstimate(failures, trials, failures / trials, wilson_interval(failures, trials))


@dataclass(frozen=True)
class SimConfig:
    n_tx: int = 16
    n_rx: int = 4
    channel: MarkovChannelConfig = field(default_factory=MarkovChannelConfig)
    epsilon: float = 1e-6
    method: str = "cher"
    trials: int = 10_000
    seed: int = 0
    delta_beta: float = 1e-10
    ratio_switch: float = DEFAULT_RATIO_SWITCH
    normalization: str = "effective"
    workers: int = 1
    keep_trials: bool = False

    def __post_init__(self):
        if self.n_tx < 1 or self.n_rx < 1:
            raise ValueError("antenna counts must be positive")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0,1)")
        if self.method not in SIM_METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(SIM_METHODS)}")
        if not self.delta_beta > 0:
            raise ValueError("delta_beta must be positive")


@dataclass
class ExperimentResult:
    config: SimConfig
    outage: OutageEstimate
    infeasible: int
    mean_threshold: float
    median_threshold: float
    mean_inv_threshold: float
    mean_inv_gain: float
    thresholds: np.ndarray | None = None
    gains: np.ndarray | None = None
    m2: np.ndarray | None = None
    sigma2: np.ndarray | None = None

    def summary(self) -> dict:
        return {
            "n_tx": self.config.n_tx,
            "n_rx": self.config.n_rx,
            "method": self.config.method,
            "epsilon": self.config.epsilon,
            "trials": self.config.trials,
            "seed": self.config.seed,
            "rho": self.config.channel.rho,
            "rho2": self.config.channel.rho**2,
            "failures": self.outage.failures,
            "outage_rate": self.outage.rate,
            "outage_ci95": list(self.outage.ci95),
            "infeasible": self.infeasible,
            "mean_threshold": self.mean_threshold,
            "median_threshold": self.median_threshold,
            "mean_inv_threshold": self.mean_inv_threshold,
            "mean_inv_gain": self.mean_inv_gain,
        }


def _thresholds(cfg: SimConfig, dof: int, sigma2: np.ndarray, m2: np.ndarray,
                gains: np.ndarray) -> np.ndarray:
    method = cfg.method
    if method == "oracle":
        return gains.copy()
    if method == "cher":
        return bounds.cher_lb_batch(dof, sigma2, m2, cfg.epsilon, cfg.delta_beta)
    if method == "poly":
        return np.array([bounds.poly_lb(NCX2Params(dof, s, m), cfg.epsilon).value
                         for s, m in zip(sigma2, m2)])
    if method == "hybrid":
        out = bounds.cher_lb_batch(dof, sigma2, m2, cfg.epsilon, cfg.delta_beta)
        switch = m2 / sigma2 > cfg.ratio_switch
        for i in np.flatnonzero(switch):
            out[i] = approx_threshold(NCX2Params(dof, sigma2[i], m2[i]), cfg.epsilon,
                                      Method.SANKARAN_Z2).value
        return out
    if method == "exact":
        return np.array([exact_threshold(NCX2Params(dof, s, m), cfg.epsilon)
                         for s, m in zip(sigma2, m2)])
    kind = Method(method)
    assert kind in APPROXIMATIONS
    return np.array([approx_threshold(NCX2Params(dof, s, m), cfg.epsilon, kind).value
                     for s, m in zip(sigma2, m2)])


def _run_block(cfg: SimConfig, block: int, count: int):
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(block,)))
    ch = cfg.channel
    h = rayleigh_channel(cfg.n_rx, cfg.n_tx, rng, size=count)
    beam = h.conj().sum(axis=1)
    eff = np.einsum("bnm,bm->bn", h, beam)
    if cfg.normalization == "effective":
        norm = np.linalg.norm(eff, axis=1)
    elif cfg.normalization == "unit":
        norm = np.linalg.norm(beam, axis=1)
    else:
        raise ValueError(f"unknown normalization {cfg.normalization!r}")
    w = beam / norm[:, None]
    eff = eff / norm[:, None]
    m2 = ch.rho**2 * np.sum(np.abs(eff) ** 2, axis=1)
    sigma2 = ch.sigma_omega2 * np.sum(np.abs(w) ** 2, axis=1) / 2.0
    h_next = ch.rho * h + _complex_normal(rng, h.shape, ch.sigma_omega2)
    alpha = np.einsum("bnm,bm->bn", h_next, w)
    gains = np.sum(alpha.real**2 + alpha.imag**2, axis=1)
    if ch.sigma_omega2 == 0.0:
        thresholds = m2.copy()
    else:
        thresholds = _thresholds(cfg, 2 * cfg.n_rx, sigma2, m2, gains)
    return thresholds, gains, m2, sigma2


def run_outage_experiment(cfg: SimConfig) -> ExperimentResult:
    """Monte-Carlo outage and power statistics.

    Trials are processed in fixed blocks of ``BLOCK_TRIALS``; block ``b``
    draws from ``SeedSequence(seed, spawn_key=(b,))``, so results do not
    depend on ``workers``.
    """
    blocks = [(b, min(BLOCK_TRIALS, cfg.trials - b * BLOCK_TRIALS))
              for b in range(math.ceil(cfg.trials / BLOCK_TRIALS))]
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(lambda bc: _run_block(cfg, *bc), blocks))
    else:
        parts = [_run_block(cfg, b, c) for b, c in blocks]
    thresholds, gains, m2, sigma2 = (np.concatenate(x) for x in zip(*parts))
    feasible = thresholds > 0
    failures = int(np.count_nonzero(gains < thresholds))
    inv = 1.0 / thresholds[feasible]
    return ExperimentResult(
        config=cfg,
        outage=outage_estimate(failures, cfg.trials),
        infeasible=int(np.count_nonzero(~feasible)),
        mean_threshold=float(np.mean(thresholds)),
        median_threshold=float(np.median(thresholds)),
        mean_inv_threshold=float(np.mean(inv)) if inv.size else math.inf,
        mean_inv_gain=float(np.mean(1.0 / gains)),
        thresholds=thresholds if cfg.keep_trials else None,
        gains=gains if cfg.keep_trials else None,
        m2=m2 if cfg.keep_trials else None,
        sigma2=sigma2 if cfg.keep_trials else None,
    )
