"""Forward/backward scalar Kalman smoothing of pitch-period observations.

The state is the pitch period in samples. Each direction runs a random-walk
Kalman filter whose observation variance is re-estimated online from the
recent residuals of the observations against an exponentially smoothed mean.
The two passes are then combined per frame with inverse-variance weights.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class KalmanConfig:
    sigma2_delta0: float = 0.06
    l_window: int = 8
    alpha: float = 0.95
    p0_init: Optional[float] = None
    var_floor: float = 1e-6
    var_cap: float = 1e12

    def __post_init__(self):
        if not self.sigma2_delta0 > 0:
            raise ValueError("sigma2_delta0 must be positive")
        if self.l_window < 2:
            raise ValueError("l_window must be at least 2")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.p0_init is not None and not self.p0_init > 0:
            raise ValueError("p0_init must be positive")

    @property
    def initial_error_variance(self) -> float:
        return 10.0 * self.sigma2_delta0 if self.p0_init is None else self.p0_init


@dataclass(frozen=True)
class KalmanState:
    estimate: float
    variance: float
    gain: float = 1.0


@dataclass(frozen=True)
class ObservationStats:
    """Running mean and windowed residual variance of the observations."""

    mean: float
    variance: float
    residuals: tuple = ()

    @classmethod
    def start(cls, first_obs: float, cfg: KalmanConfig) -> "ObservationStats":
        return cls(mean=float(first_obs), variance=cfg.sigma2_delta0, residuals=(0.0,))


def update_observation_stats(stats: ObservationStats, n_k: float,
                             cfg: KalmanConfig) -> ObservationStats:
    """Fold observation ``n_k`` into the running mean and residual window.

    The residual of each observation is taken against the mean as updated
    at that observation's time; the variance is the mean squared residual
    over the last ``l_window`` observations (fewer at start-up).
    """
    mean = cfg.alpha * n_k + (1.0 - cfg.alpha) * stats.mean
    window = deque(stats.residuals, maxlen=cfg.l_window)
    window.append(n_k - mean)
    res = tuple(window)
    return ObservationStats(mean, float(np.mean(np.square(res))), res)


def kf_step(state: KalmanState, n_k: float, sigma2_obs: float,
            cfg: KalmanConfig) -> KalmanState:
    """One random-walk predict/correct cycle."""
    if sigma2_obs < 0:
        raise ValueError("observation variance must be non-negative")
    n_pred = state.estimate
    p_pred = state.variance + cfg.sigma2_delta0
    if np.isinf(sigma2_obs):
        g = 0.0
    elif p_pred + sigma2_obs == 0:
        g = 1.0
    else:
        g = p_pred / (p_pred + sigma2_obs)
    return KalmanState(n_pred + g * (n_k - n_pred), (1.0 - g) * p_pred, g)


@dataclass
class FilterResult:
    """Per-observation output of one filtering direction."""

    estimate: np.ndarray
    obs_variance: np.ndarray
    error_variance: np.ndarray
    gain: np.ndarray

    def reversed(self) -> "FilterResult":
        return FilterResult(self.estimate[::-1].copy(), self.obs_variance[::-1].copy(),
                            self.error_variance[::-1].copy(), self.gain[::-1].copy())


def run_forward(observations, cfg: KalmanConfig = KalmanConfig()) -> FilterResult:
    """Filter a sequence of lag observations in order.

    NaN entries mark frames without an observation: the filter predicts
    through them and the variance statistics are left untouched.
    """
    obs = np.asarray(observations, dtype=np.float64)
    n = obs.shape[0]
    if n == 0:
        raise ValueError("no observations to filter")
    if np.isnan(obs[0]) or np.isnan(obs[-1]):
        raise ValueError("the first and last observations must be present")

    est = np.empty(n)
    obs_var = np.empty(n)
    err_var = np.empty(n)
    gains = np.empty(n)

    stats = ObservationStats.start(obs[0], cfg)
    state = KalmanState(float(obs[0]), cfg.initial_error_variance, 1.0)
    est[0], obs_var[0], err_var[0], gains[0] = state.estimate, stats.variance, state.variance, 1.0
    for k in range(1, n):
        if np.isnan(obs[k]):
            state = kf_step(state, state.estimate, np.inf, cfg)
        else:
            stats = update_observation_stats(stats, obs[k], cfg)
            r = min(max(stats.variance, cfg.var_floor), cfg.var_cap)
            state = kf_step(state, obs[k], r, cfg)
        est[k], obs_var[k], err_var[k], gains[k] = (
            state.estimate, stats.variance, state.variance, state.gain)
    return FilterResult(est, obs_var, err_var, gains)


def run_backward(observations, cfg: KalmanConfig = KalmanConfig()) -> FilterResult:
    """Same as :func:`run_forward` on the time-reversed sequence, output in original order."""
    obs = np.asarray(observations, dtype=np.float64)
    return run_forward(obs[::-1], cfg).reversed()


def fuse(f, var_f, b, var_b):
    """Inverse-variance weighted mean of forward and backward estimates.

    Where both variances are zero the plain average is returned.
    Works elementwise on arrays.
    """
    f, var_f, b, var_b = (np.asarray(a, dtype=np.float64) for a in (f, var_f, b, var_b))
    if np.any(var_f < 0) or np.any(var_b < 0):
        raise ValueError("variances must be non-negative")
    total = var_f + var_b
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(total > 0, (var_b * f + var_f * b) / np.where(total > 0, total, 1.0),
                       0.5 * (f + b))
    # the weighted form can round a hair outside [min, max]
    out = np.clip(out, np.minimum(f, b), np.maximum(f, b))
    return out if out.ndim else float(out)


def to_frequency(lags, sample_rate: float, f_min: float = 60.0, f_max: float = 460.0):
    """Convert pitch periods in samples to Hz, clamped to ``[f_min, f_max]``."""
    lags = np.asarray(lags, dtype=np.float64)
    if np.any(~(lags > 0)):
        raise ValueError("pitch periods must be positive")
    out = np.clip(sample_rate / lags, f_min, f_max)
    return out if out.ndim else float(out)


@dataclass
class ForwardBackwardResult:
    fused: np.ndarray
    forward: FilterResult
    backward: FilterResult


def smooth(observations, cfg: KalmanConfig = KalmanConfig()) -> ForwardBackwardResult:
    """Run both passes over the observation sequence and fuse them."""
    fwd = run_forward(observations, cfg)
    bwd = run_backward(observations, cfg)
    return ForwardBackwardResult(
        fuse(fwd.estimate, fwd.obs_variance, bwd.estimate, bwd.obs_variance), fwd, bwd)


@dataclass
class PitchTrack:
    """Per-frame voicing and F0 (NaN where unvoiced).

    ``lag`` holds the fused pitch period in samples when the track came out
    of the tracker; ``diagnostics`` carries optional per-frame columns.
    """

    sample_rate: int
    hop_length: int
    voiced: np.ndarray
    f0: np.ndarray
    lag: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.voiced = np.asarray(self.voiced, dtype=bool)
        self.f0 = np.asarray(self.f0, dtype=np.float64)
        if self.voiced.shape != self.f0.shape:
            raise ValueError("voiced and f0 must have one entry per frame")

    def __len__(self):
        return self.voiced.shape[0]

    @property
    def frame_period(self) -> float:
        return self.hop_length / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.hop_length / self.sample_rate

    def scaled(self, factor: float) -> "PitchTrack":
        return replace(self, f0=self.f0 * factor)
