"""Spectro-temporal autocorrelation pitch estimation and voicing clean-up passes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import hyp2f1

from .signal import Frame, get_window
from .voicing import SILENT, UNVOICED, VOICED


@dataclass(frozen=True)
class LagBounds:
    """Inclusive lag search range in samples."""

    n_low: int
    n_high: int

    def __post_init__(self):
        if not 1 <= self.n_low < self.n_high:
            raise ValueError(f"invalid lag bounds [{self.n_low}, {self.n_high}]")

    @classmethod
    def from_frequencies(cls, sample_rate: float, f_min: float, f_max: float,
                         frame_length: int) -> "LagBounds":
        n_low = max(1, math.floor(sample_rate / f_max))
        n_high = min(math.ceil(sample_rate / f_min), frame_length)
        return cls(n_low, n_high)

    @property
    def lags(self) -> np.ndarray:
        return np.arange(self.n_low, self.n_high + 1)


@dataclass(frozen=True)
class PitchObservation:
    index: int
    lag: int
    peak: float


def normalized_acf(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Overlap-normalised autocorrelation for lags ``0..max_lag``.

    ``r(l) = sum x(n) x(n+l) / sqrt(sum_{n<N-l} x(n)^2 * sum_{n>=l} x(n)^2)``;
    lags whose overlap has no energy (or lie beyond the signal) are 0.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    out = np.zeros(max_lag + 1)
    if n == 0:
        return out
    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(x, nfft)
    raw = np.fft.irfft(spec * np.conj(spec), nfft)[:n]
    energy = np.concatenate(([0.0], np.cumsum(x * x)))
    top = min(max_lag, n - 1)
    lags = np.arange(top + 1)
    den = np.sqrt(energy[n - lags] * (energy[n] - energy[lags]))
    # FFT round-off leaves tiny non-zero numerators where the energy is zero
    valid = den > 1e-12 * max(energy[n], 1e-300)
    r = np.zeros(top + 1)
    r[valid] = raw[:top + 1][valid] / den[valid]
    out[:top + 1] = np.clip(r, -1.0, 1.0)
    return out


def energy_normalized_acf(x: np.ndarray) -> np.ndarray:
    """``sum x(n) x(n+l) / sum x(n)^2`` for every lag ``0..len(x)-1`` (0 for a zero signal)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    energy = float(np.dot(x, x))
    if n == 0 or energy <= 0:
        return np.zeros(n)
    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(x, nfft)
    raw = np.fft.irfft(spec * np.conj(spec), nfft)[:n]
    return np.clip(raw / energy, -1.0, 1.0)


def time_acf(frame: Frame | np.ndarray, bounds: LagBounds) -> np.ndarray:
    """Normalised time-domain autocorrelation ``R_t(l)`` over ``bounds.lags``."""
    x = frame.samples if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)
    if x.shape[0] < bounds.n_high:
        raise ValueError("frame is shorter than the largest lag")
    return normalized_acf(x, bounds.n_high)[bounds.n_low:]


def spectral_shifts(bounds: LagBounds, fft_size: int) -> np.ndarray:
    """Fractional bin shift corresponding to each lag: ``fft_size / l``."""
    return fft_size / bounds.lags


def magnitude_spectrum(x: np.ndarray, fft_size: int, window: str = "hann") -> np.ndarray:
    return np.abs(np.fft.rfft(x * get_window(window, x.shape[0]), fft_size))


def _shifted_spectrum_acf(x: np.ndarray, shifts: np.ndarray, fft_size: int,
                          window: str) -> np.ndarray:
    """Energy-normalised ACF of the mean-removed magnitude spectrum at fractional shifts."""
    mag = magnitude_spectrum(x, fft_size, window)
    half = mag.shape[0]
    r = energy_normalized_acf(mag - mag.mean())
    out = np.zeros(shifts.shape[0])
    ok = shifts <= half - 1
    out[ok] = np.interp(shifts[ok], np.arange(half), r)
    return out


def _noise_response(shifts: np.ndarray, frame_length: int, fft_size: int,
                    window: str) -> np.ndarray:
    """Expected ``_shifted_spectrum_acf`` of white noise.

    Bins of windowed Gaussian noise are complex Gaussian with correlation
    ``rho(d)`` fixed by the window. Their magnitudes are Rayleigh, with
    ``E|X||Y| = (pi/4) 2F1(-1/2, -1/2; 1; rho^2)`` per unit power. The
    estimated-mean bias and the shrinking overlap are folded in.
    """
    half = fft_size // 2 + 1
    w2 = get_window(window, frame_length) ** 2
    n = np.arange(frame_length)

    def kernel(d):
        rho = np.abs(np.exp(-2j * np.pi * np.outer(d, n) / fft_size) @ w2) / w2.sum()
        return (np.pi / 4) * (hyp2f1(-0.5, -0.5, 1.0, rho ** 2) - 1) / (1 - np.pi / 4)

    bias = (1 + 2 * kernel(np.arange(1.0, half)).sum()) / half
    return np.where(shifts <= half - 1, (kernel(shifts) - bias) * (half - shifts) / half, 0.0)


def _tone_response(shifts: np.ndarray, frame_length: int, fft_size: int,
                   window: str) -> np.ndarray:
    """``_shifted_spectrum_acf`` of a lone bin-centred partial."""
    tone = np.cos(2 * np.pi * (fft_size // 8) * np.arange(frame_length) / fft_size)
    return _shifted_spectrum_acf(tone, shifts, fft_size, window)


@lru_cache(maxsize=32)
def _baselines(frame_length: int, n_low: int, n_high: int, fft_size: int, window: str):
    # leading entry: one native DFT bin, below every candidate shift
    shifts = np.r_[fft_size / frame_length, spectral_shifts(LagBounds(n_low, n_high), fft_size)]
    tone = _tone_response(shifts, frame_length, fft_size, window)
    noise = _noise_response(shifts, frame_length, fft_size, window)
    for arr in (shifts, tone, noise):
        arr.setflags(write=False)
    return shifts, tone, noise


def spectral_acf(frame: Frame | np.ndarray, bounds: LagBounds, fft_size: int = 2048,
                 window: str = "hann") -> np.ndarray:
    """Frequency-domain autocorrelation ``R_s(l)`` over ``bounds.lags``.

    The windowed magnitude spectrum ``S`` has its mean removed and is then
    correlated with itself shifted by ``fft_size / l`` bins and divided by
    ``sum S^2``. Fractional shifts are linearly interpolated between integer
    shifts so adjacent lags do not collapse onto one value. Shifts past the
    half spectrum give 0.

    Neighbouring bins are correlated through the window, so part of the raw
    value at small shifts (long lags) says nothing about harmonic spacing.
    That part is removed by subtracting a baseline. The baseline blends the
    exact response of a lone partial with the expected response of white
    noise, weighted by where the frame's own value at a one-bin shift falls
    between those two references. A pure tone then no longer prefers its
    sub-harmonics, and noise stays flat across lags.

    Normalising by the zero-shift energy rather than by the overlap energy
    avoids dropping the fundamental's peak from the denominator near the
    true harmonic spacing, which biases the maximum towards higher F0.
    """
    x = frame.samples if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)
    if fft_size < x.shape[0] or fft_size & (fft_size - 1):
        raise ValueError("fft_size must be a power of two no smaller than the frame")
    if not np.any(x):
        return np.zeros(bounds.n_high - bounds.n_low + 1)
    shifts, tone, noise = _baselines(x.shape[0], bounds.n_low, bounds.n_high, fft_size, window)
    r = _shifted_spectrum_acf(x, shifts, fft_size, window)
    tonal = float(np.clip((r[0] - noise[0]) / (tone[0] - noise[0]), 0.0, 1.0))
    base = tonal * tone[1:] + (1.0 - tonal) * noise[1:]
    return np.clip(r[1:] - base, -1.0, 1.0)


def spte_acf(r_t: np.ndarray, r_s: np.ndarray, alpha_r: float = 0.5):
    """Blend time and spectral ACFs and pick the peak.

    Returns ``(r_st, offset)`` where ``offset`` indexes the maximum of
    ``r_st``; ties go to the smallest lag.
    """
    r_t = np.asarray(r_t, dtype=np.float64)
    r_s = np.asarray(r_s, dtype=np.float64)
    if r_t.shape != r_s.shape:
        raise ValueError("R_t and R_s must cover the same lags")
    r_st = alpha_r * r_t + (1.0 - alpha_r) * r_s
    return r_st, int(np.argmax(r_st))


def estimate_pitch(frame: Frame, bounds: LagBounds, alpha_r: float = 0.5,
                   fft_size: int = 2048, window: str = "hann"):
    """Pitch-period observation for one frame; also returns ``R_st`` for debugging."""
    r_st, i = spte_acf(time_acf(frame, bounds),
                       spectral_acf(frame, bounds, fft_size, window), alpha_r)
    return PitchObservation(frame.index, bounds.n_low + i, float(r_st[i])), r_st


def _is_voiced(labels: np.ndarray) -> np.ndarray:
    return np.asarray(labels) == VOICED


def fill_isolated_unvoiced(labels: np.ndarray) -> np.ndarray:
    """Mark single non-voiced frames flanked by voiced frames as voiced."""
    labels = np.array(labels, copy=True)
    v = _is_voiced(labels)
    gap = np.zeros_like(v)
    gap[1:-1] = v[:-2] & ~v[1:-1] & v[2:]
    labels[gap] = VOICED
    return labels


def reject_boundary_lags(labels: np.ndarray, lags: np.ndarray, bounds: LagBounds) -> np.ndarray:
    """Unvoice frames whose lag sits on either end of the search range."""
    labels = np.array(labels, copy=True)
    lags = np.asarray(lags)
    hit = _is_voiced(labels) & ((lags == bounds.n_low) | (lags == bounds.n_high))
    labels[hit] = UNVOICED
    return labels


def drop_isolated_voiced(labels: np.ndarray) -> np.ndarray:
    """Unvoice single voiced frames; the track edges count as unvoiced."""
    labels = np.array(labels, copy=True)
    v = np.concatenate(([False], _is_voiced(labels), [False]))
    lone = v[1:-1] & ~v[:-2] & ~v[2:]
    labels[lone] = UNVOICED
    return labels


def postprocess_voicing(labels: np.ndarray, lags: np.ndarray, bounds: LagBounds):
    """Run the three clean-up passes on a frame labelling.

    ``lags`` must hold an observation for every frame that is voiced after
    the first pass (other entries are ignored). Gaps of a single frame that
    the boundary-lag pass opens inside a voiced run are bridged again so no
    length-one segment survives; such frames carry no observation.

    Returns
    -------
    labels : ndarray
        Final per-frame labels.
    bridged : ndarray of bool
        Voiced frames without a usable lag observation.
    """
    labels = fill_isolated_unvoiced(labels)
    after_rejection = reject_boundary_lags(labels, lags, bounds)
    labels = drop_isolated_voiced(after_rejection)
    final = fill_isolated_unvoiced(labels)
    bridged = _is_voiced(final) & ~_is_voiced(labels)
    return final, bridged


__all__ = [
    "LagBounds", "PitchObservation", "normalized_acf", "time_acf", "spectral_acf",
    "spectral_shifts", "energy_normalized_acf", "spte_acf", "estimate_pitch", "fill_isolated_unvoiced",
    "reject_boundary_lags", "drop_isolated_voiced", "postprocess_voicing",
    "SILENT", "UNVOICED", "VOICED",
]
