"""Unsupervised per-utterance voiced/unvoiced classification.

Each frame is summarised by five scores in [-1, 1] that lean towards +1 for
voiced speech. The utterance's feature vectors are split into two classes by
k-means started from the -1 and +1 corner vectors, a Fisher discriminant is
fitted to that split, and frames are labelled by the sign of their projection.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .signal import Frame, get_window

SILENT, UNVOICED, VOICED = 0, 1, 2
LABEL_NAMES = {SILENT: "silent", UNVOICED: "unvoiced", VOICED: "voiced"}

FEATURE_NAMES = (
    "periodic_similarity",
    "zcr_score",
    "spectrum_tilt",
    "preemph_energy_ratio",
    "lowband_ratio",
)
NUM_FEATURES = len(FEATURE_NAMES)

# P_x at or below this is treated as digital silence whatever the threshold
POWER_FLOOR = 1e-12


class DegenerateClassificationError(ValueError):
    """Clustering or discriminant fitting cannot separate two classes.

    ``empty_class`` names the class (0 unvoiced, 1 voiced) that ended up with
    no members, or is None when the failure has another cause.
    """

    def __init__(self, message, empty_class=None):
        super().__init__(message)
        self.empty_class = empty_class


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int
    n_low: int
    n_high: int
    preemph: float = 0.97
    lowband_cutoff_hz: float = 1000.0
    zcr_mid_hz: float = 2000.0
    fft_size: int = 2048
    window: str = "hann"


@dataclass(frozen=True)
class FeatureVector:
    v: np.ndarray
    is_silent: bool = False


@dataclass
class ClusterModel:
    m0: np.ndarray
    m1: np.ndarray
    labels: np.ndarray
    S_w: np.ndarray
    n_iter: int = 0


@dataclass
class VoicingTrack:
    labels: np.ndarray
    scores: np.ndarray

    def __len__(self):
        return self.labels.shape[0]

    @property
    def voiced(self) -> np.ndarray:
        return self.labels == VOICED


def power_gate(frames: Sequence[Frame], ratio: float = 0.3) -> np.ndarray:
    """Flag frames whose power is below ``ratio`` times the utterance mean."""
    if len(frames) == 0:
        raise ValueError("power_gate needs at least one frame")
    p = np.array([f.power for f in frames])
    return (p < ratio * p.mean()) | (p <= POWER_FLOOR)


def _clamp(x: float) -> float:
    return float(min(1.0, max(-1.0, x)))


def periodic_similarity(x: np.ndarray, n_low: int, n_high: int) -> float:
    from .acf import normalized_acf

    x = x - x.mean()
    r = normalized_acf(x, n_high)[n_low:n_high + 1]
    return _clamp(2.0 * float(r.max()) - 1.0)


def zcr_score(x: np.ndarray, sample_rate: int, mid_hz: float) -> float:
    """Zero-crossing rate mapped linearly so a rate of ``2*mid_hz/fs`` scores 0."""
    crossings = np.count_nonzero(np.signbit(x[1:]) != np.signbit(x[:-1]))
    rate = crossings / (x.shape[0] - 1)
    return _clamp(1.0 - rate * sample_rate / (2.0 * mid_hz))


def spectrum_tilt(x: np.ndarray) -> float:
    return _clamp(float(np.dot(x[:-1], x[1:]) / np.dot(x, x)))


def preemph_energy_ratio(x: np.ndarray, coeff: float) -> float:
    y = x.copy()
    y[1:] -= coeff * x[:-1]
    return _clamp(1.0 - 2.0 * float(np.dot(y, y) / np.dot(x, x)))


def lowband_ratio(x: np.ndarray, sample_rate: int, cutoff_hz: float, fft_size: int,
                  window: str) -> float:
    power = np.abs(np.fft.rfft(x * get_window(window, x.shape[0]), fft_size)) ** 2
    total = power.sum()
    if total <= 0:
        return -1.0
    freqs = np.fft.rfftfreq(fft_size, 1.0 / sample_rate)
    return _clamp(2.0 * float(power[freqs < cutoff_hz].sum() / total) - 1.0)


def extract_features(frame: Frame | np.ndarray, silent: bool, cfg: FeatureConfig) -> FeatureVector:
    """Five voicing scores for one frame; silent or energy-less frames get all -1."""
    x = frame.samples if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)
    if x.shape[0] < 2 * cfg.n_low:
        raise ValueError("frame must be at least twice the shortest lag")
    if silent or not np.dot(x, x) > 0:
        return FeatureVector(-np.ones(NUM_FEATURES), bool(silent))
    v = np.array([
        periodic_similarity(x, cfg.n_low, min(cfg.n_high, x.shape[0] - 1)),
        zcr_score(x, cfg.sample_rate, cfg.zcr_mid_hz),
        spectrum_tilt(x),
        preemph_energy_ratio(x, cfg.preemph),
        lowband_ratio(x, cfg.sample_rate, cfg.lowband_cutoff_hz, cfg.fft_size, cfg.window),
    ])
    return FeatureVector(v, False)


def feature_matrix(features: Sequence[FeatureVector]) -> np.ndarray:
    return np.array([f.v for f in features], dtype=np.float64).reshape(len(features), -1)


def within_class_scatter(X: np.ndarray, labels: np.ndarray, m0, m1) -> np.ndarray:
    d0 = X[labels == 0] - m0
    d1 = X[labels == 1] - m1
    S = d0.T @ d0 + d1.T @ d1
    return 0.5 * (S + S.T)


def kmeans_two_class(features, max_iter: int = 100) -> ClusterModel:
    """Two-class Lloyd iterations started from the -1 and +1 corner vectors.

    ``features`` may be FeatureVectors or an (n, D) array. Class 0 is seeded at
    the all -1 vector (unvoiced pole), class 1 at all +1. A class emptied
    during iteration keeps its previous mean.

    Raises
    ------
    DegenerateClassificationError
        If a class is empty at convergence (always the case when every
        vector is identical).
    """
    X = features if isinstance(features, np.ndarray) else feature_matrix(features)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("kmeans_two_class needs an (n, D) feature matrix with n >= 1")
    D = X.shape[1]
    means = np.stack([-np.ones(D), np.ones(D)])
    labels = None
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        dist = ((X[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        new = (dist[:, 1] < dist[:, 0]).astype(np.int64)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in (0, 1):
            if np.any(labels == c):
                means[c] = X[labels == c].mean(axis=0)

    for c in (0, 1):
        if not np.any(labels == c):
            raise DegenerateClassificationError(
                f"class {c} is empty after k-means", empty_class=c)
    m0, m1 = X[labels == 0].mean(axis=0), X[labels == 1].mean(axis=0)
    return ClusterModel(m0, m1, labels, within_class_scatter(X, labels, m0, m1), n_iter)


def regularized_scatter(S_w: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    D = S_w.shape[0]
    return S_w + eps * np.trace(S_w) / D * np.eye(D)


def lda_weight(model: ClusterModel, eps: float = 1e-6) -> np.ndarray:
    """Unit Fisher direction ``S_w^-1 (m0 - m1)`` oriented so voiced frames score higher."""
    S = regularized_scatter(model.S_w, eps)
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > 1e12:
        raise DegenerateClassificationError("within-class scatter matrix is singular")
    w = np.linalg.solve(S, model.m0 - model.m1)
    gap = float(w @ model.m1 - w @ model.m0)
    if gap == 0 or not np.isfinite(gap):
        raise DegenerateClassificationError("class means coincide along the discriminant")
    if gap < 0:
        w = -w
    return w / np.linalg.norm(w)


def midpoint_threshold(model: ClusterModel, w: np.ndarray) -> float:
    """Projection of the midpoint between the two class means onto ``w``."""
    return float(np.asarray(w) @ (0.5 * (model.m0 + model.m1)))


def classify(features, w: np.ndarray, silent=None, threshold: float = 0.0) -> VoicingTrack:
    """Label frames voiced when ``w . v > threshold``; ties and below are unvoiced.

    Frames flagged silent (via ``silent`` or ``FeatureVector.is_silent``) keep
    the silent label whatever their score. The stored scores are
    ``w . v - threshold`` so their sign is the decision.
    """
    if isinstance(features, np.ndarray):
        X = features
        flags = np.zeros(X.shape[0], dtype=bool) if silent is None else np.asarray(silent, bool)
    else:
        X = feature_matrix(features)
        flags = np.array([f.is_silent for f in features], dtype=bool)
        if silent is not None:
            flags |= np.asarray(silent, bool)
    scores = X @ np.asarray(w, dtype=np.float64) - threshold
    labels = np.where(scores > 0, VOICED, UNVOICED).astype(np.int8)
    labels[flags] = SILENT
    return VoicingTrack(labels, scores)
