"""End-to-end pitch tracking of one utterance."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import acf, kalman, voicing
from .config import PipelineConfig
from .signal import AudioBuffer, frame_signal

log = logging.getLogger(__name__)

MIN_RELIABLE_DURATION = 1.0


@dataclass
class TrackResult:
    track: kalman.PitchTrack
    initial: voicing.VoicingTrack
    labels: np.ndarray
    bounds: acf.LagBounds
    r_st: np.ndarray  # frames x lags, NaN rows where no estimate was made


def classify_voicing(frames, cfg: PipelineConfig, sample_rate: int) -> voicing.VoicingTrack:
    """Silence gate, features, k-means and Fisher discriminant for one utterance.

    With ``decision = "midpoint"`` the discriminant threshold sits halfway
    between the projected class means; ``"zero"`` thresholds the raw
    projection at 0.

    When k-means leaves the unvoiced class empty the utterance is taken to be
    voiced throughout (apart from silent frames). An empty voiced class is an
    error.
    """
    silent = voicing.power_gate(frames, cfg.voicing.silence_ratio)
    fcfg = cfg.feature_config(sample_rate)
    feats = [voicing.extract_features(f, s, fcfg) for f, s in zip(frames, silent)]
    X = voicing.feature_matrix(feats)

    try:
        model = voicing.kmeans_two_class(X)
    except voicing.DegenerateClassificationError as exc:
        if exc.empty_class != 0:
            raise
        log.info("no frame clustered as unvoiced; treating every audible frame as voiced")
        labels = np.where(silent, voicing.SILENT, voicing.VOICED).astype(np.int8)
        return voicing.VoicingTrack(labels, np.full(len(frames), np.nan))

    try:
        w = voicing.lda_weight(model)
    except voicing.DegenerateClassificationError:
        log.warning("discriminant is degenerate; falling back to k-means labels")
        labels = np.where(model.labels == 1, voicing.VOICED, voicing.UNVOICED).astype(np.int8)
        labels[silent] = voicing.SILENT
        return voicing.VoicingTrack(labels, np.full(len(frames), np.nan))
    threshold = 0.0
    if cfg.voicing.decision == "midpoint":
        threshold = voicing.midpoint_threshold(model, w)
    return voicing.classify(X, w, silent, threshold)


def track_pitch(buf: AudioBuffer, cfg: PipelineConfig = PipelineConfig()) -> TrackResult:
    """Classify voicing, estimate per-frame periods and smooth them into a pitch track.

    Raises
    ------
    voicing.DegenerateClassificationError
        If no frame can be classified as voiced by the clustering stage.
    """
    cfg.check_sample_rate(buf.sample_rate)
    if buf.duration < MIN_RELIABLE_DURATION:
        log.warning("utterance is %.2f s long; classification may be unreliable below %.1f s",
                    buf.duration, MIN_RELIABLE_DURATION)
    frames = frame_signal(buf, cfg.framing)
    bounds = cfg.lag_bounds(buf.sample_rate)
    n = len(frames)

    initial = classify_voicing(frames, cfg, buf.sample_rate)
    to_estimate = acf.fill_isolated_unvoiced(initial.labels) == voicing.VOICED

    lags = np.full(n, -1, dtype=np.int64)
    r_st = np.full((n, bounds.n_high - bounds.n_low + 1), np.nan)
    for k in np.flatnonzero(to_estimate):
        obs, r_st[k] = acf.estimate_pitch(frames[k], bounds, cfg.acf.alpha_r,
                                          cfg.acf.fft_size, cfg.framing.window)
        lags[k] = obs.lag

    labels, bridged = acf.postprocess_voicing(initial.labels, lags, bounds)
    voiced = labels == voicing.VOICED

    diag = {
        "label": labels.astype(np.int64),
        "score": initial.scores,
        "obs_lag": np.where(lags > 0, lags, np.nan).astype(np.float64),
    }
    for name in ("fwd_lag", "fwd_var", "bwd_lag", "bwd_var", "fused_lag"):
        diag[name] = np.full(n, np.nan)

    f0 = np.full(n, np.nan)
    if voiced.any():
        obs_seq = np.where(bridged[voiced], np.nan, lags[voiced]).astype(np.float64)
        fb = kalman.smooth(obs_seq, cfg.kalman)
        f0[voiced] = kalman.to_frequency(fb.fused, buf.sample_rate, cfg.acf.f_min, cfg.acf.f_max)
        diag["fwd_lag"][voiced] = fb.forward.estimate
        diag["fwd_var"][voiced] = fb.forward.obs_variance
        diag["bwd_lag"][voiced] = fb.backward.estimate
        diag["bwd_var"][voiced] = fb.backward.obs_variance
        diag["fused_lag"][voiced] = fb.fused
    else:
        log.warning("no voiced frames left after post-processing")

    track = kalman.PitchTrack(buf.sample_rate, cfg.framing.hop_length, voiced, f0,
                              lag=diag["fused_lag"].copy(), diagnostics=diag)
    return TrackResult(track, initial, labels, bounds, r_st)
