"""Training-free pitch tracking for noisy, pre-recorded speech.

Voiced frames are found by per-utterance unsupervised clustering, pitch
periods by a blend of time- and frequency-domain autocorrelation, and the
contour is smoothed by fused forward and backward Kalman filters.
"""
from .config import PipelineConfig, dump_config, load_config
from .kalman import KalmanConfig, PitchTrack
from .metrics import EvalReport, score
from .pipeline import TrackResult, track_pitch
from .signal import AudioBuffer, FramingConfig, SynthSpec, load_audio, mix_at_snr, synthesize

__all__ = [
    "AudioBuffer", "EvalReport", "FramingConfig", "KalmanConfig", "PipelineConfig",
    "PitchTrack", "SynthSpec", "TrackResult", "dump_config", "load_audio", "load_config",
    "mix_at_snr", "score", "synthesize", "track_pitch",
]
__version__ = "0.1.0"
