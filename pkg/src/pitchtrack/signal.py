"""Audio ingestion, framing, synthetic test signals and noise mixing."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.io import wavfile

WINDOWS = ("rectangular", "hann", "hamming")
MAX_ABS_SNR_DB = 60.0


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio samples with their sampling rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioBuffer holds mono samples only")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain NaN or Inf")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class FramingConfig:
    frame_length: int = 512
    hop_length: int = 160
    window: str = "hann"

    def __post_init__(self):
        if self.frame_length <= 0 or self.hop_length <= 0:
            raise ValueError("frame_length and hop_length must be positive")
        if self.hop_length > self.frame_length:
            raise ValueError("hop_length must not exceed frame_length")
        if self.window not in WINDOWS:
            raise ValueError(f"window must be one of {WINDOWS}, got {self.window!r}")

    def num_frames(self, num_samples: int) -> int:
        if num_samples < self.frame_length:
            return 0
        return (num_samples - self.frame_length) // self.hop_length + 1


@dataclass(frozen=True)
class Frame:
    """One analysis segment ``x_k(n)``; ``power`` is the mean square of the raw samples."""

    index: int
    samples: np.ndarray
    power: float


def get_window(name: str, length: int) -> np.ndarray:
    """Periodic analysis window of the given kind."""
    if name == "rectangular":
        return np.ones(length)
    if name == "hann":
        return np.hanning(length + 1)[:-1]
    if name == "hamming":
        return np.hamming(length + 1)[:-1]
    raise ValueError(f"unknown window {name!r}")


def load_audio(path) -> AudioBuffer:
    """Read a PCM or float WAV file and return it as a mono buffer in [-1, 1].

    Multichannel input is averaged across channels.
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except (ValueError, EOFError) as exc:
        raise ValueError(f"cannot decode WAV file {path}: {exc}") from exc

    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV sample type {data.dtype}")

    if x.ndim == 2:
        x = x.mean(axis=1)
    if x.size == 0:
        raise ValueError(f"{path} contains no audio")
    return AudioBuffer(x, rate)


def save_audio(path, buf: AudioBuffer) -> None:
    """Write ``buf`` as a 32-bit float WAV file."""
    wavfile.write(path, buf.sample_rate, buf.samples.astype(np.float32))


def frame_signal(buf: AudioBuffer, cfg: FramingConfig) -> list[Frame]:
    """Cut ``buf`` into frames starting every ``hop_length`` samples.

    The trailing partial frame is dropped. Frame samples are not windowed.
    """
    n = cfg.num_frames(len(buf))
    if n == 0:
        raise ValueError(
            f"signal of {len(buf)} samples is shorter than one frame ({cfg.frame_length})"
        )
    x = buf.samples
    frames = []
    for k in range(n):
        seg = x[k * cfg.hop_length:k * cfg.hop_length + cfg.frame_length]
        frames.append(Frame(k, seg, float(np.mean(seg * seg))))
    return frames


F0Contour = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class SynthSpec:
    """Harmonic test signal description.

    ``f0_contour`` is either a constant or one target F0 per analysis frame
    (frame centres, linearly interpolated between them). Vibrato adds
    ``vibrato_depth * sin(2 pi vibrato_rate t)`` Hz on top.
    """

    f0_contour: F0Contour = 200.0
    num_harmonics: int = 5
    harmonic_rolloff: float = 6.0
    duration: float = 2.0
    vibrato_depth: float = 0.0
    vibrato_rate: float = 5.0
    amplitude: float = 1.0
    framing: FramingConfig = field(default_factory=FramingConfig)


def _instantaneous_f0(spec: SynthSpec, sample_rate: int, num_samples: int) -> np.ndarray:
    t = np.arange(num_samples) / sample_rate
    contour = np.atleast_1d(np.asarray(spec.f0_contour, dtype=np.float64))
    if contour.size == 1:
        base = np.full(num_samples, contour[0])
    else:
        fc = spec.framing
        n_frames = fc.num_frames(num_samples)
        if contour.size != n_frames:
            raise ValueError(
                f"f0_contour has {contour.size} values but the signal has {n_frames} frames"
            )
        centres = np.arange(n_frames) * fc.hop_length + fc.frame_length / 2.0
        base = np.interp(np.arange(num_samples), centres, contour)
    return base + spec.vibrato_depth * np.sin(2 * np.pi * spec.vibrato_rate * t)


def synthesize(spec: SynthSpec, sample_rate: int):
    """Render a harmonic complex and its per-frame reference pitch track.

    Harmonic ``h`` (1-based) has amplitude ``amplitude * 10**(-rolloff*(h-1)/20)``
    and phase ``h`` times the integrated instantaneous F0, so the waveform is
    phase-continuous. The reference F0 of a frame is the mean instantaneous F0
    over its samples; every frame is marked voiced.

    Returns
    -------
    (AudioBuffer, PitchTrack)
    """
    from .kalman import PitchTrack

    if spec.num_harmonics < 1:
        raise ValueError("num_harmonics must be a positive integer")
    if spec.duration <= 0:
        raise ValueError("duration must be positive")
    num_samples = int(round(spec.duration * sample_rate))
    contour = np.atleast_1d(np.asarray(spec.f0_contour, dtype=np.float64))
    if np.any(contour <= 0) or not np.all(np.isfinite(contour)):
        raise ValueError("every F0 in the contour must be positive and finite")

    f_inst = _instantaneous_f0(spec, sample_rate, num_samples)
    nyquist = sample_rate / 2.0
    if np.min(f_inst) <= 0:
        raise ValueError("vibrato drives the instantaneous F0 to zero or below")
    if np.max(f_inst) * spec.num_harmonics >= nyquist:
        raise ValueError(
            f"harmonic {spec.num_harmonics} reaches {np.max(f_inst) * spec.num_harmonics:.1f} Hz, "
            f"above Nyquist ({nyquist:.1f} Hz)"
        )

    phase = 2 * np.pi * np.concatenate(([0.0], np.cumsum(f_inst[:-1]))) / sample_rate
    x = np.zeros(num_samples)
    for h in range(1, spec.num_harmonics + 1):
        gain = 10.0 ** (-spec.harmonic_rolloff * (h - 1) / 20.0)
        x += gain * np.sin(h * phase)
    x *= spec.amplitude

    fc = spec.framing
    n_frames = fc.num_frames(num_samples)
    starts = np.arange(n_frames) * fc.hop_length
    csum = np.concatenate(([0.0], np.cumsum(f_inst)))
    ref_f0 = (csum[starts + fc.frame_length] - csum[starts]) / fc.frame_length
    ref = PitchTrack(
        sample_rate=sample_rate,
        hop_length=fc.hop_length,
        voiced=np.ones(n_frames, dtype=bool),
        f0=ref_f0,
    )
    return AudioBuffer(x, sample_rate), ref


def noise_gain(clean_power: float, noise_power: float, snr_db: float) -> float:
    """Amplitude factor that puts noise of ``noise_power`` at ``snr_db`` below ``clean_power``."""
    return float(np.sqrt(clean_power / (noise_power * 10.0 ** (snr_db / 10.0))))


def mix_at_snr(clean: AudioBuffer, noise: AudioBuffer, snr_db: float, seed=0,
               return_gain: bool = False):
    """Add ``noise`` to ``clean`` scaled to the requested SNR.

    Longer noise is truncated at a random start; shorter noise is looped
    from a random circular offset. Both draws use ``seed``.
    Powers are mean squares over the clean signal's full length.
    """
    if clean.sample_rate != noise.sample_rate:
        raise ValueError("clean and noise sample rates differ")
    if not np.isfinite(snr_db) or abs(snr_db) > MAX_ABS_SNR_DB:
        raise ValueError(f"snr_db must lie within +/-{MAX_ABS_SNR_DB:g} dB, got {snr_db}")

    rng = np.random.default_rng(seed)
    n = len(clean)
    if len(noise) >= n:
        start = int(rng.integers(0, len(noise) - n + 1))
        seg = noise.samples[start:start + n]
    else:
        offset = int(rng.integers(0, len(noise)))
        seg = np.resize(np.roll(noise.samples, -offset), n)

    p_clean = float(np.mean(clean.samples ** 2))
    p_noise = float(np.mean(seg ** 2))
    if p_clean <= 0:
        raise ValueError("clean signal has zero power")
    if p_noise <= 0:
        raise ValueError("noise signal has zero power")
    g = noise_gain(p_clean, p_noise, snr_db)
    out = AudioBuffer(clean.samples + g * seg, clean.sample_rate)
    if return_gain:
        return out, g
    return out


def white_noise(num_samples: int, sample_rate: int, seed=0) -> AudioBuffer:
    """Unit-variance Gaussian noise."""
    rng = np.random.default_rng(seed)
    return AudioBuffer(rng.standard_normal(num_samples), sample_rate)
