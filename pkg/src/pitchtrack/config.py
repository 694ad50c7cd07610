"""Pipeline parameters and the sectioned INI-style config file.

Example file::

    [framing]
    frame_length = 512
    hop_length = 160
    window = hann

    [kalman]
    l_window = 6
    alpha = 0.9
    sigma2_delta0 = 0.01
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace

from .acf import LagBounds
from .kalman import KalmanConfig
from .signal import FramingConfig
from .voicing import FeatureConfig


@dataclass(frozen=True)
class VoicingConfig:
    silence_ratio: float = 0.3
    preemph: float = 0.97
    lowband_cutoff_hz: float = 1000.0
    zcr_mid_hz: float = 2000.0
    decision: str = "midpoint"

    def __post_init__(self):
        if self.decision not in ("midpoint", "zero"):
            raise ValueError(f"decision must be 'midpoint' or 'zero', got {self.decision!r}")


@dataclass(frozen=True)
class AcfConfig:
    alpha_r: float = 0.5
    fft_size: int = 2048
    f_min: float = 60.0
    f_max: float = 460.0

    def __post_init__(self):
        if not 0 < self.f_min < self.f_max:
            raise ValueError(f"need 0 < f_min < f_max, got {self.f_min}, {self.f_max}")
        if not 0 <= self.alpha_r <= 1:
            raise ValueError("alpha_r must lie in [0, 1]")


@dataclass(frozen=True)
class OutputConfig:
    format: str = "csv"

    def __post_init__(self):
        if self.format not in ("csv", "json"):
            raise ValueError(f"output format must be csv or json, got {self.format!r}")


@dataclass(frozen=True)
class PipelineConfig:
    framing: FramingConfig = field(default_factory=FramingConfig)
    voicing: VoicingConfig = field(default_factory=VoicingConfig)
    acf: AcfConfig = field(default_factory=AcfConfig)
    kalman: KalmanConfig = field(default_factory=KalmanConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def check_sample_rate(self, sample_rate: int) -> None:
        if self.acf.f_max >= sample_rate / 2:
            raise ValueError(
                f"f_max {self.acf.f_max} Hz is not below Nyquist for {sample_rate} Hz audio")

    def lag_bounds(self, sample_rate: int) -> LagBounds:
        return LagBounds.from_frequencies(sample_rate, self.acf.f_min, self.acf.f_max,
                                          self.framing.frame_length)

    def feature_config(self, sample_rate: int) -> FeatureConfig:
        b = self.lag_bounds(sample_rate)
        return FeatureConfig(
            sample_rate=sample_rate, n_low=b.n_low, n_high=b.n_high,
            preemph=self.voicing.preemph, lowband_cutoff_hz=self.voicing.lowband_cutoff_hz,
            zcr_mid_hz=self.voicing.zcr_mid_hz, fft_size=self.acf.fft_size,
            window=self.framing.window)

    def with_overrides(self, overrides: dict) -> "PipelineConfig":
        """Return a copy with ``{"section": {"key": value}}`` applied."""
        cfg = self
        for section, values in overrides.items():
            if not values:
                continue
            current = getattr(cfg, section)
            known = {f.name for f in fields(current)}
            unknown = set(values) - known
            if unknown:
                raise ValueError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
            cfg = replace(cfg, **{section: replace(current, **values)})
        return cfg


def _coerce(raw: str, target_type):
    if target_type in ("int", int):
        return int(raw)
    if target_type in ("float", float, "Optional[float]"):
        return float(raw)
    return raw.strip()


def _field_types(section_obj) -> dict:
    return {f.name: f.type for f in fields(section_obj)}


def load_config(path=None, text: str | None = None) -> PipelineConfig:
    """Read a config file (or string); missing keys keep their defaults."""
    cfg = PipelineConfig()
    if path is None and text is None:
        return cfg
    parser = configparser.ConfigParser()
    if text is not None:
        parser.read_string(text)
    else:
        with open(path) as fh:
            parser.read_file(fh)

    overrides = {}
    for section in parser.sections():
        if not hasattr(cfg, section):
            raise ValueError(f"unknown config section [{section}]")
        types = _field_types(getattr(cfg, section))
        values = {}
        for key, raw in parser.items(section):
            if key not in types:
                raise ValueError(f"unknown key {key!r} in [{section}]")
            values[key] = _coerce(raw, types[key])
        overrides[section] = values
    return cfg.with_overrides(overrides)


def dump_config(cfg: PipelineConfig) -> str:
    """Render ``cfg`` in the format read by :func:`load_config`."""
    parser = configparser.ConfigParser()
    for f in fields(cfg):
        section = getattr(cfg, f.name)
        parser[f.name] = {k.name: str(getattr(section, k.name)) for k in fields(section)
                          if getattr(section, k.name) is not None}
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()
