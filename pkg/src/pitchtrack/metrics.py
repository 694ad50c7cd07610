"""Gross and fine pitch error scoring against a reference track."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .kalman import PitchTrack

GROSS_ERROR_THRESHOLD = 0.1


@dataclass
class EvalReport:
    gpe_ratio: Optional[float]
    mfpe: Optional[float]
    frames_scored: int
    frames_fine: int
    voicing_confusion: list  # [[ref V & est V, ref V & est U], [ref U & est V, ref U & est U]]

    @property
    def defined(self) -> bool:
        return self.frames_scored > 0

    def to_dict(self) -> dict:
        return asdict(self)


def relative_error(f0_ref, f0_est):
    f0_ref = np.asarray(f0_ref, dtype=np.float64)
    return np.abs(f0_ref - np.asarray(f0_est, dtype=np.float64)) / f0_ref


def gpe_indicator(f0_ref, f0_est):
    """1 where the relative error strictly exceeds 10 %, else 0."""
    if np.any(np.asarray(f0_ref) <= 0):
        raise ValueError("reference F0 must be positive")
    out = (relative_error(f0_ref, f0_est) > GROSS_ERROR_THRESHOLD).astype(int)
    return out if out.ndim else int(out)


def score(ref: PitchTrack, est: PitchTrack) -> EvalReport:
    """Score ``est`` on the frames both tracks call voiced.

    GPE is the fraction of those frames with a gross error; MFPE is the mean
    relative error over the rest. With no common voiced frame both ratios
    are None.
    """
    if len(ref) != len(est):
        raise ValueError(f"frame counts differ: reference {len(ref)}, estimate {len(est)}")
    if len(ref) > 1 and not np.isclose(ref.frame_period, est.frame_period, rtol=1e-4, atol=0):
        raise ValueError("reference and estimate use different frame timing")

    both = ref.voiced & est.voiced
    confusion = [
        [int(np.sum(both)), int(np.sum(ref.voiced & ~est.voiced))],
        [int(np.sum(~ref.voiced & est.voiced)), int(np.sum(~ref.voiced & ~est.voiced))],
    ]
    k = int(both.sum())
    if k == 0:
        return EvalReport(None, None, 0, 0, confusion)

    rel = relative_error(ref.f0[both], est.f0[both])
    fine = rel <= GROSS_ERROR_THRESHOLD
    n_e = int(fine.sum())
    gpe = (k - n_e) / k
    mfpe = float(rel[fine].mean()) if n_e else None
    return EvalReport(float(gpe), mfpe, k, n_e, confusion)
