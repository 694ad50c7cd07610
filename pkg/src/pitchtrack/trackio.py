"""Reading and writing pitch tracks as CSV or JSON.

CSV columns are ``frame,time_s,voiced,f0_hz``; ``f0_hz`` is empty for
unvoiced frames. Diagnostic columns, when requested, follow these four.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .kalman import PitchTrack

CORE_COLUMNS = ("frame", "time_s", "voiced", "f0_hz")
DEBUG_COLUMNS = ("label", "score", "obs_lag", "fwd_lag", "fwd_var", "bwd_lag", "bwd_var",
                 "fused_lag")

# CSV carries times only, so tracks read from it get a microsecond clock
_CSV_CLOCK = 1_000_000


def _fmt(x, digits=6):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.{digits}f}"


def _rows(track: PitchTrack, debug: bool):
    times = track.times
    for k in range(len(track)):
        row = {
            "frame": k,
            "time_s": float(times[k]),
            "voiced": int(track.voiced[k]),
            "f0_hz": float(track.f0[k]) if track.voiced[k] else None,
        }
        if debug:
            for name in DEBUG_COLUMNS:
                col = track.diagnostics.get(name)
                row[name] = None if col is None else col[k].item()
        yield row


def format_track(track: PitchTrack, fmt: str = "csv", debug: bool = False) -> str:
    columns = CORE_COLUMNS + (DEBUG_COLUMNS if debug else ())
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in _rows(track, debug):
            writer.writerow([_fmt(row["frame"]), _fmt(row["time_s"]), _fmt(row["voiced"]),
                             _fmt(row["f0_hz"], 4)] + [_fmt(row[c]) for c in columns[4:]])
        return buf.getvalue()
    if fmt == "json":
        frames = []
        for row in _rows(track, debug):
            frames.append({k: (None if isinstance(v, float) and math.isnan(v) else v)
                           for k, v in row.items()})
        doc = {"sample_rate": track.sample_rate, "hop_length": track.hop_length,
               "frames": frames}
        return json.dumps(doc, indent=1) + "\n"
    raise ValueError(f"unknown track format {fmt!r}")


def write_track(path, track: PitchTrack, fmt: str = "csv", debug: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_track(track, fmt, debug))


def _track_from_rows(rows, sample_rate=None, hop_length=None) -> PitchTrack:
    if not rows:
        raise ValueError("track file has no frames")
    frames = [int(r["frame"]) for r in rows]
    if frames != list(range(len(rows))):
        raise ValueError("frame column must count 0, 1, 2, ... without gaps")
    voiced = np.array([int(r["voiced"]) == 1 for r in rows])
    f0 = np.array([float(r["f0_hz"]) if r["f0_hz"] not in ("", None) else np.nan
                   for r in rows])
    if np.any(voiced & ~(f0 > 0)):
        raise ValueError("voiced frames need a positive f0_hz")
    if sample_rate is None or hop_length is None:
        sample_rate = _CSV_CLOCK
        if len(rows) > 1:
            hop_length = int(round((float(rows[1]["time_s"]) - float(rows[0]["time_s"]))
                                   * _CSV_CLOCK))
        else:
            hop_length = 1
    return PitchTrack(int(sample_rate), int(hop_length), voiced, np.where(voiced, f0, np.nan))


def read_track(path) -> PitchTrack:
    """Load a track written by :func:`write_track` (format chosen by extension)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        doc = json.loads(text)
        return _track_from_rows(doc["frames"], doc.get("sample_rate"), doc.get("hop_length"))
    reader = csv.DictReader(io.StringIO(text))
    missing = set(CORE_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"{path} lacks column(s): {', '.join(sorted(missing))}")
    return _track_from_rows(list(reader))


def write_acf_dump(path, r_st: np.ndarray, lags: np.ndarray) -> None:
    """Write the per-frame blended ACF as ``frame,<lag>...`` rows; frames without an estimate are skipped."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame"] + [str(int(l)) for l in lags])
        for k, row in enumerate(r_st):
            if np.all(np.isnan(row)):
                continue
            writer.writerow([k] + [f"{v:.6f}" for v in row])
