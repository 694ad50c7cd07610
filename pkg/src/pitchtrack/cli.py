"""``pitchtrack`` command line: track, synth, mix and eval subcommands.

Exit codes: 0 success, 1 usage or I/O error, 2 degenerate voicing classification.
Set ``PITCHTRACK_LOG_LEVEL`` (e.g. ``DEBUG``) to change logging verbosity.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import signal, trackio
from .config import PipelineConfig, load_config
from .metrics import score
from .pipeline import track_pitch
from .voicing import DegenerateClassificationError

log = logging.getLogger("pitchtrack")

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE = 0, 1, 2

# flag dest -> (config section, key)
CONFIG_FLAGS = {
    "frame_length": ("framing", "frame_length"),
    "hop_length": ("framing", "hop_length"),
    "window": ("framing", "window"),
    "silence_ratio": ("voicing", "silence_ratio"),
    "preemph": ("voicing", "preemph"),
    "lowband_cutoff_hz": ("voicing", "lowband_cutoff_hz"),
    "zcr_mid_hz": ("voicing", "zcr_mid_hz"),
    "decision": ("voicing", "decision"),
    "alpha_r": ("acf", "alpha_r"),
    "fft_size": ("acf", "fft_size"),
    "f_min": ("acf", "f_min"),
    "f_max": ("acf", "f_max"),
    "l_window": ("kalman", "l_window"),
    "alpha": ("kalman", "alpha"),
    "sigma2_delta0": ("kalman", "sigma2_delta0"),
    "format": ("output", "format"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def resolve_config(args) -> PipelineConfig:
    """Defaults, then the config file, then explicit command-line flags."""
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    overrides = {}
    for dest, (section, key) in CONFIG_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides.setdefault(section, {})[key] = value
    return cfg.with_overrides(overrides)


def _add_pipeline_flags(p):
    p.add_argument("--config", help="sectioned key=value config file")
    g = p.add_argument_group("parameter overrides")
    g.add_argument("--frame-length", type=int)
    g.add_argument("--hop-length", type=int)
    g.add_argument("--window", choices=signal.WINDOWS)
    g.add_argument("--silence-ratio", type=float)
    g.add_argument("--preemph", type=float)
    g.add_argument("--lowband-cutoff-hz", type=float)
    g.add_argument("--zcr-mid-hz", type=float)
    g.add_argument("--decision", choices=("midpoint", "zero"))
    g.add_argument("--alpha-r", type=float)
    g.add_argument("--fft-size", type=int)
    g.add_argument("--f-min", type=float)
    g.add_argument("--f-max", type=float)
    g.add_argument("--l-window", type=int)
    g.add_argument("--alpha", type=float)
    g.add_argument("--sigma2-delta0", type=float)


def cmd_track(args) -> int:
    cfg = resolve_config(args)
    buf = signal.load_audio(args.input)
    try:
        result = track_pitch(buf, cfg)
    except DegenerateClassificationError as exc:
        print(f"degenerate voicing classification: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    text = trackio.format_track(result.track, cfg.output.format, args.debug)
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    if args.dump_acf:
        trackio.write_acf_dump(args.dump_acf, result.r_st, result.bounds.lags)
    return EXIT_OK


def cmd_synth(args) -> int:
    framing = signal.FramingConfig(args.frame_length, args.hop_length)
    spec = signal.SynthSpec(
        f0_contour=args.f0, num_harmonics=args.harmonics, harmonic_rolloff=args.rolloff,
        duration=args.duration, vibrato_depth=args.vibrato_depth,
        vibrato_rate=args.vibrato_rate, amplitude=args.amplitude, framing=framing)
    buf, ref = signal.synthesize(spec, args.sample_rate)
    signal.save_audio(args.output, buf)
    if args.ref:
        trackio.write_track(args.ref, ref, "csv")
    return EXIT_OK


def cmd_mix(args) -> int:
    clean = signal.load_audio(args.clean)
    noise = signal.load_audio(args.noise)
    out, gain = signal.mix_at_snr(clean, noise, args.snr, seed=args.seed, return_gain=True)
    signal.save_audio(args.output, out)
    log.info("noise gain %.6g", gain)
    if args.verify:
        written = signal.load_audio(args.output)
        scaled_noise = written.samples - clean.samples
        ratio = np.mean(clean.samples ** 2) / np.mean(scaled_noise ** 2)
        target = 10.0 ** (args.snr / 10.0)
        ok = abs(ratio / target - 1.0) <= 1e-6
        print(json.dumps({"snr_db": args.snr, "power_ratio": float(ratio),
                          "target_ratio": target, "verified": bool(ok)}))
        if not ok:
            return EXIT_USAGE
    return EXIT_OK


def cmd_eval(args) -> int:
    ref = trackio.read_track(args.ref)
    est = trackio.read_track(args.est)
    report = score(ref, est)
    if not report.defined:
        print("warning: no frame is voiced in both tracks; metrics undefined", file=sys.stderr)
    print(json.dumps(report.to_dict(), indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pitchtrack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("track", help="estimate the pitch track of a WAV file")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="track file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--debug", action="store_true",
                   help="append voicing and Kalman diagnostic columns")
    p.add_argument("--dump-acf", metavar="CSV", help="write per-frame blended ACF values")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("synth", help="render a harmonic test signal and its reference track")
    p.add_argument("-o", "--output", required=True, help="output WAV")
    p.add_argument("--ref", help="reference track CSV")
    p.add_argument("--f0", type=float, default=200.0)
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--harmonics", type=int, default=5)
    p.add_argument("--rolloff", type=float, default=6.0, help="dB per harmonic")
    p.add_argument("--vibrato-depth", type=float, default=0.0, help="Hz")
    p.add_argument("--vibrato-rate", type=float, default=5.0, help="Hz")
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--sample-rate", type=int, default=16000)
    p.add_argument("--frame-length", type=int, default=512)
    p.add_argument("--hop-length", type=int, default=160)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mix", help="add noise to a clean WAV at a given SNR")
    p.add_argument("clean")
    p.add_argument("noise")
    p.add_argument("--snr", type=float, required=True, help="dB")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verify", action="store_true",
                   help="re-read the output and check the achieved power ratio")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("eval", help="score an estimated track against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--est", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("PITCHTRACK_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
