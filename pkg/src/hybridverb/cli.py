"""
Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 numeric failure, 4 I/O error.
Settings resolve as command-line flag > ``--config`` TOML file > default. In
the TOML file, top-level keys apply to every subcommand and a table named
after a subcommand (e.g. ``[dereverb]``) applies to that one only; keys use
the long option names with dashes replaced by underscores.
"""

import argparse
import csv
import logging
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .ctf import ctf_convolve, ctf_from_rir, save_ctf
from .dataset import gen_dataset
from .exceptions import ConfigurationError, NumericalError
from .gradcheck import max_relative_error
from .loss import LossWeights
from .metrics import align_to_reference, sisdr, spectral_log_error
from .reverb import (PolackParams, Rir, RoomSpec, align_normalize_rir,
                     default_rir_len, reverberate, simulate_shoebox_rir,
                     synth_polack_rir)
from .solver import SolverConfig, dereverb, dereverb_oracle
from .stft import Waveform, istft, make_stft_config, stft
from .wavio import read_wav, write_wav

EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4
DEFAULT_SR = 16000.0
GRADCHECK_TOL = 1e-5

log = logging.getLogger("hybridverb")


class UsageError(Exception):
    pass


def _triple(text):
    sep = "x" if "x" in text else ","
    parts = text.split(sep)
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three values, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number triple: {text!r}") from None


def _load_config(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _check_rate(w, args, what):
    if args.sr is not None and w.sample_rate != args.sr:
        raise ValueError(f"{what} is {w.sample_rate:g} Hz but --sr is {args.sr:g} Hz")


def _load(path, args, what):
    w = read_wav(path)
    _check_rate(w, args, what)
    return w


def cmd_synth_rir(args):
    sr = args.sr or DEFAULT_SR
    if (args.volume is None) != (args.area is None):
        raise UsageError("--volume and --area go together")
    mix = None if args.mixing_time_ms is None else args.mixing_time_ms / 1000.0
    p = PolackParams(args.rt60, sigma=args.sigma, volume=args.volume,
                     surface_area=args.area, mixing_time_override=mix,
                     sample_rate=sr, rir_len=args.len, seed=args.seed)
    h = synth_polack_rir(p)
    write_wav(args.output, Waveform(h.samples, sr), args.format)


def cmd_simulate_room(args):
    sr = args.sr or DEFAULT_SR
    room = RoomSpec(args.dims, args.src, args.mic, args.rt60,
                    max_order=args.max_order, sample_rate=sr)
    n = args.len or default_rir_len(args.rt60, sr)
    h = simulate_shoebox_rir(room, n, calibrate=not args.no_calibrate)
    if not args.raw:
        h = align_normalize_rir(h)
    write_wav(args.output, Waveform(h.samples, sr), args.format)


def cmd_reverberate(args):
    s = _load(args.dry, args, "dry signal")
    hw = _load(args.rir, args, "RIR")
    h = Rir(hw.samples, hw.sample_rate)
    if args.domain == "time":
        y = reverberate(s, h)
    else:
        cfg = make_stft_config(args.window, args.hop, s.sample_rate)
        H = ctf_from_rir(h, cfg, args.crossbands)
        if args.dump_ctf:
            save_ctf(args.dump_ctf, H)
        y = istft(ctf_convolve(stft(s, cfg), H), len(s) + len(h) - 1)
    write_wav(args.output, y, args.format)


def _solver_config(args):
    return SolverConfig(max_iters=args.iters, step_size=args.step,
                        half_width=args.crossbands, resample_rir=args.resample_rir,
                        weights=LossWeights(args.lam, args.gamma))


def cmd_dereverb(args):
    y = _load(args.wet, args, "wet signal")
    cfg = make_stft_config(args.window, args.hop, y.sample_rate)
    sc = _solver_config(args)
    if args.oracle_rir:
        hw = _load(args.oracle_rir, args, "oracle RIR")
        h = align_normalize_rir(Rir(hw.samples, hw.sample_rate))
        result = dereverb_oracle(y, h, cfg, sc)
    else:
        if args.rt60 is None:
            raise UsageError("give --rt60 (weak supervision) or --oracle-rir")
        if (args.volume is None) != (args.area is None):
            raise UsageError("--volume and --area go together")
        mix = None if args.mixing_time_ms is None else args.mixing_time_ms / 1000.0
        p = PolackParams(args.rt60, sigma=args.sigma, volume=args.volume,
                         surface_area=args.area, mixing_time_override=mix,
                         sample_rate=y.sample_rate, seed=args.seed)
        result = dereverb(y, p, cfg, sc)
    write_wav(args.output, result.dry_estimate, args.format)
    if args.trace:
        _write_trace(args.trace, result)
    log.info("iterations=%d loss %.6g -> %.6g", result.iters_run,
             result.loss_trace[0], result.final_loss.total)


def _write_trace(path, result):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "total", "data", "log"])
        for i, (total, data, logt) in enumerate(result.trace_terms):
            writer.writerow([i, repr(total), repr(data), repr(logt)])


def cmd_eval(args):
    ref = _load(args.ref, args, "reference")
    est = _load(args.est, args, "estimate")
    if ref.sample_rate != est.sample_rate:
        raise ValueError("reference and estimate sample rates differ")
    r = ref.samples
    e = align_to_reference(r, est.samples) if args.align else est.samples
    n = min(len(r), len(e))
    r, e = r[:n], e[:n]
    metrics = args.metric or ["sisdr", "slog"]
    for name in metrics:
        if name == "sisdr":
            score = sisdr(r, e)
        else:
            cfg = make_stft_config(args.window, args.hop, ref.sample_rate)
            score = spectral_log_error(r, e, cfg)
        print(f"{score.name}={score.value:.6f}")


def cmd_gen_dataset(args):
    manifest = gen_dataset(args.rooms, args.rirs, args.output, args.seed,
                           dry_dir=args.dry_dir, sample_rate=args.sr or DEFAULT_SR,
                           workers=args.workers)
    print(manifest)


def cmd_gradcheck(args):
    err = max_relative_error(n_bins=args.fmax, n_frames=args.frames, seed=args.seed)
    print(f"max_relative_error={err:.3e}")
    if not err <= GRADCHECK_TOL:
        return EXIT_NUMERIC
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hybridverb",
        description="Reverberation-model supervised dereverberation toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with default option values")
    common.add_argument("--sr", type=float, default=None,
                        help="sample rate in Hz (default 16000 for synthesis; "
                             "checked against input files otherwise)")
    common.add_argument("-v", "--verbose", action="store_true")
    stft_opts = argparse.ArgumentParser(add_help=False)
    stft_opts.add_argument("--window", type=int, default=512)
    stft_opts.add_argument("--hop", type=int, default=256)
    out_opts = argparse.ArgumentParser(add_help=False)
    out_opts.add_argument("-o", "--output", required=True)
    out_opts.add_argument("--format", choices=["float32", "pcm16"], default="float32")

    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("synth-rir", parents=[common, out_opts],
                       help="synthesise a Polack-model RIR")
    p.add_argument("--rt60", type=float, required=True)
    p.add_argument("--sigma", type=float, default=0.02)
    p.add_argument("--volume", type=float)
    p.add_argument("--area", type=float)
    p.add_argument("--mixing-time-ms", type=float)
    p.add_argument("--len", type=int, help="RIR length in samples")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_synth_rir)
    subs["synth-rir"] = p

    p = sub.add_parser("simulate-room", parents=[common, out_opts],
                       help="image-source RIR of a shoebox room")
    p.add_argument("--dims", type=_triple, required=True, help="LxWxH in metres")
    p.add_argument("--src", type=_triple, required=True, help="x,y,z")
    p.add_argument("--mic", type=_triple, required=True, help="x,y,z")
    p.add_argument("--rt60", type=float, required=True)
    p.add_argument("--max-order", type=int)
    p.add_argument("--len", type=int)
    p.add_argument("--raw", action="store_true",
                   help="keep the propagation delay and 1/r scale (no alignment)")
    p.add_argument("--no-calibrate", action="store_true",
                   help="use the plain Sabine absorption without decay correction")
    p.set_defaults(func=cmd_simulate_room)
    subs["simulate-room"] = p

    p = sub.add_parser("reverberate", parents=[common, stft_opts, out_opts],
                       help="convolve a dry signal with an RIR")
    p.add_argument("--dry", required=True)
    p.add_argument("--rir", required=True)
    p.add_argument("--domain", choices=["time", "ctf"], default="time")
    p.add_argument("--crossbands", type=int, default=4)
    p.add_argument("--dump-ctf", help="write the CTF tensor (ctf domain only)")
    p.set_defaults(func=cmd_reverberate)
    subs["reverberate"] = p

    p = sub.add_parser("dereverb", parents=[common, stft_opts, out_opts],
                       help="estimate the dry signal from a wet recording")
    p.add_argument("--wet", required=True)
    p.add_argument("--rt60", type=float)
    p.add_argument("--sigma", type=float, default=0.02)
    p.add_argument("--volume", type=float)
    p.add_argument("--area", type=float)
    p.add_argument("--mixing-time-ms", type=float)
    p.add_argument("--oracle-rir")
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--step", type=float, default=0.1,
                   help="Adam step in units of the wet spectrogram's RMS magnitude")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resample-rir", action="store_true",
                   help="redraw the synthetic RIR tail at every iteration")
    p.add_argument("--crossbands", type=int, default=4)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--trace", help="CSV file for the loss trace")
    p.set_defaults(func=cmd_dereverb)
    subs["dereverb"] = p

    p = sub.add_parser("eval", parents=[common, stft_opts],
                       help="score an estimate against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--align", action="store_true",
                   help="cross-correlation alignment before scoring")
    p.add_argument("--metric", action="append", choices=["sisdr", "slog"])
    p.set_defaults(func=cmd_eval)
    subs["eval"] = p

    p = sub.add_parser("gen-dataset", parents=[common],
                       help="simulate a dry/wet/RIR corpus")
    p.add_argument("--rooms", type=int, required=True)
    p.add_argument("--rirs", type=int, required=True)
    p.add_argument("--dry-dir")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_gen_dataset)
    subs["gen-dataset"] = p

    p = sub.add_parser("gradcheck", parents=[common],
                       help="finite-difference check of the loss gradient")
    p.add_argument("--fmax", type=int, default=32)
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_gradcheck)
    subs["gradcheck"] = p

    parser.subcommands = subs
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    data = _load_config(known.config)
    shared = {k.replace("-", "_"): v for k, v in data.items() if not isinstance(v, dict)}
    for name, subparser in parser.subcommands.items():
        values = dict(shared)
        section = data.get(name, {})
        values.update({k.replace("-", "_"): v for k, v in section.items()})
        dests = {a.dest for a in subparser._actions}
        unknown = {k.replace("-", "_") for k in section} - dests
        if unknown:
            raise UsageError(f"unknown option(s) in [{name}]: {sorted(unknown)}")
        subparser.set_defaults(**{k: v for k, v in values.items() if k in dests})
        # config values satisfy required options
        for action in subparser._actions:
            if action.required and action.dest in values:
                action.required = False


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return args.func(args) or 0
    except (UsageError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
