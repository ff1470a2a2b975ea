"""
Command-line entry points: decompose, validate, stream, bench.

Exit codes: 0 success, 1 a validation threshold failed, 2 usage or input error.
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import fixed_point as fx
from .analysis import (
    alpha_study,
    check_quadtone,
    correlation_report,
    imf_condition_check,
    path_agreement,
)
from .config import RunConfig
from .core import RunRecorder
from .decomposer import DEFAULT_EMIT_CHUNK, decompose, stream_decompose
from .errors import MemdError
from .extrema import TIE_POLICIES
from .signal_io import read_signal, write_stack
from .signals import FIXED, PATHS, REAL, MultivariateSignal
from .sifting import ENVELOPES, MEAN_MODES, SPLINE_WINDOWS
from .storage_sqlite import SQLiteStorage
from .synth import Preset, load_preset, preset_names

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_USAGE = 2

PATH_AGREEMENT_MIN = 0.99
BENCH_TARGET = 1e5
BANNER = "=" * 60


class UsageError(MemdError):
    pass


def _add_common(parser: argparse.ArgumentParser) -> None:
    source = parser.add_argument_group("input")
    source.add_argument("--input", help="signal file (.csv, .xlsx, .json); first column is time")
    source.add_argument("--preset", help=f"synthetic preset: {', '.join(preset_names())}")
    source.add_argument("--length", type=int, help="preset length in samples")
    source.add_argument("--config", help="RunConfig source (.json or key,value .csv)")

    algo = parser.add_argument_group("decomposition")
    algo.add_argument("--imfs", type=int, help="number of IMFs M")
    algo.add_argument("--dirs", type=int, help="number of projection directions K")
    algo.add_argument("--siftings", type=int, help="sifting iterations S per IMF")
    algo.add_argument("--path", choices=PATHS, help="arithmetic path")
    algo.add_argument("--envelope", choices=ENVELOPES)
    algo.add_argument("--tie-policy", choices=TIE_POLICIES)
    algo.add_argument("--mean-mode", choices=MEAN_MODES)
    algo.add_argument("--spline-window", choices=SPLINE_WINDOWS)
    algo.add_argument("--kmax", type=int, help="streaming lookahead cap in samples")
    algo.add_argument("--support", type=int, help="knots on each side of a windowed spline segment")
    algo.add_argument("--seed", type=int)

    out = parser.add_argument_group("output")
    out.add_argument("--out-dir", help="directory for CSV artifacts")
    out.add_argument("--db", help="SQLite file to persist the run record")
    out.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memd", description="Streaming multivariate EMD")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="decompose a signal into IMFs")
    _add_common(p)

    p = sub.add_parser("validate", help="check a preset decomposition against its ground truth")
    _add_common(p)
    p.add_argument("--welch-nperseg", type=int)
    p.add_argument("--welch-overlap", type=float)

    p = sub.add_parser("stream", help="replay a signal through the streaming engine")
    _add_common(p)
    p.add_argument("--block", type=int, default=1, help="samples per push")

    p = sub.add_parser("bench", help="measure batch throughput on both paths")
    _add_common(p)
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--warmup", type=int, default=1)
    return parser


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------

def _config(args) -> RunConfig:
    base = RunConfig.load(args.config) if args.config else RunConfig()
    return base.updated(
        imfs=args.imfs,
        directions=args.dirs,
        siftings=args.siftings,
        path=args.path,
        envelope=args.envelope,
        tie_policy=args.tie_policy,
        mean_mode=args.mean_mode,
        spline_window=args.spline_window,
        kmax=args.kmax,
        support=args.support,
        seed=args.seed,
        welch_nperseg=getattr(args, "welch_nperseg", None),
        welch_overlap=getattr(args, "welch_overlap", None),
    )


def _source(args, config: RunConfig, default_preset: Optional[str] = None) -> Tuple[MultivariateSignal, Optional[Preset], str]:
    if args.input and args.preset:
        raise UsageError("give either --input or --preset, not both")
    if args.input:
        x = read_signal(args.input)
        return x, None, Path(args.input).name
    name = args.preset or default_preset
    if not name:
        raise UsageError("give --input or --preset")
    preset = load_preset(name, args.length, config.seed)
    return preset.signal, preset, preset.name


def _bind(config: RunConfig, x: MultivariateSignal) -> RunConfig:
    return config.updated(channels=x.n_channels, sample_rate=float(x.sample_rate))


def _recorder(args, name: str) -> RunRecorder:
    storage = SQLiteStorage(args.db) if args.db else None
    return RunRecorder(name=name, storage=storage)


def _print_header(title: str) -> None:
    print(BANNER)
    print(title)
    print(BANNER)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _decompose(args) -> int:
    config = _config(args)
    x, _, name = _source(args, config)
    config = _bind(config, x)
    ctx = fx.ArithmeticContext()
    with _recorder(args, name) as recorder:
        recorder.add_metadata("command", "decompose")
        stack = decompose(x, config.imfs, config.sift_config(), ctx=ctx, recorder=recorder)
        out_dir = Path(args.out_dir or "memd_out")
        written = write_stack(out_dir, stack, config.to_dict())
        recorder.add_metadata("artifacts", [str(p) for p in written])

    _print_header(f"decompose: {name}")
    print(f"channels: {x.n_channels}  samples: {x.length}  path: {config.path}")
    print(f"IMFs extracted: {stack.n_extracted} of {config.imfs}")
    for info in stack.stats["stages"]:
        print(f"  C{info['imf']}: energy {info['energy']:.6g}  siftings {info['siftings_run']}  {info['elapsed_s']:.3f}s")
    print(f"arithmetic: {stack.stats['arithmetic']}")
    print(f"wrote {len(written)} files to {out_dir}")
    return EXIT_OK


def _validate(args) -> int:
    config = _config(args)
    x, preset, name = _source(args, config, default_preset="quadtone")
    config = _bind(config, x)
    sift = config.sift_config()
    ctx = fx.ArithmeticContext()
    failures: List[str] = []

    with _recorder(args, name) as recorder:
        recorder.add_metadata("command", "validate")
        stack = decompose(x, config.imfs, sift, ctx=ctx, recorder=recorder)
        _print_header(f"validate: {name} ({config.path} path)")

        if preset is not None and preset.name == "quadtone":
            report = correlation_report(stack, preset.truths, preset.truth_labels)
            print("Correlation with ground-truth tones:")
            print(report.to_text())
            check = check_quadtone(report)
            failures.extend(check.failures)

            print("\nIMF conditions (|extrema - zero crossings| <= 1):")
            for j in range(stack.n_extracted):
                cond = imf_condition_check(stack.imf(j), reference=x)
                print(f"C{j + 1}:")
                print(cond.to_text())
                failures.extend(
                    f"C{j + 1} ch{c.channel + 1}: condition difference {c.difference}"
                    for c in cond.channels if not c.passed
                )
                if args.out_dir:
                    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
                    cond.to_frame().to_csv(Path(args.out_dir) / f"conditions_imf_{j + 1}.csv", index=False)
            if args.out_dir:
                report.to_csv(Path(args.out_dir) / "correlation.csv")
            recorder.add_metadata("correlation", report.matrix.tolist())

        elif preset is not None and preset.name == "alpha-surrogate":
            study = alpha_study(stack, x.sample_rate, nperseg=config.welch_nperseg, overlap=config.welch_overlap)
            print(study.to_text())
            if len(study.alpha_imfs) != 1:
                failures.append(f"{len(study.alpha_imfs)} IMFs peak in the alpha band, expected 1")
            elif study.power_ratio < 3.0:
                failures.append(f"active/inactive alpha power {study.power_ratio:.2f} < 3")
            recorder.add_metadata("alpha_imfs", study.alpha_imfs)

        else:
            for j in range(stack.n_extracted):
                print(f"C{j + 1}:")
                print(imf_condition_check(stack.imf(j), reference=x).to_text())

        if config.path == FIXED:
            real_stack = decompose(x, config.imfs, config.updated(path=REAL).sift_config())
            agreement = path_agreement(stack, real_stack)
            print("\nFixed vs real IMF correlation:")
            for j, row in enumerate(agreement):
                print(f"  C{j + 1}: " + "  ".join(f"{v:.4f}" for v in row))
            low = agreement[: stack.n_extracted] < PATH_AGREEMENT_MIN
            if np.any(low):
                failures.append(f"{int(low.sum())} fixed/real IMF cells below {PATH_AGREEMENT_MIN}")
            if ctx.overflow:
                failures.append(f"{ctx.saturations} saturation events on the fixed path")
            print(f"arithmetic: {ctx.snapshot()}")

        recorder.add_metadata("passed", not failures)

    print()
    if failures:
        print("FAIL")
        for failure in failures:
            print(f"  {failure}")
        return EXIT_THRESHOLD
    print("PASS")
    return EXIT_OK


def _stream(args) -> int:
    config = _config(args)
    x, _, name = _source(args, config)
    config = _bind(config, x)
    sift = config.sift_config()

    with _recorder(args, name) as recorder:
        recorder.add_metadata("command", "stream")
        batch = decompose(x, config.imfs, sift)
        streamed, peak = stream_decompose(x, config.imfs, sift, block=max(1, args.block), recorder=recorder)

        expected = np.concatenate([batch.imfs, batch.residue[np.newaxis]])
        got = np.concatenate([streamed.imfs, streamed.residue[np.newaxis]])
        lo, hi = config.kmax, x.length - config.kmax
        interior_exact = bool(np.array_equal(expected[..., lo:hi], got[..., lo:hi]))
        full_exact = bool(np.array_equal(expected, got))
        bound = config.imfs * config.siftings * (config.kmax + DEFAULT_EMIT_CHUNK)
        recorder.add_metadata("interior_exact", interior_exact)
        recorder.add_metadata("peak_occupancy", peak)

    _print_header(f"stream: {name} ({config.path} path, block {args.block})")
    print(f"samples: {x.length}  IMFs: {config.imfs}  kmax: {config.kmax}")
    print(f"peak occupancy: {peak} time instants (bound {bound})")
    if interior_exact:
        print("interior match: exact")
    else:
        diff = np.max(np.abs(expected[..., lo:hi].astype(float) - got[..., lo:hi].astype(float)))
        print(f"interior match: MISMATCH (max abs difference {diff:.3g})")
    print(f"full-record match: {'exact' if full_exact else 'differs'}")
    if args.out_dir:
        write_stack(args.out_dir, streamed, config.to_dict())
    return EXIT_OK if interior_exact else EXIT_THRESHOLD


def _bench(args) -> int:
    config = _config(args)
    x, _, name = _source(args, config, default_preset="quadtone")
    config = _bind(config, x)
    repetitions = max(10, args.repetitions)
    stages = config.imfs * config.siftings

    _print_header(f"bench: {name}, {x.n_channels} channels x {x.length} samples, {repetitions} repetitions")
    print(f"{'path':<6} {'median s':>10} {'samples/s/channel':>18} {'samples/s/stage':>16}")
    real_rate = 0.0
    for path in (REAL, FIXED):
        sift = config.updated(path=path).sift_config()
        signal = x.to_path(path)
        for _ in range(max(0, args.warmup)):
            decompose(signal, config.imfs, sift)
        times = []
        for _ in range(repetitions):
            start = time.perf_counter()
            decompose(signal, config.imfs, sift)
            times.append(time.perf_counter() - start)
        median = float(np.median(times))
        per_channel = x.length / median
        per_stage = x.length * stages / median
        if path == REAL:
            real_rate = per_channel
        print(f"{path:<6} {median:>10.4f} {per_channel:>18.0f} {per_stage:>16.0f}")
    met = real_rate >= BENCH_TARGET
    print(f"target {BENCH_TARGET:.0e} samples/s/channel (real path) met: {'yes' if met else 'no'}")
    return EXIT_OK if met else EXIT_THRESHOLD


COMMANDS = {
    "decompose": _decompose,
    "validate": _validate,
    "stream": _stream,
    "bench": _bench,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (MemdError, OSError) as e:
        logger.debug("command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def cmd_decompose(argv: Sequence[str]) -> int:
    return main(["decompose", *argv])


def cmd_validate(argv: Sequence[str]) -> int:
    return main(["validate", *argv])


def cmd_stream(argv: Sequence[str]) -> int:
    return main(["stream", *argv])


def cmd_bench(argv: Sequence[str]) -> int:
    return main(["bench", *argv])
