"""Command-line entry point: ``hbvc <subcommand> ...``.

Exit codes: 0 success, 2 usage or invalid input, 3 I/O, 4 format or
corruption, 5 schedule or configuration.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

from . import codec, metrics
from . import ratecontrol as rc
from ._accel import set_threads
from .codec import OPERATING_LAMBDAS, CodecConfig, step_for_lambda
from .errors import BitstreamCorruptionError, HbvcError, InvalidInputError
from .frame_io import VideoMeta, read_yuv420, write_yuv420
from .gop import build_schedule, gop_for_fps
from .motion import MotionParams
from .transform import GainTable

log = logging.getLogger("hbvc")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_FORMAT, EXIT_CONFIG = 0, 2, 3, 4, 5


class UsageError(HbvcError):
    exit_code = EXIT_USAGE


# ----------------------------------------------------------- arguments


def _geometry(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_argument_group("raw video geometry")
    g.add_argument("--width", type=int, required=required)
    g.add_argument("--height", type=int, required=required)
    g.add_argument("--bit-depth", type=int, default=8, choices=(8, 10))
    g.add_argument("--fps", type=float, default=30.0)


def _coding(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("coding")
    g.add_argument("--gop", default="auto", help="GoP size (power of two) or 'auto' (30 fps -> 32, else 64)")
    g.add_argument("--op", type=int, default=1, choices=range(4), help="operating point 0 (best) .. 3")
    g.add_argument("--lambda", dest="lam", type=float, help="RD lambda (needs --lambda-free unless standard)")
    g.add_argument("--lambda-free", action="store_true", help="allow any lambda value")
    g.add_argument("--step", type=float, help="base quantizer step (default derived from lambda)")
    g.add_argument("--gains", help="gain table JSON written by 'calibrate'")
    g.add_argument("--tau", type=float, default=0.95, help="entropy skip threshold")
    g.add_argument("--search-range", type=int, default=32)
    g.add_argument("--c-uv", type=float, default=1.0, help="chroma distortion weight")
    g.add_argument("--truncate", action="store_true", help="drop frames beyond the last whole GoP")
    g.add_argument("--frames", type=int, help="number of frames to read (default: whole file)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hbvc", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    ap.add_argument("--threads", type=int, default=1, help="cap on worker threads")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode raw YUV 4:2:0 to an hbvc stream")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--recon", help="also write the encoder reconstruction as YUV")
    p.add_argument("--log", help="per-frame CSV log")
    p.add_argument("--adapt", action="store_true", help="per-frame content adaptation")
    p.add_argument("--adapt-budget", type=int, default=1)
    _geometry(p)
    _coding(p)

    p = sub.add_parser("adapt", help="encode with content adaptation and write the offset log")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--log", help="adaptation CSV (frame, offsets, cost before/after)")
    p.add_argument("--budget", type=int, default=1)
    _geometry(p)
    _coding(p)

    p = sub.add_parser("decode", help="decode an hbvc stream to raw YUV")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    _geometry(p, required=False)

    p = sub.add_parser("eval", help="PSNR report for a decoded file")
    p.add_argument("--orig", required=True)
    p.add_argument("--decoded", required=True)
    p.add_argument("--stream", required=True)
    p.add_argument("--vmaf", help="optional per-frame VMAF CSV (frame,vmaf)")
    p.add_argument("--json", help="write the summary JSON here")
    p.add_argument("--csv", help="write per-frame CSV here")
    _geometry(p)

    p = sub.add_parser("bdrate", help="BD-rate of a test curve against an anchor curve")
    p.add_argument("anchor")
    p.add_argument("test")
    p.add_argument("--method", choices=("pchip", "cubic"), default="pchip")

    p = sub.add_parser("calibrate", help="fit per-level gains by random-path coordinate descent")
    p.add_argument("-i", "--input", required=True, nargs="+", help="training YUV files (same geometry)")
    p.add_argument("-o", "--output", required=True, help="output prefix; writes PREFIX.json and PREFIX.bin")
    p.add_argument("--budget", type=int, default=2, help="coordinate-descent passes")
    p.add_argument("--paths", type=int, default=rc.PATHS_PER_CLIP)
    p.add_argument("--seed", type=int, default=0)
    _geometry(p)
    _coding(p)

    p = sub.add_parser("schedule", help="print the coding schedule as JSON")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--gop", default="auto")
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--truncate", action="store_true")
    return ap


# ------------------------------------------------------------- helpers


def _gop(value: str, fps: float) -> int:
    if value == "auto":
        return gop_for_fps(fps)
    try:
        return int(value)
    except ValueError:
        raise UsageError(f"--gop must be an integer or 'auto', got {value!r}") from None


def _config(args) -> CodecConfig:
    lam = OPERATING_LAMBDAS[args.op]
    if args.lam is not None:
        if args.lam not in OPERATING_LAMBDAS and not args.lambda_free:
            raise UsageError(f"lambda {args.lam} is not one of {OPERATING_LAMBDAS}; pass --lambda-free")
        if not args.lam > 0:
            raise UsageError("lambda must be positive")
        lam = args.lam
    gains = GainTable.ones(6)
    if args.gains:
        with open(args.gains) as fh:
            gains = GainTable.from_json(fh.read())
    return CodecConfig(
        gop_size=_gop(args.gop, args.fps),
        lam=lam,
        base_step=args.step if args.step else step_for_lambda(lam),
        gains=gains,
        tau=args.tau,
        motion=MotionParams(search_range=args.search_range, lambda_me=0.0),
        c_uv=args.c_uv,
        fps=args.fps,
        truncate=args.truncate,
    )


def _meta(args, path: str) -> VideoMeta:
    probe = VideoMeta(args.width, args.height, args.bit_depth, args.fps, 1)
    size = os.path.getsize(path)
    n = size // probe.frame_byte_size
    if getattr(args, "frames", None):
        n = args.frames
    if n < 1:
        raise InvalidInputError(f"{path}: smaller than one frame")
    return replace(probe, frame_count=n)


def _write_text(path: Optional[str], text: str) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)


def _stats_csv(stats) -> str:
    rows = ["frame,kind,level,bits,bits_motion,bits_res,psnr_y,psnr_u,psnr_v"]
    for s in sorted(stats, key=lambda s: s.t):
        py, pu, pv = (metrics.psnr_from_mse(m) for m in s.mse)
        rows.append(f"{s.t},{s.kind},{s.level},{s.bits},{s.bits_motion},{s.bits_res},{py:.4f},{pu:.4f},{pv:.4f}")
    return "\n".join(rows) + "\n"


# ------------------------------------------------------------ commands


def cmd_encode(args, adapt: bool = False, budget: int = 0) -> int:
    cfg = _config(args)
    frames = read_yuv420(args.input, _meta(args, args.input))
    res = None
    if adapt:
        res = rc.content_adapt(frames, cfg, budget=budget)
        result = res.result
    else:
        result = codec.encode_sequence(frames, cfg)
    with open(args.output, "wb") as fh:
        fh.write(result.stream)
    if getattr(args, "recon", None):
        write_yuv420(args.recon, result.recon_sequence())
    _write_text(args.log, res.to_csv() if args.command == "adapt" else _stats_csv(result.stats))
    n_intra = sum(1 for s in result.stats if s.kind == "I")
    for s in result.stats:
        log.info("frame %4d %s level %d bits %d", s.t, s.kind, s.level, s.bits)
    print(
        f"encoded {len(result.stats)} frames ({n_intra} I-frames), {len(result.stream)} bytes, "
        f"{metrics.kbps(8 * len(result.stream), cfg.fps, len(result.stats)):.2f} kbps"
    )
    return EXIT_OK


def cmd_decode(args) -> int:
    with open(args.input, "rb") as fh:
        data = fh.read()
    try:
        hdr, frames, missing = codec.decode_available(data)
        error = None
    except BitstreamCorruptionError as exc:
        frames, missing, error = exc.frames or {}, exc.missing, exc
        hdr = None
    if hdr is not None:
        for name, val in (("width", hdr.width), ("height", hdr.height), ("bit_depth", hdr.bit_depth)):
            given = getattr(args, name, None)
            if given is not None and given != val and name != "bit_depth":
                log.warning("--%s %s ignored; stream says %s", name.replace("_", "-"), given, val)
    # display-order prefix that is complete
    out = []
    t = 0
    while t in frames:
        out.append(frames[t])
        t += 1
    write_yuv420(args.output, out)
    if error is not None or missing:
        first = missing[0] if missing else t
        print(f"decoded {len(out)} frames; stream damaged or incomplete from frame {first}", file=sys.stderr)
        if error is not None:
            raise error
        raise BitstreamCorruptionError(f"{len(missing)} frame(s) missing", frames, t - 1, missing)
    print(f"decoded {len(out)} frames")
    return EXIT_OK


def cmd_eval(args) -> int:
    with open(args.stream, "rb") as fh:
        stream = fh.read()
    meta = VideoMeta(args.width, args.height, args.bit_depth, args.fps, 1)
    report = metrics.evaluate_stream(args.orig, args.decoded, stream, meta, args.vmaf)
    _write_text(args.json, report.to_json())
    _write_text(args.csv, report.frames_csv())
    print(
        f"kbps {report.bitrate_kbps:.3f}  Y {report.psnr_y:.3f}  U {report.psnr_u:.3f}  "
        f"V {report.psnr_v:.3f}  YUV {report.psnr_yuv:.3f}"
    )
    return EXIT_OK


def cmd_bdrate(args) -> int:
    curves = []
    for path in (args.anchor, args.test):
        with open(path) as fh:
            curves.append(metrics.RdCurve.from_csv(fh.read(), os.path.basename(path)))
    value = metrics.bd_rate(curves[0], curves[1], args.method)
    print(f"{value:.4f}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    clips = [read_yuv420(p, _meta(args, p)) for p in args.input]
    w = rc.LossWeights.from_config(cfg)
    res = rc.calibrate_gains(clips, cfg.gop_size, w, args.budget, args.seed, cfg, args.paths)
    _write_text(args.output + ".json", res.gains.to_json())
    with open(args.output + ".bin", "wb") as fh:
        fh.write(res.gains.to_bytes())
    print(f"objective {res.initial_objective:.6f} -> {res.objective:.6f} over {len(res.log)} trials")
    return EXIT_OK


def cmd_schedule(args) -> int:
    sched = build_schedule(args.frames, _gop(args.gop, args.fps), truncate=args.truncate)
    print(sched.to_json())
    return EXIT_OK


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    set_threads(args.threads)
    if args.command == "encode":
        return cmd_encode(args, adapt=args.adapt, budget=args.adapt_budget)
    if args.command == "adapt":
        args.recon = None
        return cmd_encode(args, adapt=True, budget=args.budget)
    return {
        "decode": cmd_decode,
        "eval": cmd_eval,
        "bdrate": cmd_bdrate,
        "calibrate": cmd_calibrate,
        "schedule": cmd_schedule,
    }[args.command](args)


def main(argv: Optional[List[str]] = None) -> int:
    try:
        return run(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except HbvcError as exc:
        print(f"hbvc: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"hbvc: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
