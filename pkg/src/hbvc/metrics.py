"""PSNR, weighted YUV-PSNR, RD curves and Bjøntegaard delta rate."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import InvalidInputError, InvalidPairingError, NoOverlapError
from .frame_io import Frame, VideoMeta, read_yuv420

log = logging.getLogger(__name__)

PSNR_CAP = 100.0
PLANE_WEIGHTS = (6.0, 1.0, 1.0)


def psnr_plane(orig: np.ndarray, recon: np.ndarray, bit_depth: int = 8) -> float:
    orig = np.asarray(orig)
    recon = np.asarray(recon)
    if orig.shape != recon.shape:
        raise InvalidInputError(f"plane shapes differ: {orig.shape} vs {recon.shape}")
    d = orig.astype(np.float64) - recon.astype(np.float64)
    return psnr_from_mse(float(np.mean(d * d)), bit_depth)


def psnr_from_mse(mse: float, bit_depth: int = 8) -> float:
    if mse <= 0.0:
        return PSNR_CAP
    peak = float((1 << bit_depth) - 1)
    return min(PSNR_CAP, 10.0 * math.log10(peak * peak / mse))


def weighted_yuv_psnr(psnr_y: float, psnr_u: float, psnr_v: float) -> float:
    wy, wu, wv = PLANE_WEIGHTS
    return (wy * psnr_y + wu * psnr_u + wv * psnr_v) / (wy + wu + wv)


def frame_psnr(orig: Frame, recon: Frame):
    """``(Y, U, V, weighted)`` PSNR of one frame."""
    y, u, v = (psnr_plane(a, b, orig.bit_depth) for a, b in zip(orig.planes, recon.planes))
    return y, u, v, weighted_yuv_psnr(y, u, v)


def kbps(total_bits: int, fps: float, n_frames: int) -> float:
    return total_bits * fps / n_frames / 1000.0


# ------------------------------------------------------------- RD curves


@dataclass(frozen=True)
class RdPoint:
    bitrate: float  # kbps
    quality: float  # dB
    label: str = ""

    def __post_init__(self):
        if not self.bitrate > 0:
            raise InvalidInputError(f"bitrate must be positive, got {self.bitrate}")
        if not 0 < self.quality <= PSNR_CAP:
            raise InvalidInputError(f"quality {self.quality} outside (0, {PSNR_CAP}]")


@dataclass
class RdCurve:
    name: str
    points: List[RdPoint] = field(default_factory=list)

    @classmethod
    def from_pairs(cls, name: str, pairs) -> "RdCurve":
        return cls(name, [RdPoint(float(r), float(q), f"p{i}") for i, (r, q) in enumerate(pairs)])

    def arrays(self):
        r = np.array([p.bitrate for p in self.points], dtype=np.float64)
        q = np.array([p.quality for p in self.points], dtype=np.float64)
        return r, q

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["label", "bitrate_kbps", "quality_db"])
        for p in self.points:
            wr.writerow([p.label, repr(p.bitrate), repr(p.quality)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, name: str = "") -> "RdCurve":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise InvalidInputError("RD curve CSV has no rows")
        pts = [
            RdPoint(float(r["bitrate_kbps"]), float(r["quality_db"]), r.get("label") or f"p{i}")
            for i, r in enumerate(rows)
        ]
        return cls(name, pts)

    def gnuplot(self) -> str:
        return "".join(f"{p.bitrate} {p.quality}\n" for p in self.points)


def _prepare(curve: RdCurve):
    r, q = curve.arrays()
    if len(r) < 4:
        raise InvalidInputError(f"curve {curve.name!r} needs at least 4 points, has {len(r)}")
    if len(np.unique(q)) != len(q) or len(np.unique(r)) != len(r):
        raise InvalidInputError(f"curve {curve.name!r} has duplicate points")
    order = np.argsort(q)
    if not np.all(order == np.arange(len(q))) and not np.all(order == np.arange(len(q))[::-1]):
        log.warning("curve %r is not monotone; sorting by quality", curve.name)
    return q[order], np.log(r[order])


def _integral(q, lr, lo, hi, method: str) -> float:
    if method == "pchip":
        return float(PchipInterpolator(q, lr).integrate(lo, hi))
    if method == "cubic":
        poly = np.polyint(np.polyfit(q, lr, 3))
        return float(np.polyval(poly, hi) - np.polyval(poly, lo))
    raise InvalidInputError(f"unknown interpolation {method!r}; use 'pchip' or 'cubic'")


def bd_rate(anchor: RdCurve, test: RdCurve, method: str = "pchip") -> float:
    """Average bitrate difference (%) of ``test`` against ``anchor`` at equal quality.

    ``method`` selects the interpolation of log-rate over quality: ``pchip``
    (monotone piecewise-cubic Hermite, default) or ``cubic`` (one
    least-squares cubic per curve).
    """
    qa, la = _prepare(anchor)
    qt, lt = _prepare(test)
    lo = max(qa[0], qt[0])
    hi = min(qa[-1], qt[-1])
    if not hi > lo:
        raise NoOverlapError(f"quality ranges of {anchor.name!r} and {test.name!r} do not overlap")
    diff = (_integral(qt, lt, lo, hi, method) - _integral(qa, la, lo, hi, method)) / (hi - lo)
    return (math.exp(diff) - 1.0) * 100.0


def mean_bd_rate(pairs: Sequence[tuple], method: str = "pchip") -> float:
    """Class-level figure: arithmetic mean of per-sequence BD-rates."""
    return float(np.mean([bd_rate(a, t, method) for a, t in pairs]))


# ------------------------------------------------------------ evaluation


@dataclass
class FrameReport:
    frame: int
    psnr_y: float
    psnr_u: float
    psnr_v: float
    psnr_yuv: float
    vmaf: Optional[float] = None


@dataclass
class StreamReport:
    frames: List[FrameReport]
    bitrate_kbps: float
    psnr_y: float
    psnr_u: float
    psnr_v: float
    psnr_yuv: float
    vmaf: Optional[float] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)

    def frames_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["frame", "psnr_y", "psnr_u", "psnr_v", "psnr_yuv", "vmaf"])
        for f in self.frames:
            wr.writerow(
                [f.frame, f"{f.psnr_y:.4f}", f"{f.psnr_u:.4f}", f"{f.psnr_v:.4f}", f"{f.psnr_yuv:.4f}",
                 "" if f.vmaf is None else f"{f.vmaf:.4f}"]
            )
        return buf.getvalue()


def read_vmaf_csv(path) -> Dict[int, float]:
    """Per-frame scores from a ``frame,vmaf`` CSV; a missing file yields ``{}``."""
    if path is None or not os.path.exists(path):
        if path is not None:
            log.warning("VMAF file %s not found; column left empty", path)
        return {}
    with open(path, newline="") as fh:
        return {int(r["frame"]): float(r["vmaf"]) for r in csv.DictReader(fh)}


def evaluate_frames(
    orig: Sequence[Frame], decoded: Sequence[Frame], stream_bits: int, fps: float, vmaf: Optional[Dict[int, float]] = None
) -> StreamReport:
    if len(orig) != len(decoded):
        raise InvalidPairingError(f"frame counts differ: {len(orig)} original vs {len(decoded)} decoded")
    if not orig:
        raise InvalidPairingError("no frames to evaluate")
    vmaf = vmaf or {}
    rows = []
    for i, (a, b) in enumerate(zip(orig, decoded)):
        if a.y.shape != b.y.shape:
            raise InvalidPairingError(f"frame {i}: geometry differs")
        rows.append(FrameReport(i, *frame_psnr(a, b), vmaf.get(i)))
    mean = lambda k: float(np.mean([getattr(r, k) for r in rows]))  # noqa: E731
    scores = [r.vmaf for r in rows if r.vmaf is not None]
    return StreamReport(
        rows,
        kbps(stream_bits, fps, len(orig)),
        mean("psnr_y"),
        mean("psnr_u"),
        mean("psnr_v"),
        mean("psnr_yuv"),
        float(np.mean(scores)) if scores else None,
    )


def _count_frames(path, meta: VideoMeta) -> int:
    size = os.path.getsize(path)
    if size % meta.frame_byte_size:
        raise InvalidPairingError(f"{path}: size {size} is not a whole number of frames")
    return size // meta.frame_byte_size


def evaluate_stream(orig_path, decoded_path, stream: bytes, meta: VideoMeta, vmaf_csv=None) -> StreamReport:
    """Compare two YUV files of ``meta`` geometry; bitrate from the stream size.

    Frame counts come from the file sizes and must agree; the kbps figure
    divides by that count.
    """
    n_orig = _count_frames(orig_path, meta)
    n_dec = _count_frames(decoded_path, meta)
    if n_orig != n_dec:
        raise InvalidPairingError(f"frame counts differ: {n_orig} original vs {n_dec} decoded")
    meta = replace(meta, frame_count=n_orig)
    orig = read_yuv420(orig_path, meta)
    decoded = read_yuv420(decoded_path, meta)
    return evaluate_frames(orig, decoded, 8 * len(stream), meta.fps, read_vmaf_csv(vmaf_csv))
