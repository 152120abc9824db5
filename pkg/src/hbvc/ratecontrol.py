"""Hierarchical RD loss, random-path gain calibration and content adaptation.

Rates inside the loss are bits per luma pixel and distortion is the weighted
YUV MSE on the 8-bit scale, so ``loss = bpp + lambda * D`` (the same balance
the codec's per-block decisions use, divided by the pixel count).
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import codec
from .codec import IDENTITY, CodecConfig, FrameOverrides, FrameStats
from .errors import InsufficientDataError, InvalidInputError
from .frame_io import Frame, crop
from .gop import CodingUnit, enumerate_leaves, log2_exact, path_for_leaf, sample_random_path
from .transform import STREAMS, GainTable

log = logging.getLogger(__name__)

CALIBRATION_MULTIPLIERS = (0.8, 1.25)
PATHS_PER_CLIP = 8


@dataclass(frozen=True)
class LossWeights:
    lam: float = 0.015
    c_t: Dict[int, float] = field(default_factory=dict)
    c_uv: float = 1.0

    def __post_init__(self):
        if not self.lam > 0 or not self.c_uv > 0 or any(not v > 0 for v in self.c_t.values()):
            raise InvalidInputError("loss weights must be positive")

    def level_weight(self, level: int) -> float:
        return self.c_t.get(level, 1.0)

    @classmethod
    def from_config(cls, cfg: CodecConfig) -> "LossWeights":
        return cls(cfg.lam, dict(cfg.c_t), cfg.c_uv)


def distortion_from_mse(mse_y: float, mse_u: float, mse_v: float, w: LossWeights, level: int = 0) -> float:
    return (8.0 * mse_y + w.c_uv * (mse_u + mse_v)) / 10.0 * w.level_weight(level)


def distortion_yuv(orig: Frame, recon: Frame, w: LossWeights, level: int = 0) -> float:
    """Weighted YUV MSE of one frame (8-bit sample scale)."""
    if orig.y.shape != recon.y.shape or orig.bit_depth != recon.bit_depth:
        raise InvalidInputError("frames differ in geometry or bit depth")
    return distortion_from_mse(*codec.frame_mse(orig, recon), w, level)


# ---------------------------------------------------------------- losses


@dataclass(frozen=True)
class UnitLoss:
    t: int
    level: int
    rate_motion: float  # bpp
    rate_res: float
    dist: float

    @property
    def weight(self) -> int:
        return 1 << self.level

    def loss(self, lam: float) -> float:
        return self.rate_motion + self.rate_res + lam * self.dist


@dataclass
class PathLossReport:
    i_rate: float
    i_dist: float
    units: List[UnitLoss]
    lam: float
    total: float = 0.0

    def __post_init__(self):
        self.total = self.recompute()

    @property
    def b_term(self) -> float:
        return sum(u.loss(self.lam) * u.weight for u in self.units)

    def recompute(self) -> float:
        return self.i_rate + self.lam * self.i_dist + self.b_term


def _unit_loss(st: FrameStats, w: LossWeights) -> UnitLoss:
    return UnitLoss(
        st.t,
        st.level,
        st.bits_motion / st.pixels,
        st.bits_res / st.pixels,
        distortion_from_mse(*st.mse, w, st.level),
    )


def path_loss(i_stats: Sequence[FrameStats], unit_stats: Sequence[FrameStats], w: LossWeights) -> PathLossReport:
    """Layer-weighted loss of one random path.

    ``i_stats`` are the intra frames the path depends on; their rates add up
    and so do their distortions. Each B-frame term is weighted by
    ``2 ** level``.
    """
    if isinstance(i_stats, FrameStats):
        i_stats = [i_stats]
    i_rate = sum(s.bits / s.pixels for s in i_stats)
    i_dist = sum(distortion_from_mse(*s.mse, w, 0) for s in i_stats)
    return PathLossReport(i_rate, i_dist, [_unit_loss(s, w) for s in unit_stats], w.lam)


def frame_cost(st: FrameStats, w: LossWeights) -> float:
    """Single-frame RD cost in bits: ``bits + lambda * N * D``."""
    return st.bits + w.lam * st.pixels * distortion_from_mse(*st.mse, w, st.level)


def sequence_loss(stats: Iterable[FrameStats], w: LossWeights) -> float:
    return sum(frame_cost(s, w) for s in stats)


# --------------------------------------------------------- path encoding


class GopEncoder:
    """Encodes frames of the first GoP of a clip on demand, caching results.

    Each frame's coding depends only on its ancestors, so a cached frame is
    identical whether it was produced for one path or for the whole GoP.
    """

    def __init__(self, clip: Sequence[Frame], gop_size: int, cfg: CodecConfig):
        log2_exact(gop_size)
        if len(clip) < gop_size + 1:
            raise InsufficientDataError(
                f"clip has {len(clip)} frames, calibration needs gop_size + 1 = {gop_size + 1}"
            )
        cfg = replace(cfg, gop_size=gop_size, truncate=False)
        self.schedule, self.frames, self.cfg = codec.prepare(list(clip[: gop_size + 1]), cfg)
        self.gop_size = gop_size
        self.units = self.schedule.by_frame()
        self.recon: Dict[int, Frame] = {}
        self.stats: Dict[int, FrameStats] = {}

    def encode(self, t: int) -> FrameStats:
        if t in self.stats:
            return self.stats[t]
        unit: CodingUnit = self.units[t]
        if not unit.is_intra:
            self.encode(unit.p)
            self.encode(unit.f)
        _, recon, st = codec.encode_unit(unit, self.frames[t], self.recon, self.cfg)
        self.recon[t] = recon
        self.stats[t] = st
        return st

    def intra_stats(self) -> List[FrameStats]:
        return [self.encode(0), self.encode(self.gop_size)]

    def path_report(self, leaf: int, w: LossWeights) -> PathLossReport:
        path = path_for_leaf(self.gop_size, leaf)
        return path_loss(self.intra_stats(), [self.encode(u.t) for u in path.units], w)

    def all_bframe_losses(self, w: LossWeights) -> Dict[int, float]:
        return {
            t: _unit_loss(self.encode(t), w).loss(w.lam)
            for t, u in self.units.items()
            if not u.is_intra
        }


def expected_path_loss_exact(clip: Sequence[Frame], gop_size: int, w: LossWeights, cfg: CodecConfig) -> float:
    """Intra terms plus the average layer-weighted B-frame sum over every leaf.

    Each leaf's path is encoded by its own fresh encoder.
    """
    if gop_size > 16:
        raise InvalidInputError("exact enumeration supports gop_size <= 16")
    paths = enumerate_leaves(gop_size)
    b_terms = []
    i_term = None
    for path in paths:
        enc = GopEncoder(clip, gop_size, cfg)
        rep = enc.path_report(path.leaf, w)
        b_terms.append(rep.b_term)
        i_term = rep.i_rate + w.lam * rep.i_dist
    return i_term + float(np.mean(b_terms))


def full_bframe_loss_sum(clip: Sequence[Frame], gop_size: int, w: LossWeights, cfg: CodecConfig) -> Tuple[float, float]:
    """``(intra term, sum of unweighted B-frame losses)`` from one full-GoP encode."""
    enc = GopEncoder(clip, gop_size, cfg)
    i_stats = enc.intra_stats()
    rep = path_loss(i_stats, [], w)
    return rep.total, float(sum(enc.all_bframe_losses(w).values()))


# ------------------------------------------------------------ calibration


@dataclass
class CalibrationStep:
    index: int
    stream: str
    level: int
    multiplier: float
    objective: float
    accepted: bool


@dataclass
class CalibrationResult:
    gains: GainTable
    objective: float
    initial_objective: float
    log: List[CalibrationStep]

    def accepted_objectives(self) -> List[float]:
        return [self.initial_objective] + [s.objective for s in self.log if s.accepted]


def _sample_leaves(n_clips: int, gop_size: int, k: int, seed: int) -> List[List[int]]:
    rng = np.random.default_rng(seed)
    return [[sample_random_path(gop_size, rng).leaf for _ in range(k)] for _ in range(n_clips)]


def calibration_objective(clips, gop_size, w, cfg, gains, leaves) -> float:
    """Mean path loss over the given leaves of every clip."""
    cfg = replace(cfg, gains=gains)
    per_clip = []
    for clip, clip_leaves in zip(clips, leaves):
        enc = GopEncoder(clip, gop_size, cfg)
        reports = {leaf: enc.path_report(leaf, w) for leaf in set(clip_leaves)}
        per_clip.append(np.mean([reports[leaf].total for leaf in clip_leaves]))
    return float(np.mean(per_clip))


def calibrate_gains(
    clips: Sequence[Sequence[Frame]],
    gop_size: int,
    w: LossWeights,
    budget: int = 1,
    seed: int = 0,
    cfg: Optional[CodecConfig] = None,
    paths_per_clip: int = PATHS_PER_CLIP,
    streams: Sequence[str] = STREAMS,
    levels: Optional[Sequence[int]] = None,
    init: Optional[GainTable] = None,
) -> CalibrationResult:
    """Coordinate descent on per-level encoder gains (decoder gains tied).

    Every pass visits each ``(stream, level)`` coordinate and tries scaling its
    gain by each of :data:`CALIBRATION_MULTIPLIERS`; a trial is kept only if it
    lowers the objective. The sampled leaves are drawn once from ``seed`` and
    reused for every evaluation, so comparisons are paired and the run is
    deterministic.
    """
    if not clips:
        raise InsufficientDataError("calibration needs at least one clip")
    n_levels = log2_exact(gop_size)
    for clip in clips:
        if len(clip) < gop_size + 1:
            raise InsufficientDataError(f"clip of {len(clip)} frames is shorter than GoP {gop_size} + 1")
    cfg = cfg or CodecConfig(lam=w.lam)
    cfg = replace(cfg, lam=w.lam, c_t=dict(w.c_t), c_uv=w.c_uv)
    levels = list(levels) if levels is not None else list(range(1, n_levels + 1))
    current = (init or GainTable.ones(n_levels)).completed(n_levels)
    leaves = _sample_leaves(len(clips), gop_size, paths_per_clip, seed)
    best = initial = calibration_objective(clips, gop_size, w, cfg, current, leaves)
    steps: List[CalibrationStep] = []
    for _ in range(budget):
        improved = False
        for stream in streams:
            for level in levels:
                q, _ = current.lookup(stream, level)
                for mult in CALIBRATION_MULTIPLIERS:
                    trial = current.with_gain(stream, level, q * mult)
                    obj = calibration_objective(clips, gop_size, w, cfg, trial, leaves)
                    ok = obj < best
                    steps.append(CalibrationStep(len(steps), stream, level, mult, obj, ok))
                    log.info("calibrate %s L%d x%.2f -> %.6f%s", stream, level, mult, obj, " *" if ok else "")
                    if ok:
                        best, current, improved = obj, trial, True
                        break
        if not improved:
            break
    return CalibrationResult(current, best, initial, steps)


# ------------------------------------------------------- content adaptation


@dataclass
class FrameAdaptation:
    t: int
    kind: str
    level: int
    overrides: FrameOverrides
    cost_before: float
    cost_after: float


@dataclass
class AdaptationResult:
    frames: List[FrameAdaptation]
    result: codec.EncodeResult

    @property
    def stream(self) -> bytes:
        return self.result.stream

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(
            ["frame", "kind", "level", "lam_mult", "motion_mult", "rc_mult", "search_delta", "cost_before", "cost_after"]
        )
        for f in sorted(self.frames, key=lambda f: f.t):
            o = f.overrides
            wr.writerow(
                [f.t, f.kind, f.level, o.lam_mult, codec.MULTIPLIERS[o.motion_mult],
                 codec.MULTIPLIERS[o.rc_mult], o.search_delta, f"{f.cost_before:.3f}", f"{f.cost_after:.3f}"]
            )
        return buf.getvalue()


LAMBDA_OFFSETS = (0.75, 1.33)
SEARCH_OFFSETS = (8,)


def _offset_groups(unit: CodingUnit):
    """Candidate offsets per group, in search order (identity implicit)."""
    if unit.is_intra:
        return [("rc_mult", (1, 2))]
    groups = [("lam_mult", LAMBDA_OFFSETS), ("motion_mult", (1, 2))]
    if unit.t % 2 == 1:
        groups.append(("rc_mult", (1, 2)))
    groups.append(("search_delta", SEARCH_OFFSETS))
    return groups


def content_adapt(
    frames: Sequence[Frame],
    cfg: CodecConfig,
    w: Optional[LossWeights] = None,
    budget: int = 1,
    reference_protect: bool = True,
) -> AdaptationResult:
    """Per-frame greedy search over encoder-side offsets, in decode order.

    Each frame is judged on its own RD cost (``bits + lambda * N * D``) given
    the already-chosen references. Offsets change only encoder decisions and
    per-frame payload fields, so the stream header is unchanged and any
    decoder reads the result. ``budget`` is the number of passes over the
    offset groups; 0 reproduces the plain encode.

    With ``reference_protect``, an offset on a frame that other frames
    reference (intra frames and even ``t``) is accepted only if it does not
    raise that frame's distortion: a cheaper but worse reference usually
    costs its descendants more than it saves.
    """
    w = w or LossWeights.from_config(cfg)

    def _dist(st: FrameStats) -> float:
        return distortion_from_mse(*st.mse, w, st.level)

    schedule, padded, cfg = codec.prepare(frames, cfg)
    hdr = codec.make_header(cfg, padded[0], schedule.n_frames, cfg.gains)
    recon: Dict[int, Frame] = {}
    payloads: Dict[int, bytes] = {}
    parts = [hdr.to_bytes()]
    all_stats: List[FrameStats] = []
    record: List[FrameAdaptation] = []
    for unit in schedule.units:
        frame = padded[unit.t]

        def run(ov: FrameOverrides):
            return codec.encode_unit(unit, frame, recon, cfg, ov)

        # frames others predict from may not trade quality for rate
        protect = reference_protect and (unit.is_intra or unit.t % 2 == 0)
        best_out = run(IDENTITY)
        before = best = frame_cost(best_out[2], w)
        choice = IDENTITY
        for _ in range(budget):
            changed = False
            for name, values in _offset_groups(unit):
                for value in values:
                    if getattr(choice, name) == value:
                        continue
                    trial = replace(choice, **{name: value})
                    out = run(trial)
                    cost = frame_cost(out[2], w)
                    if cost < best and (not protect or _dist(out[2]) <= _dist(best_out[2])):
                        best, best_out, choice, changed = cost, out, trial, True
                        break
            if not changed:
                break
        raw, rec, st = best_out
        recon[unit.t] = rec
        payloads[unit.t] = raw
        parts.append(codec.frame_record(raw))
        all_stats.append(st)
        record.append(FrameAdaptation(unit.t, unit.kind.value, unit.level, choice, before, best))
    cropped = {t: crop(f, hdr.height, hdr.width) for t, f in recon.items()}
    result = codec.EncodeResult(b"".join(parts), hdr, schedule, cropped, all_stats, payloads)
    return AdaptationResult(record, result)
