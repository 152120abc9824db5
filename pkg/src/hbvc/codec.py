"""I-frame and B-frame coding, confidence-based reconstruction, stream codec.

B-frame pipeline: estimate both motion fields, code them (gain of the frame's
level), compensate both references, choose a confidence pair per 16x16
block by rate-distortion cost, code the residual against the blended
prediction (gain of the frame's level), and reconstruct as
``clamp(C_p * pred_p + C_f * pred_f + residual)``.

The encoder reconstructs through the same function the decoder uses, after
the entropy coder's skip substitution, so both sides agree sample for sample.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import entropy as ent
from .bitstream import (
    MULTIPLIERS,
    FramePayload,
    StreamHeader,
    frame_record,
    iter_records,
)
from .errors import (
    BitstreamCorruptionError,
    InvalidInputError,
    ScheduleViolationError,
)
from .frame_io import Frame, crop, pad_to_block_grid
from .gop import CodingUnit, GopSchedule, Kind, build_schedule
from .motion import (
    MotionParams,
    code_motion,
    compensate,
    decode_motion,
    estimate_bidir,
    lambda_for_motion,
)
from .transform import (
    BAND_OF,
    N_BANDS,
    GainTable,
    blocks_to_plane,
    forward_blocks,
    inverse_blocks,
    plane_to_blocks,
    round_half_away,
    snap,
)

log = logging.getLogger(__name__)

BLOCK = 16
# confidence candidates in quarters: (C_p, C_f)
CANDIDATES = ((4, 0), (0, 4), (2, 2), (3, 1), (1, 3), (0, 0))
INTRA = 5
CONF_SYMBOL = np.array([-1, 1, 0, -2, 2, 3], dtype=np.int64)
_SYMBOL_TO_CAND = {int(s): i for i, s in enumerate(CONF_SYMBOL)}

# residual bands: luma inter, chroma inter, luma intra, chroma intra
N_RC_BANDS = 4 * N_BANDS
N_MOTION_BANDS = 2
N_MODELS = {"I": 2 * N_BANDS, "B": N_RC_BANDS + N_MOTION_BANDS + 1}

# RD lambdas of the four operating points, highest quality first
OPERATING_LAMBDAS = (0.05, 0.015, 0.005, 0.001)


def step_for_lambda(lam: float) -> float:
    """High-rate optimal quantizer step for ``bits + lam * 0.8 * SSE``.

    A uniform quantizer has ``D = step^2 / 12`` per coefficient and gains one
    bit per halving of the step, so ``lam * 0.8 * ln2 * step^2 / 6 = 1``.
    """
    return float(np.sqrt(6.0 / (np.log(2.0) * 0.8 * lam)))


@dataclass(frozen=True)
class FrameOverrides:
    """Per-frame encoder choices searched by content adaptation."""

    lam_mult: float = 1.0
    motion_mult: int = 0  # index into MULTIPLIERS
    rc_mult: int = 0  # index into MULTIPLIERS; quant-step multiplier on I-frames
    search_delta: int = 0


IDENTITY = FrameOverrides()


@dataclass
class CodecConfig:
    gop_size: int = 32
    lam: float = 0.015
    base_step: float = 26.0
    gains: GainTable = field(default_factory=lambda: GainTable.ones(6))
    tau: float = ent.DEFAULT_TAU
    motion: MotionParams = field(default_factory=lambda: MotionParams(lambda_me=0.0))
    c_uv: float = 1.0
    c_t: Dict[int, float] = field(default_factory=dict)
    rd_passes: int = 1
    fps: float = 30.0
    truncate: bool = False

    @classmethod
    def operating_point(cls, index: int, **kw) -> "CodecConfig":
        lam = OPERATING_LAMBDAS[index]
        return cls(lam=lam, base_step=step_for_lambda(lam), **kw)

    @property
    def policy(self) -> ent.SkipPolicy:
        return ent.SkipPolicy(self.tau)

    def level_weight(self, level: int) -> float:
        return self.c_t.get(level, 1.0)


@dataclass
class FrameStats:
    t: int
    kind: str
    level: int
    bits_motion: int
    bits_res: int
    mse: Tuple[float, float, float]  # per plane, 8-bit sample scale
    pixels: int
    overrides: FrameOverrides = IDENTITY
    confidence_hist: Tuple[int, ...] = ()

    @property
    def bits(self) -> int:
        return self.bits_motion + self.bits_res


# ------------------------------------------------------------ helpers


def _planes_i64(frame: Frame):
    return [np.asarray(p, dtype=np.int64) for p in frame.planes]


def _scale8(bit_depth: int) -> float:
    """Factor turning native-scale SSE into 8-bit-scale SSE."""
    return 1.0 / float(4 ** (bit_depth - 8))


def plane_mse(a: np.ndarray, b: np.ndarray, bit_depth: int = 8) -> float:
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.mean(d * d)) * _scale8(bit_depth)


def frame_mse(orig: Frame, recon: Frame) -> Tuple[float, float, float]:
    return tuple(plane_mse(a, b, orig.bit_depth) for a, b in zip(orig.planes, recon.planes))


def _block_bands(intra_blocks: np.ndarray, chroma: bool) -> np.ndarray:
    """Band id for every coefficient of every 8x8 block: ``(n, 8, 8)``."""
    group = np.where(intra_blocks, 2, 0) + (1 if chroma else 0)
    return group[:, None, None] * N_BANDS + BAND_OF[None]


def _intra_flags(cand_grid: np.ndarray):
    """Per-8x8-block intra flags for (Y, U, V) in raster block order."""
    intra_mb = cand_grid == INTRA
    luma = np.repeat(np.repeat(intra_mb, 2, 0), 2, 1).ravel()
    return luma, intra_mb.ravel(), intra_mb.ravel()


def _blend(p: np.ndarray, f: np.ndarray, wp: np.ndarray, wf: np.ndarray) -> np.ndarray:
    return (wp * p + wf * f + 2) >> 2


def _weights_planes(cand_grid: np.ndarray):
    """Per-sample (wp, wf) maps for luma and chroma from a candidate grid."""
    wts = np.array(CANDIDATES, dtype=np.int64)
    wp = wts[cand_grid, 0]
    wf = wts[cand_grid, 1]
    ly = lambda g: np.repeat(np.repeat(g, BLOCK, 0), BLOCK, 1)  # noqa: E731
    lc = lambda g: np.repeat(np.repeat(g, BLOCK // 2, 0), BLOCK // 2, 1)  # noqa: E731
    return (ly(wp), ly(wf)), (lc(wp), lc(wf))


def _dpcm(dc: np.ndarray, intra: np.ndarray, start: int, inverse: bool) -> np.ndarray:
    out = dc.copy()
    idx = np.flatnonzero(intra)
    if idx.size == 0:
        return out
    vals = dc[idx]
    if inverse:
        out[idx] = start + np.cumsum(vals)
    else:
        out[idx] = vals - np.concatenate([[start], vals[:-1]])
    return out


def prediction_bases(pp, pf, cand_grid: np.ndarray, bit_depth: int) -> List[np.ndarray]:
    """Blended prediction per plane; intra-like blocks predict mid-gray."""
    (wpy, wfy), (wpc, wfc) = _weights_planes(cand_grid)
    mid = 1 << (bit_depth - 1)
    out = []
    for i, (a, b) in enumerate(zip(pp, pf)):
        wp, wf = (wpy, wfy) if i == 0 else (wpc, wfc)
        out.append(np.where((wp == 0) & (wf == 0), mid, _blend(a, b, wp, wf)))
    return out


def _candidate_bases(pp, pf, k: int, bit_depth: int) -> List[np.ndarray]:
    if k == INTRA:
        return [np.full(a.shape, 1 << (bit_depth - 1), dtype=np.int64) for a in pp]
    wp, wf = CANDIDATES[k]
    return [_blend(a, b, wp, wf) for a, b in zip(pp, pf)]


def reconstruct_planes(
    bases, symbols, intra_flags, shapes, deq_scale: float, bit_depth: int
) -> List[np.ndarray]:
    """Decoder-side reconstruction shared by encoder and decoder.

    ``symbols`` are the transmitted residual symbols per plane ``(n, 8, 8)``
    with DPCM-coded DC on intra blocks; ``bases`` the predictions (mid-gray
    on intra blocks).
    """
    maxval = (1 << bit_depth) - 1
    out = []
    for base, sym, intra, (h, w) in zip(bases, symbols, intra_flags, shapes):
        sym = sym.copy()
        sym[:, 0, 0] = _dpcm(sym[:, 0, 0], intra, 0, inverse=True)
        res = round_half_away(inverse_blocks(sym * deq_scale))
        res = blocks_to_plane(res, h, w)
        out.append(np.clip(base + res, 0, maxval))
    return out


def cfr_reconstruct(pred_p: Frame, pred_f: Frame, plan: np.ndarray, residual) -> Frame:
    """``clamp(C_p * pred_p + C_f * pred_f + residual)`` with block-constant C.

    ``plan`` is the per-16x16 candidate-index grid, ``residual`` a tuple of
    integer planes. The blend is computed in quarters with rounding:
    ``(4*C_p*p + 4*C_f*f + 2) >> 2``.
    """
    plan = np.asarray(plan, dtype=np.int64)
    (wpy, wfy), (wpc, wfc) = _weights_planes(plan)
    maxval = pred_p.max_value
    planes = []
    for i, (a, b) in enumerate(zip(_planes_i64(pred_p), _planes_i64(pred_f))):
        wp, wf = (wpy, wfy) if i == 0 else (wpc, wfc)
        planes.append(np.clip(_blend(a, b, wp, wf) + np.asarray(residual[i], dtype=np.int64), 0, maxval))
    return Frame.from_planes(*planes, bit_depth=pred_p.bit_depth)


# ------------------------------------------------------- candidate search


@dataclass
class _Candidate:
    syms: List[np.ndarray]  # per plane (n, 8, 8), DC not DPCM-coded
    coeffs: List[np.ndarray]
    sse: List[np.ndarray]  # per plane, per 8x8 block, 8-bit scale


def _code_candidate(targets, bases, q_scale, deq_scale, bit_depth, shapes) -> _Candidate:
    maxval = (1 << bit_depth) - 1
    s8 = _scale8(bit_depth)
    syms, coeffs, sses = [], [], []
    for tgt, base, (h, w) in zip(targets, bases, shapes):
        c = forward_blocks(plane_to_blocks(tgt - base))
        s = round_half_away(c * q_scale)
        rec = np.clip(
            plane_to_blocks(base) + round_half_away(inverse_blocks(s * deq_scale)), 0, maxval
        )
        d = plane_to_blocks(tgt) - rec
        syms.append(s)
        coeffs.append(c)
        sses.append((d * d).sum(axis=(1, 2)) * s8)
    return _Candidate(syms, coeffs, sses)


def _proxy_bits(sym: np.ndarray) -> np.ndarray:
    a = np.abs(sym)
    return np.where(a > 0, 3.0 + 2.0 * np.log2(1 + a), 0.05).sum(axis=(1, 2))


def _mb_sum(luma_blk, chroma_blk, mb_shape):
    r, c = mb_shape
    return luma_blk.reshape(r, 2, c, 2).sum(axis=(1, 3)) + chroma_blk.reshape(r, c)


def _candidate_costs(cands, mb_shape, lam, wy, wc, rc_model, conf_model, policy):
    """RD cost ``(6, rows, cols)`` for every candidate and block."""
    out = []
    for k, cand in enumerate(cands):
        intra = k == INTRA
        bits = []
        for pi, s in enumerate(cand.syms):
            if rc_model is None:
                b = _proxy_bits(s)
            else:
                bands = _block_bands(np.full(s.shape[0], intra), chroma=pi > 0)
                b = ent.symbol_costs(s, rc_model, policy, bands).reshape(s.shape).sum(axis=(1, 2))
            bits.append(b)
        rate = _mb_sum(bits[0], bits[1] + bits[2], mb_shape)
        if conf_model is None:
            rate = rate + 2.5
        else:
            rate = rate + ent.symbol_costs([CONF_SYMBOL[k]], conf_model, ent.NO_SKIP)[0]
        dist = wy * _mb_sum(cand.sse[0], np.zeros_like(cand.sse[1]), mb_shape) + wc * _mb_sum(
            np.zeros_like(cand.sse[0]), cand.sse[1] + cand.sse[2], mb_shape
        )
        out.append(rate + lam * dist)
    return np.stack(out)


def _gather(cands, choice_blocks: List[np.ndarray], attr: str):
    """Per plane, pick each block's array from its chosen candidate."""
    out = []
    for pi, ch in enumerate(choice_blocks):
        stack = np.stack([getattr(c, attr)[pi] for c in cands])
        out.append(stack[ch, np.arange(ch.size)])
    return out


def _choice_blocks(cand_grid):
    luma = np.repeat(np.repeat(cand_grid, 2, 0), 2, 1).ravel()
    return [luma, cand_grid.ravel(), cand_grid.ravel()]


def rd_select_confidence(
    target, pred_p, pred_f, lam: float, rc_gain: float = 1.0, base_step: float = 1.0,
    bit_depth: int = 8, rc_model: Optional[ent.SymbolModel] = None,
    conf_model: Optional[ent.SymbolModel] = None, wy: float = 0.8, wc: float = 0.4,
):
    """Best candidate for one 16x16 block.

    Blocks are ``(Y 16x16, U 8x8, V 8x8)`` tuples. Without models, rates use a
    magnitude-based proxy. Returns ``(candidate_index, symbols_per_plane)``.
    """
    if lam <= 0:
        raise InvalidInputError("lambda must be positive")
    targets = [np.asarray(x, dtype=np.int64) for x in target]
    pp = [np.asarray(x, dtype=np.int64) for x in pred_p]
    pf = [np.asarray(x, dtype=np.int64) for x in pred_f]
    shapes = [x.shape for x in targets]
    q_scale = rc_gain / base_step
    deq = base_step / rc_gain
    cands = [
        _code_candidate(targets, _candidate_bases(pp, pf, k, bit_depth), q_scale, deq, bit_depth, shapes)
        for k in range(len(CANDIDATES))
    ]
    costs = _candidate_costs(cands, (1, 1), lam, wy, wc, rc_model, conf_model, ent.NO_SKIP)[:, 0, 0]
    k = int(np.argmin(costs))
    return k, [s.copy() for s in cands[k].syms]


# -------------------------------------------------------------- I-frames


def _rc_scales(cfg_step: float, bit_depth: int, q_enc: float, q_dec: float, mult: float):
    step = cfg_step * (1 << (bit_depth - 8)) * mult
    return q_enc / step, step * q_dec


def _zero_costs(syms, coeffs, deq, lam, weights, s8, dc_protect):
    """Bit-equivalent price of zeroing each symbol (for skip decisions)."""
    out = []
    for s, c, w, intra in zip(syms, coeffs, weights, dc_protect):
        rec = s * deq
        extra = (c * c - (c - rec) ** 2) * s8 * w * lam
        extra = np.where(s != 0, np.maximum(extra, 0.0), 0.0)
        extra[intra, 0, 0] = np.where(s[intra, 0, 0] != 0, np.inf, 0.0)
        out.append(extra)
    return out


def _finish_residual(syms, coeffs, intra_flags, deq, lam, wy, wc, s8, policy, band_offset_intra_only):
    """DPCM, fit models, substitute skipped bands, entropy-code."""
    coded = []
    bands = []
    for pi, (s, intra) in enumerate(zip(syms, intra_flags)):
        s = s.copy()
        s[:, 0, 0] = _dpcm(s[:, 0, 0], intra, 0, inverse=False)
        coded.append(s)
        b = _block_bands(intra, chroma=pi > 0)
        if band_offset_intra_only:
            b = b - 2 * N_BANDS
        bands.append(b)
    zc = _zero_costs(coded, coeffs, deq, lam, (wy, wc, wc), s8, intra_flags)
    flat_s = np.concatenate([s.ravel() for s in coded])
    flat_b = np.concatenate([b.ravel() for b in bands])
    flat_z = np.concatenate([z.ravel() for z in zc])
    n_bands = 2 * N_BANDS if band_offset_intra_only else N_RC_BANDS
    model = ent.fit_model(flat_s, flat_b, n_bands, policy, flat_z)
    data, summary = ent.encode_symbols(flat_s, model, policy, flat_b)
    sub = summary.substituted
    out, pos = [], 0
    for s in coded:
        out.append(sub[pos : pos + s.size].reshape(s.shape))
        pos += s.size
    return model, data, out


def encode_intra(frame: Frame, cfg: CodecConfig, t: int = 0, overrides: FrameOverrides = IDENTITY):
    """Code an I-frame. Returns ``(payload_bytes, reconstruction, stats)``."""
    if frame.height % BLOCK or frame.width % BLOCK:
        raise InvalidInputError("frame must be padded to the block grid")
    bd = frame.bit_depth
    mult = MULTIPLIERS[overrides.rc_mult]
    q_scale, deq = _rc_scales(cfg.base_step, bd, 1.0, 1.0, mult)
    lam = cfg.lam * overrides.lam_mult
    wy, wc = 0.8, 0.4 * cfg.c_uv
    targets = _planes_i64(frame)
    shapes = [p.shape for p in targets]
    mids = [np.full_like(p, 1 << (bd - 1)) for p in targets]
    cand = _code_candidate(targets, mids, q_scale, deq, bd, shapes)
    intra = [np.ones(s.shape[0], dtype=bool) for s in cand.syms]
    model, data, coded = _finish_residual(
        cand.syms, cand.coeffs, intra, deq, lam, wy, wc, _scale8(bd), cfg.policy, True
    )
    planes = reconstruct_planes(mids, coded, intra, shapes, deq, bd)
    recon = Frame.from_planes(*planes, bit_depth=bd, frame_index=t)
    payload = FramePayload(t, "I", 0, overrides.rc_mult, 0, model.to_bytes(), residual=data)
    raw = payload.to_bytes()
    stats = FrameStats(
        t, "I", 0, 0, 8 * (len(raw) + 4), frame_mse(frame, recon), frame.width * frame.height, overrides
    )
    return raw, recon, stats


def _decode_intra(payload: FramePayload, hdr: StreamHeader, shapes) -> Frame:
    bd = hdr.bit_depth
    model = ent.SymbolModel.from_bytes(payload.models)
    _, deq = _rc_scales(hdr.base_step, bd, 1.0, 1.0, MULTIPLIERS[payload.rc_mult])
    nblk = [h * w // 64 for h, w in shapes]
    intra = [np.ones(n, dtype=bool) for n in nblk]
    bands = np.concatenate(
        [(_block_bands(f, pi > 0) - 2 * N_BANDS).ravel() for pi, f in enumerate(intra)]
    )
    syms = ent.decode_symbols(payload.residual, model, ent.SkipPolicy(hdr.tau), bands.size, bands)
    planes_syms, pos = [], 0
    for n in nblk:
        planes_syms.append(syms[pos : pos + 64 * n].reshape(n, 8, 8))
        pos += 64 * n
    mids = [np.full(s, 1 << (bd - 1), dtype=np.int64) for s in shapes]
    planes = reconstruct_planes(mids, planes_syms, intra, shapes, deq, bd)
    return Frame.from_planes(*planes, bit_depth=bd, frame_index=payload.t)


# -------------------------------------------------------------- B-frames


def _motion_streams(fields, q_enc, q_dec, policy):
    syms = []
    decoded = []
    for fld in fields:
        s, _ = code_motion(fld, q_enc, q_dec)
        syms.append(s)
    n = fields[0].vy.size
    flat = np.concatenate(syms)
    bands = np.tile(np.repeat([0, 1], n), 2)
    # motion bands are never dropped when they carry nonzero symbols
    model = ent.fit_model(flat, bands, N_MOTION_BANDS, policy, np.where(flat != 0, np.inf, 0.0))
    data, summary = ent.encode_symbols(flat, model, policy, bands)
    sub = summary.substituted
    rows, cols = fields[0].shape
    for i, fld in enumerate(fields):
        part = sub[i * 2 * n : (i + 1) * 2 * n]
        decoded.append(decode_motion(part, rows, cols, fld.block_size, q_dec))
    return model, data, decoded


def encode_bframe(
    unit: CodingUnit,
    frame: Frame,
    ref_p: Optional[Frame],
    ref_f: Optional[Frame],
    cfg: CodecConfig,
    overrides: FrameOverrides = IDENTITY,
):
    """Code a B-frame from two reconstructed references.

    Returns ``(payload_bytes, reconstruction, stats)``.
    """
    if ref_p is None or ref_f is None:
        raise ScheduleViolationError(f"frame {unit.t}: reference {unit.p} or {unit.f} not decoded")
    if frame.height % BLOCK or frame.width % BLOCK:
        raise InvalidInputError("frame must be padded to the block grid")
    bd = frame.bit_depth
    level = unit.level
    lam = cfg.lam * overrides.lam_mult
    c_t = cfg.level_weight(level)
    wy, wc = 0.8 * c_t, 0.4 * cfg.c_uv * c_t
    policy = cfg.policy

    # motion
    mp = cfg.motion
    mp = replace(
        mp,
        search_range=mp.search_range + overrides.search_delta,
        lambda_me=mp.lambda_me or lambda_for_motion(lam),
    )
    fields = estimate_bidir(frame, ref_p, ref_f, mp)
    mq_enc, mq_dec = cfg.gains.lookup("motion", level)
    mm = MULTIPLIERS[overrides.motion_mult]
    m_model, m_data, (dec_p, dec_f) = _motion_streams(fields, mq_enc * mm, mq_dec / mm, policy)
    pred_p = compensate(ref_p, dec_p)
    pred_f = compensate(ref_f, dec_f)

    # confidence + residual
    rq_enc, rq_dec = cfg.gains.lookup("rc", level)
    q_scale, deq = _rc_scales(cfg.base_step, bd, rq_enc, rq_dec, MULTIPLIERS[overrides.rc_mult])
    targets = _planes_i64(frame)
    shapes = [p.shape for p in targets]
    pp, pf = _planes_i64(pred_p), _planes_i64(pred_f)
    cands = [
        _code_candidate(targets, _candidate_bases(pp, pf, k, bd), q_scale, deq, bd, shapes)
        for k in range(len(CANDIDATES))
    ]
    mb_shape = (frame.height // BLOCK, frame.width // BLOCK)
    s8 = _scale8(bd)

    rc_model = conf_model = None
    choice = None
    for _ in range(cfg.rd_passes + 1):
        costs = _candidate_costs(cands, mb_shape, lam, wy, wc, rc_model, conf_model, policy)
        choice = np.argmin(costs, axis=0)
        syms = _gather(cands, _choice_blocks(choice), "syms")
        intra = _intra_flags(choice)
        flat_s, flat_b = [], []
        for pi, (s, f) in enumerate(zip(syms, intra)):
            s = s.copy()
            s[:, 0, 0] = _dpcm(s[:, 0, 0], f, 0, inverse=False)
            flat_s.append(s.ravel())
            flat_b.append(_block_bands(f, pi > 0).ravel())
        rc_model = ent.fit_model(np.concatenate(flat_s), np.concatenate(flat_b), N_RC_BANDS)
        conf_model = ent.fit_model(CONF_SYMBOL[choice.ravel()], None, 1)

    coeffs = _gather(cands, _choice_blocks(choice), "coeffs")
    rc_model, r_data, coded = _finish_residual(
        syms, coeffs, intra, deq, lam, wy, wc, s8, policy, False
    )
    conf_syms = CONF_SYMBOL[choice.ravel()]
    c_data, _ = ent.encode_symbols(conf_syms, conf_model, ent.NO_SKIP)

    bases = prediction_bases(pp, pf, choice, bd)
    planes = reconstruct_planes(bases, coded, intra, shapes, deq, bd)
    recon = Frame.from_planes(*planes, bit_depth=bd, frame_index=unit.t)

    models = rc_model.to_bytes() + m_model.to_bytes() + conf_model.to_bytes()
    payload = FramePayload(
        unit.t, "B", level, overrides.rc_mult, overrides.motion_mult, models,
        motion=m_data, confidence=c_data, residual=r_data,
    )
    raw = payload.to_bytes()
    bits_motion = 8 * (len(m_data) + N_MOTION_BANDS)
    stats = FrameStats(
        unit.t, "B", level, bits_motion, 8 * (len(raw) + 4) - bits_motion,
        frame_mse(frame, recon), frame.width * frame.height, overrides,
        tuple(np.bincount(choice.ravel(), minlength=len(CANDIDATES)).tolist()),
    )
    return raw, recon, stats


def _decode_bframe(payload: FramePayload, hdr: StreamHeader, ref_p: Frame, ref_f: Frame) -> Frame:
    bd = hdr.bit_depth
    level = payload.level
    policy = ent.SkipPolicy(hdr.tau)
    models = payload.models
    rc_model = ent.SymbolModel.from_bytes(models[:N_RC_BANDS])
    m_model = ent.SymbolModel.from_bytes(models[N_RC_BANDS : N_RC_BANDS + N_MOTION_BANDS])
    conf_model = ent.SymbolModel.from_bytes(models[N_RC_BANDS + N_MOTION_BANDS :])
    h, w = ref_p.height, ref_p.width
    bs = hdr.block_size
    rows, cols = h // bs, w // bs

    _, mq_dec = hdr.gains.lookup("motion", level)
    mm = MULTIPLIERS[payload.motion_mult]
    n = rows * cols
    mbands = np.tile(np.repeat([0, 1], n), 2)
    msyms = ent.decode_symbols(payload.motion, m_model, policy, mbands.size, mbands)
    dec_p = decode_motion(msyms[: 2 * n], rows, cols, bs, mq_dec / mm)
    dec_f = decode_motion(msyms[2 * n :], rows, cols, bs, mq_dec / mm)
    pred_p = compensate(ref_p, dec_p)
    pred_f = compensate(ref_f, dec_f)

    mb_shape = (h // BLOCK, w // BLOCK)
    csyms = ent.decode_symbols(payload.confidence, conf_model, ent.NO_SKIP, mb_shape[0] * mb_shape[1])
    try:
        choice = np.array([_SYMBOL_TO_CAND[int(s)] for s in csyms], dtype=np.int64).reshape(mb_shape)
    except KeyError as exc:
        raise BitstreamCorruptionError(f"frame {payload.t}: invalid confidence symbol") from exc
    intra = _intra_flags(choice)
    bands = np.concatenate([_block_bands(f, pi > 0).ravel() for pi, f in enumerate(intra)])
    syms = ent.decode_symbols(payload.residual, rc_model, policy, bands.size, bands)
    shapes = [(h, w), (h // 2, w // 2), (h // 2, w // 2)]
    planes_syms, pos = [], 0
    for sh in shapes:
        k = sh[0] * sh[1] // 64
        planes_syms.append(syms[pos : pos + 64 * k].reshape(k, 8, 8))
        pos += 64 * k

    rq_enc, rq_dec = hdr.gains.lookup("rc", level)
    _, deq = _rc_scales(hdr.base_step, bd, rq_enc, rq_dec, MULTIPLIERS[payload.rc_mult])
    pp, pf = _planes_i64(pred_p), _planes_i64(pred_f)
    bases = prediction_bases(pp, pf, choice, bd)
    planes = reconstruct_planes(bases, planes_syms, intra, shapes, deq, bd)
    return Frame.from_planes(*planes, bit_depth=bd, frame_index=payload.t)


# ---------------------------------------------------------------- streams


@dataclass
class EncodeResult:
    stream: bytes
    header: StreamHeader
    schedule: GopSchedule
    recon: Dict[int, Frame]  # display index -> cropped reconstruction
    stats: List[FrameStats]
    payloads: Dict[int, bytes]

    def recon_sequence(self) -> List[Frame]:
        return [self.recon[t] for t in sorted(self.recon)]

    @property
    def total_bits(self) -> int:
        return 8 * len(self.stream)


def make_header(cfg: CodecConfig, frame: Frame, n_frames: int, gains: GainTable) -> StreamHeader:
    h, w = frame.orig_size or (frame.height, frame.width)
    return StreamHeader(
        w, h, frame.bit_depth, cfg.fps, cfg.gop_size, n_frames,
        cfg.base_step, cfg.tau, cfg.motion.block_size, gains,
    )


def encode_unit(unit, frame, recon_refs, cfg, overrides=IDENTITY):
    if unit.kind is Kind.INTRA:
        return encode_intra(frame, cfg, unit.t, overrides)
    return encode_bframe(unit, frame, recon_refs.get(unit.p), recon_refs.get(unit.f), cfg, overrides)


def prepare(frames: Sequence[Frame], cfg: CodecConfig):
    """Pad frames, build the schedule and the complete gain table."""
    if not frames:
        raise InvalidInputError("no frames to encode")
    if cfg.motion.block_size != BLOCK:
        raise InvalidInputError(f"codec block size is fixed at {BLOCK}")
    schedule = build_schedule(len(frames), cfg.gop_size, truncate=cfg.truncate)
    padded = [pad_to_block_grid(f, BLOCK) for f in frames[: schedule.n_frames]]
    n_levels = max((u.level for u in schedule.units), default=0)
    gains = cfg.gains.completed(n_levels) if n_levels else cfg.gains
    # the header carries these in 16.16; code with exactly what it will say
    return schedule, padded, replace(cfg, gains=gains, base_step=snap(cfg.base_step), tau=snap(cfg.tau))


def encode_sequence(frames: Sequence[Frame], cfg: CodecConfig, overrides=None) -> EncodeResult:
    """Encode a display-order sequence.

    ``overrides`` maps display index -> :class:`FrameOverrides`.
    """
    overrides = overrides or {}
    schedule, padded, cfg = prepare(frames, cfg)
    hdr = make_header(cfg, padded[0], schedule.n_frames, cfg.gains)
    parts = [hdr.to_bytes()]
    recon_full: Dict[int, Frame] = {}
    payloads: Dict[int, bytes] = {}
    stats = []
    for unit in schedule.units:
        raw, recon, st = encode_unit(unit, padded[unit.t], recon_full, cfg, overrides.get(unit.t, IDENTITY))
        recon_full[unit.t] = recon
        payloads[unit.t] = raw
        parts.append(frame_record(raw))
        stats.append(st)
        log.debug("frame %d %s level %d: %d bits", unit.t, unit.kind.value, unit.level, st.bits)
    ow, oh = hdr.width, hdr.height
    recon = {t: crop(f, oh, ow) for t, f in recon_full.items()}
    return EncodeResult(b"".join(parts), hdr, schedule, recon, stats, payloads)


def decode_available(data: bytes):
    """Decode every frame whose payload and references are present.

    Returns ``(header, frames, missing)`` with ``frames`` keyed by display
    index. Raises :class:`BitstreamCorruptionError` (carrying the frames
    decoded so far) on a damaged record.
    """
    hdr, offset = StreamHeader.from_bytes(data)
    schedule = build_schedule(hdr.n_frames, hdr.gop_size) if hdr.n_frames else None
    units = schedule.by_frame() if schedule else {}
    ph = hdr.height + (-hdr.height % BLOCK)
    pw = hdr.width + (-hdr.width % BLOCK)
    shapes = [(ph, pw), (ph // 2, pw // 2), (ph // 2, pw // 2)]
    full: Dict[int, Frame] = {}

    def cropped():
        return {t: crop(f, hdr.height, hdr.width) for t, f in full.items()}

    def last_good():
        return max(full, default=-1)

    try:
        for _, raw in iter_records(data, offset):
            payload = FramePayload.from_bytes(raw, lambda k: N_MODELS[k])
            unit = units.get(payload.t)
            if unit is None or (payload.kind == "I") != unit.is_intra or payload.level != unit.level:
                raise BitstreamCorruptionError(f"payload for frame {payload.t} does not match the schedule")
            if unit.is_intra:
                full[unit.t] = _decode_intra(payload, hdr, shapes)
            elif unit.p in full and unit.f in full:
                full[unit.t] = _decode_bframe(payload, hdr, full[unit.p], full[unit.f])
    except BitstreamCorruptionError as exc:
        missing = sorted(set(range(hdr.n_frames)) - set(full))
        raise BitstreamCorruptionError(str(exc), cropped(), last_good(), missing) from exc
    missing = sorted(set(range(hdr.n_frames)) - set(full))
    return hdr, cropped(), missing


def decode_stream(data: bytes) -> List[Frame]:
    """Decode a complete stream to display order.

    Raises :class:`BitstreamCorruptionError` if any frame is missing or a
    payload is damaged; the exception carries the decodable frames.
    """
    hdr, frames, missing = decode_available(data)
    if missing:
        raise BitstreamCorruptionError(
            f"{len(missing)} frame(s) missing, first {missing[0]}",
            frames, max(frames, default=-1), missing,
        )
    return [frames[t] for t in range(hdr.n_frames)]
