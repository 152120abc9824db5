"""Bidirectional block motion: estimation, compensation and vector coding.

Block matching stands in for a learned flow estimator. Each B-frame gets one
field toward the past reference and one toward the future reference,
estimated independently on luma. Vectors are stored in quarter-pel units and
follow the content: a block predicted from ``ref[y - dy, x - dx]`` has vector
``(dx, dy)``, so content moving right gives positive ``dx``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ._kernels import motion as K
from .errors import InvalidInputError
from .frame_io import Frame
from .transform import round_half_away, scale_dequantize, scale_quantize

SUBPEL_CHOICES = (1, 2, 4)


@dataclass(frozen=True)
class MotionParams:
    block_size: int = 16
    search_range: int = 32
    subpel: int = 4  # 1 = integer, 2 = half, 4 = quarter pel
    lambda_me: float = 4.0

    def __post_init__(self):
        if self.block_size not in (8, 16, 32):
            raise InvalidInputError(f"block size {self.block_size} not in (8, 16, 32)")
        if self.search_range < 1:
            raise InvalidInputError("search range must be >= 1")
        if self.subpel not in SUBPEL_CHOICES:
            raise InvalidInputError(f"subpel {self.subpel} not in {SUBPEL_CHOICES}")


@dataclass
class MotionField:
    block_size: int
    vy: np.ndarray  # (rows, cols) quarter-pel
    vx: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.vy.shape

    @classmethod
    def zeros(cls, rows: int, cols: int, block_size: int = 16) -> "MotionField":
        z = np.zeros((rows, cols), dtype=np.int64)
        return cls(block_size, z, z.copy())

    @classmethod
    def uniform(cls, rows, cols, dx, dy, block_size=16) -> "MotionField":
        return cls(
            block_size,
            np.full((rows, cols), dy, dtype=np.int64),
            np.full((rows, cols), dx, dtype=np.int64),
        )

    def vectors(self) -> np.ndarray:
        """``(rows, cols, 2)`` array of ``(dx, dy)``."""
        return np.stack([self.vx, self.vy], axis=-1)

    def __eq__(self, other):
        return (
            isinstance(other, MotionField)
            and self.block_size == other.block_size
            and np.array_equal(self.vy, other.vy)
            and np.array_equal(self.vx, other.vx)
        )

    def to_json(self) -> str:
        return json.dumps({"block_size": self.block_size, "dx": self.vx.tolist(), "dy": self.vy.tolist()})


def lambda_for_motion(rd_lambda: float) -> float:
    """SAD-domain multiplier for motion search from the frame's RD lambda.

    The RD cost is ``bits + lambda * 0.8 * SSE_luma``; the usual square-root
    relation between SSE and SAD multipliers gives ``sqrt(1 / (0.8 lambda))``.
    """
    return float(np.sqrt(1.0 / (0.8 * rd_lambda)))


def _check_geometry(*frames: Frame):
    ref = frames[0]
    for f in frames[1:]:
        if f.y.shape != ref.y.shape or f.bit_depth != ref.bit_depth:
            raise InvalidInputError("frames differ in geometry or bit depth")


def _refine(target, ref, bs, vy, vx, lam, step, maxval):
    """One subpel stage: test the 8 neighbours at distance ``step`` (quarter-pel)."""
    nby, nbx = vy.shape
    tgt = target.astype(np.int64)

    def cost_of(cy, cx):
        pred = K.interp_plane(ref, cy, cx, bs, maxval)
        sad = np.abs(tgt - pred).reshape(nby, bs, nbx, bs).sum(axis=(1, 3))
        rate = K.se_bits_np(cx) + K.se_bits_np(cy)
        return sad + lam * rate, rate, np.abs(cx) + np.abs(cy)

    best, best_rate, best_l1 = cost_of(vy, vx)
    by, bx = vy.copy(), vx.copy()
    for ddy in (-step, 0, step):
        for ddx in (-step, 0, step):
            if ddy == 0 and ddx == 0:
                continue
            cy, cx = vy + ddy, vx + ddx
            cost, rate, l1 = cost_of(cy, cx)
            better = (cost < best) | (
                (cost == best) & ((rate < best_rate) | ((rate == best_rate) & (l1 < best_l1)))
            )
            best = np.where(better, cost, best)
            best_rate = np.where(better, rate, best_rate)
            best_l1 = np.where(better, l1, best_l1)
            by = np.where(better, cy, by)
            bx = np.where(better, cx, bx)
    return by, bx


def estimate(target: Frame, ref: Frame, params: MotionParams) -> MotionField:
    """Single-direction luma block matching with subpel refinement."""
    _check_geometry(target, ref)
    bs, r = params.block_size, params.search_range
    if target.height % bs or target.width % bs:
        raise InvalidInputError(f"frame {target.width}x{target.height} not on a {bs} grid")
    pad = r + 2
    padded = np.pad(ref.y.astype(np.int64), pad, mode="edge")
    vy, vx = K.full_search(
        np.ascontiguousarray(target.y, dtype=np.int64), padded, pad, bs, r, float(params.lambda_me)
    )
    vy, vx = vy * 4, vx * 4
    refy = np.ascontiguousarray(ref.y, dtype=np.int64)
    if params.subpel >= 2:
        vy, vx = _refine(target.y, refy, bs, vy, vx, params.lambda_me, 2, ref.max_value)
    if params.subpel == 4:
        vy, vx = _refine(target.y, refy, bs, vy, vx, params.lambda_me, 1, ref.max_value)
    # kernels read ref[x + v]; stored vectors point along the motion
    return MotionField(bs, -vy, -vx)


def estimate_bidir(
    target: Frame, ref_p: Frame, ref_f: Frame, params: MotionParams
) -> Tuple[MotionField, MotionField]:
    _check_geometry(target, ref_p, ref_f)
    return estimate(target, ref_p, params), estimate(target, ref_f, params)


def compensate(ref: Frame, field: MotionField) -> Frame:
    """Prediction of every plane from ``ref``; chroma uses the halved vectors."""
    bs = field.block_size
    rows, cols = field.shape
    if (rows * bs, cols * bs) != ref.y.shape:
        raise InvalidInputError("motion grid does not match frame geometry")
    mx = ref.max_value
    y = K.interp_plane(np.ascontiguousarray(ref.y, dtype=np.int64), -field.vy, -field.vx, bs, mx)
    cvy, cvx = field.vy >> 1, field.vx >> 1
    u = K.interp_plane(np.ascontiguousarray(ref.u, dtype=np.int64), -cvy, -cvx, bs // 2, mx)
    v = K.interp_plane(np.ascontiguousarray(ref.v, dtype=np.int64), -cvy, -cvx, bs // 2, mx)
    return Frame.from_planes(y, u, v, ref.bit_depth, ref.frame_index)


# ------------------------------------------------------------ vector coding


def median_predictor(decoded: np.ndarray, r: int, c: int) -> int:
    """Median of the available left/top/top-left neighbours (0 if none)."""
    if r == 0 and c == 0:
        return 0
    if r == 0:
        return int(decoded[r, c - 1])
    if c == 0:
        return int(decoded[r - 1, c])
    a, b, d = int(decoded[r, c - 1]), int(decoded[r - 1, c]), int(decoded[r - 1, c - 1])
    return a + b + d - max(a, b, d) - min(a, b, d)


def motion_latent(field: MotionField) -> np.ndarray:
    """Open-loop prediction residuals ``(rows, cols, 2)`` as ``(dx, dy)``."""
    out = np.zeros(field.shape + (2,), dtype=np.int64)
    for comp, grid in enumerate((field.vx, field.vy)):
        for r in range(grid.shape[0]):
            for c in range(grid.shape[1]):
                out[r, c, comp] = grid[r, c] - median_predictor(grid, r, c)
    return out


def _code_component(grid, q_enc, q_dec):
    rows, cols = grid.shape
    decoded = np.zeros_like(grid)
    symbols = np.zeros(rows * cols, dtype=np.int64)
    for r in range(rows):
        for c in range(cols):
            pred = median_predictor(decoded, r, c)
            sym = int(scale_quantize(grid[r, c] - pred, q_enc, 1.0))
            symbols[r * cols + c] = sym
            decoded[r, c] = pred + int(round_half_away(scale_dequantize(sym, q_dec, 1.0)))
    return symbols, decoded


def code_motion(field: MotionField, q_enc: float = 1.0, q_dec: float = None):
    """Closed-loop vector coding of one field.

    Returns ``(symbols, decoded_field)``: all dx residual symbols in raster
    order, then all dy symbols. Prediction
    uses previously decoded vectors only, so the decoder reproduces
    ``decoded_field`` exactly from the symbols.
    """
    if q_dec is None:
        q_dec = 1.0 / q_enc
    sx, dx = _code_component(field.vx, q_enc, q_dec)
    sy, dy = _code_component(field.vy, q_enc, q_dec)
    return np.concatenate([sx, sy]), MotionField(field.block_size, dy, dx)


def decode_motion(symbols, rows: int, cols: int, block_size: int, q_dec: float) -> MotionField:
    symbols = np.asarray(symbols, dtype=np.int64)
    n = rows * cols
    if symbols.size != 2 * n:
        raise InvalidInputError("motion symbol count does not match grid")
    grids = []
    for part in (symbols[:n], symbols[n:]):
        decoded = np.zeros((rows, cols), dtype=np.int64)
        for r in range(rows):
            for c in range(cols):
                pred = median_predictor(decoded, r, c)
                sym = part[r * cols + c]
                decoded[r, c] = pred + int(round_half_away(scale_dequantize(sym, q_dec, 1.0)))
        grids.append(decoded)
    return MotionField(block_size, grids[1], grids[0])
