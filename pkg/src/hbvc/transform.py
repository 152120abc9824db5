"""8x8 orthonormal DCT, level-dependent gain scaling and quantization.

Latents (DCT coefficients or motion-vector residuals) are multiplied by the
encoder gain of the frame's hierarchy level before rounding, and the decoder
multiplies the integer symbols by its own gain for that level.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from .errors import InvalidGainError, MissingLevelError, UnderdeterminedFitError

STREAMS = ("motion", "rc")
FIXED_ONE = 1 << 16
N_BANDS = 10  # zig-zag distance u+v, distances >= 9 share the last band


def _dct_matrix(n: int = 8) -> np.ndarray:
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    m = np.sqrt(2.0 / n) * np.cos(np.pi * (2 * x + 1) * k / (2 * n))
    m[0] /= np.sqrt(2.0)
    return m


DCT8 = _dct_matrix(8)

_uu, _vv = np.meshgrid(np.arange(8), np.arange(8), indexing="ij")
BAND_OF = np.minimum(_uu + _vv, N_BANDS - 1).astype(np.int64)


def dct8_forward(block: np.ndarray) -> np.ndarray:
    block = np.asarray(block, dtype=np.float64)
    return DCT8 @ block @ DCT8.T


def dct8_inverse(coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    return DCT8.T @ coeffs @ DCT8


def plane_to_blocks(plane: np.ndarray) -> np.ndarray:
    """``(H, W)`` -> ``(H/8 * W/8, 8, 8)`` in raster block order."""
    h, w = plane.shape
    return (
        np.asarray(plane, dtype=np.float64)
        .reshape(h // 8, 8, w // 8, 8)
        .transpose(0, 2, 1, 3)
        .reshape(-1, 8, 8)
    )


def blocks_to_plane(blocks: np.ndarray, h: int, w: int) -> np.ndarray:
    return blocks.reshape(h // 8, w // 8, 8, 8).transpose(0, 2, 1, 3).reshape(h, w)


def forward_blocks(blocks: np.ndarray) -> np.ndarray:
    return np.einsum("ij,njk,lk->nil", DCT8, blocks, DCT8, optimize=True)


def inverse_blocks(coeffs: np.ndarray) -> np.ndarray:
    return np.einsum("ji,njk,kl->nil", DCT8, coeffs, DCT8, optimize=True)


def round_half_away(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def to_fixed(value: float) -> int:
    """16.16 fixed-point code of a positive gain."""
    code = int(round(value * FIXED_ONE))
    if code <= 0 or code >= 1 << 32:
        raise InvalidGainError(f"gain {value} not representable in 16.16")
    return code


def snap(value: float) -> float:
    """Nearest gain exactly representable in 16.16 fixed point."""
    return to_fixed(value) / FIXED_ONE


@dataclass(frozen=True)
class GainTable:
    """Per-stream map ``level -> (q_enc, q_dec)``.

    Gains are snapped to the 16.16 grid on construction so that what the
    encoder uses is exactly what the decoder reads back from the header. A
    decoder gain within 16.16 resolution of ``1 / q_enc`` is stored as tied
    (fixed-point code 0) and recomputed as the exact reciprocal.
    """

    gains: Mapping[str, Mapping[int, Tuple[float, float]]] = field(default_factory=dict)

    def __post_init__(self):
        clean: Dict[str, Dict[int, Tuple[float, float]]] = {}
        for stream in STREAMS:
            levels = {}
            for level, (qe, qd) in sorted(dict(self.gains.get(stream, {})).items()):
                if not (qe > 0 and qd > 0) or not (math.isfinite(qe) and math.isfinite(qd)):
                    raise InvalidGainError(f"{stream} level {level}: gains must be positive")
                qe = snap(qe)
                qd = 1.0 / qe if abs(qd * qe - 1.0) < 0.5 / FIXED_ONE else snap(qd)
                levels[int(level)] = (qe, qd)
            clean[stream] = levels
        extra = set(self.gains) - set(STREAMS)
        if extra:
            raise InvalidGainError(f"unknown streams {sorted(extra)}")
        object.__setattr__(self, "gains", clean)

    @classmethod
    def ones(cls, max_level: int) -> "GainTable":
        return cls({s: {k: (1.0, 1.0) for k in range(1, max_level + 1)} for s in STREAMS})

    @classmethod
    def from_encoder_gains(cls, enc: Mapping[str, Mapping[int, float]]) -> "GainTable":
        """Build a table with ``q_dec = 1 / q_enc``."""
        return cls({s: {k: (q, 1.0 / snap(q)) for k, q in enc.get(s, {}).items()} for s in STREAMS})

    def is_tied(self, stream: str, level: int) -> bool:
        qe, qd = self.gains[stream][level]
        return qd == 1.0 / qe

    def levels(self, stream: str) -> Tuple[int, ...]:
        return tuple(self.gains[stream])

    @property
    def max_level(self) -> int:
        return max((max(v) for v in self.gains.values() if v), default=0)

    def lookup(self, stream: str, level: int, extrapolate: bool = True) -> Tuple[float, float]:
        if level == 0:
            return (1.0, 1.0)
        table = self.gains[stream]
        if level in table:
            return table[level]
        if not extrapolate:
            raise MissingLevelError(f"{stream} gain for level {level} absent")
        return extrapolate_gains(self, stream, level)

    def with_gain(self, stream: str, level: int, q_enc: float, q_dec: Optional[float] = None):
        if q_dec is None:
            q_dec = 1.0 / snap(q_enc)
        gains = {s: dict(v) for s, v in self.gains.items()}
        gains[stream][level] = (q_enc, q_dec)
        return GainTable(gains)

    def completed(self, max_level: int) -> "GainTable":
        """Copy with every level ``1..max_level`` present (missing ones extrapolated)."""
        gains = {s: dict(v) for s, v in self.gains.items()}
        for s in STREAMS:
            for k in range(1, max_level + 1):
                if k not in gains[s]:
                    gains[s][k] = self.lookup(s, k)
        return GainTable(gains)

    # -- serialization -------------------------------------------------

    def to_bytes(self) -> bytes:
        out = bytearray()
        for s in STREAMS:
            table = self.gains[s]
            out += struct.pack("<B", len(table))
            for level, (qe, qd) in table.items():
                qd_code = 0 if self.is_tied(s, level) else to_fixed(qd)
                out += struct.pack("<BII", level, to_fixed(qe), qd_code)
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> Tuple["GainTable", int]:
        gains = {}
        for s in STREAMS:
            (count,) = struct.unpack_from("<B", data, offset)
            offset += 1
            levels = {}
            for _ in range(count):
                level, qe, qd = struct.unpack_from("<BII", data, offset)
                offset += 9
                qe /= FIXED_ONE
                levels[level] = (qe, 1.0 / qe if qd == 0 else qd / FIXED_ONE)
            gains[s] = levels
        return cls(gains), offset

    def to_json(self) -> str:
        return json.dumps(
            {s: {str(k): list(v) for k, v in self.gains[s].items()} for s in STREAMS}, indent=1
        )

    @classmethod
    def from_json(cls, text: str) -> "GainTable":
        raw = json.loads(text)
        return cls({s: {int(k): tuple(v) for k, v in raw.get(s, {}).items()} for s in STREAMS})


def extrapolate_gains(table: GainTable, stream: str, target_level: int) -> Tuple[float, float]:
    """Least-squares fit of ``log q`` against level, evaluated at ``target_level``."""
    known = table.gains[stream]
    if len(known) < 2:
        raise UnderdeterminedFitError(
            f"need >= 2 {stream} levels to extrapolate, have {len(known)}"
        )
    levels = np.array(list(known), dtype=np.float64)
    out = []
    for col in range(2):
        logs = np.log([known[k][col] for k in known])
        slope, intercept = np.polyfit(levels, logs, 1)
        out.append(snap(float(np.exp(intercept + slope * target_level))))
    if all(table.is_tied(stream, k) for k in known):
        out[1] = 1.0 / out[0]
    return out[0], out[1]


@dataclass
class LatentBlock:
    stream: str
    level: int
    coeffs: np.ndarray
    bands: Optional[np.ndarray] = None


def scale_quantize(values, q_enc: float, base_step: float) -> np.ndarray:
    if q_enc <= 0 or base_step <= 0:
        raise InvalidGainError("gain and step must be positive")
    return round_half_away(np.asarray(values, dtype=np.float64) * (q_enc / base_step))


def scale_dequantize(symbols, q_dec: float, base_step: float) -> np.ndarray:
    if q_dec <= 0 or base_step <= 0:
        raise InvalidGainError("gain and step must be positive")
    return np.asarray(symbols, dtype=np.float64) * (base_step * q_dec)


def hgu_quantize(latent: LatentBlock, table: GainTable, base_step: float) -> np.ndarray:
    q_enc, _ = table.lookup(latent.stream, latent.level)
    return scale_quantize(latent.coeffs, q_enc, base_step)


def hgu_dequantize(
    symbols,
    table: GainTable,
    base_step: float,
    stream: str,
    level: int,
    extrapolate: bool = True,
    bands=None,
) -> LatentBlock:
    _, q_dec = table.lookup(stream, level, extrapolate=extrapolate)
    return LatentBlock(stream, level, scale_dequantize(symbols, q_dec, base_step), bands)


def distinct_nonzero(symbols: Iterable) -> int:
    s = np.unique(np.asarray(symbols))
    return int(np.count_nonzero(s))
