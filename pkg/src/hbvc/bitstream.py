"""Container layout: stream header and length-prefixed frame payloads.

Stream header (little endian)::

    "HBVC"  magic
    u16     version
    u32     width, height, bit_depth, fps (milli-fps), gop_size, n_frames
    u32     base_step (16.16), tau (16.16)
    u8      motion block size
    ...     GainTable block

followed by ``u32 length + payload`` records in decode order. Each payload::

    u32 t | u8 kind | u8 level | u8 rc multiplier index | u8 motion multiplier index
    band-model indices (1 byte each; count depends on kind)
    u32 motion bytes | u32 confidence bytes | u32 residual bytes
    segments
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterator, List, Tuple

from .errors import BitstreamCorruptionError, BitstreamFormatError
from .transform import FIXED_ONE, GainTable, to_fixed

MAGIC = b"HBVC"
VERSION = 1
_HEAD = struct.Struct("<4sH6I2IB")
_FRAME_HEAD = struct.Struct("<IBBBB")
_SEGMENTS = struct.Struct("<3I")
_LEN = struct.Struct("<I")

KIND_CODES = {"I": 0, "B": 1}
KIND_NAMES = {v: k for k, v in KIND_CODES.items()}

# per-frame multipliers selectable by the encoder (index carried in payload)
MULTIPLIERS = (1.0, 0.8, 1.25)


@dataclass(frozen=True)
class StreamHeader:
    width: int
    height: int
    bit_depth: int
    fps: float
    gop_size: int
    n_frames: int
    base_step: float
    tau: float
    block_size: int
    gains: GainTable

    def to_bytes(self) -> bytes:
        return (
            _HEAD.pack(
                MAGIC,
                VERSION,
                self.width,
                self.height,
                self.bit_depth,
                int(round(self.fps * 1000)),
                self.gop_size,
                self.n_frames,
                to_fixed(self.base_step),
                to_fixed(self.tau),
                self.block_size,
            )
            + self.gains.to_bytes()
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> Tuple["StreamHeader", int]:
        if len(data) < _HEAD.size:
            raise BitstreamFormatError("stream shorter than its header")
        magic, version, w, h, bd, mfps, gop, n, step, tau, bs = _HEAD.unpack_from(data, 0)
        if magic != MAGIC:
            raise BitstreamFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise BitstreamFormatError(f"unsupported version {version}")
        try:
            gains, offset = GainTable.from_bytes(data, _HEAD.size)
        except struct.error as exc:
            raise BitstreamFormatError("truncated gain table") from exc
        hdr = cls(w, h, bd, mfps / 1000.0, gop, n, step / FIXED_ONE, tau / FIXED_ONE, bs, gains)
        return hdr, offset


@dataclass
class FramePayload:
    t: int
    kind: str
    level: int
    rc_mult: int = 0
    motion_mult: int = 0
    models: bytes = b""
    motion: bytes = b""
    confidence: bytes = b""
    residual: bytes = b""
    segment_sizes: Tuple[int, int, int] = field(default=(0, 0, 0))

    def to_bytes(self) -> bytes:
        self.segment_sizes = (len(self.motion), len(self.confidence), len(self.residual))
        return (
            _FRAME_HEAD.pack(self.t, KIND_CODES[self.kind], self.level, self.rc_mult, self.motion_mult)
            + self.models
            + _SEGMENTS.pack(*self.segment_sizes)
            + self.motion
            + self.confidence
            + self.residual
        )

    @classmethod
    def from_bytes(cls, data: bytes, n_models_for) -> "FramePayload":
        """``n_models_for(kind)`` gives the model-index count for a frame kind."""
        try:
            t, kind, level, rcm, mvm = _FRAME_HEAD.unpack_from(data, 0)
            if kind not in KIND_NAMES:
                raise BitstreamCorruptionError(f"unknown frame kind {kind}")
            if rcm >= len(MULTIPLIERS) or mvm >= len(MULTIPLIERS):
                raise BitstreamCorruptionError("multiplier index out of range")
            kind = KIND_NAMES[kind]
            pos = _FRAME_HEAD.size
            nm = n_models_for(kind)
            models = bytes(data[pos : pos + nm])
            pos += nm
            sizes = _SEGMENTS.unpack_from(data, pos)
        except struct.error as exc:
            raise BitstreamCorruptionError("truncated frame payload") from exc
        pos += _SEGMENTS.size
        if len(models) != nm or pos + sum(sizes) != len(data):
            raise BitstreamCorruptionError("frame payload segment sizes do not add up")
        a = pos + sizes[0]
        b = a + sizes[1]
        return cls(
            t, kind, level, rcm, mvm, models,
            bytes(data[pos:a]), bytes(data[a:b]), bytes(data[b:]), tuple(sizes),
        )

    @property
    def motion_bits(self) -> int:
        return 8 * len(self.motion)


def frame_record(payload: bytes) -> bytes:
    return _LEN.pack(len(payload)) + payload


def iter_records(data: bytes, offset: int) -> Iterator[Tuple[int, bytes]]:
    """Yield ``(record_offset, payload)``; raises on a record cut short."""
    while offset < len(data):
        if offset + _LEN.size > len(data):
            raise BitstreamCorruptionError(f"truncated record length at byte {offset}")
        (n,) = _LEN.unpack_from(data, offset)
        start = offset + _LEN.size
        if start + n > len(data):
            raise BitstreamCorruptionError(f"payload at byte {offset} cut short")
        yield offset, data[start : start + n]
        offset = start + n


def split_stream(data: bytes) -> Tuple[StreamHeader, bytes, List[bytes]]:
    """Header, raw header bytes and the list of payloads (no decoding)."""
    hdr, off = StreamHeader.from_bytes(data)
    return hdr, bytes(data[:off]), [p for _, p in iter_records(data, off)]


def peek_t(payload: bytes) -> int:
    return _FRAME_HEAD.unpack_from(payload, 0)[0]


def join_stream(header_bytes: bytes, payloads) -> bytes:
    return header_bytes + b"".join(frame_record(p) for p in payloads)
