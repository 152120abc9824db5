"""Raw planar YUV 4:2:0 files and the in-memory Frame type.

Raw files have no header; geometry comes from :class:`VideoMeta`. 8-bit
samples are one byte each, 10-bit samples are little-endian 16-bit words.
Planes are stored Y, U, V per frame, frames back to back.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import (
    InconsistentInputError,
    InvalidInputError,
    TruncatedInputError,
    UnsupportedFormatError,
)

SUPPORTED_DEPTHS = (8, 10)


def _check_depth(bit_depth: int) -> None:
    if bit_depth not in SUPPORTED_DEPTHS:
        raise UnsupportedFormatError(f"bit depth {bit_depth} not in {SUPPORTED_DEPTHS}")


@dataclass
class Frame:
    """One 4:2:0 picture. Planes are ``(height, width)`` integer arrays."""

    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    bit_depth: int = 8
    frame_index: int = 0
    # (height, width) before pad_to_block_grid, None when never padded
    orig_size: Optional[Tuple[int, int]] = field(default=None, compare=False)

    def __post_init__(self):
        _check_depth(self.bit_depth)
        h, w = self.y.shape
        if h % 2 or w % 2:
            raise InvalidInputError(f"odd frame dimensions {w}x{h}")
        for name, plane in (("u", self.u), ("v", self.v)):
            if plane.shape != (h // 2, w // 2):
                raise InvalidInputError(
                    f"{name} plane {plane.shape[::-1]} is not half of luma {w}x{h}"
                )

    @property
    def width(self) -> int:
        return self.y.shape[1]

    @property
    def height(self) -> int:
        return self.y.shape[0]

    @property
    def max_value(self) -> int:
        return (1 << self.bit_depth) - 1

    @property
    def planes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.y, self.u, self.v

    def check_range(self) -> None:
        hi = self.max_value
        for plane in self.planes:
            if plane.size and (plane.min() < 0 or plane.max() > hi):
                raise InvalidInputError(f"samples outside [0, {hi}]")

    def copy(self) -> "Frame":
        return replace(self, y=self.y.copy(), u=self.u.copy(), v=self.v.copy())

    def same_samples(self, other: "Frame") -> bool:
        return (
            self.bit_depth == other.bit_depth
            and all(np.array_equal(a, b) for a, b in zip(self.planes, other.planes))
        )

    @classmethod
    def from_planes(cls, y, u, v, bit_depth=8, frame_index=0) -> "Frame":
        dtype = np.uint8 if bit_depth == 8 else np.uint16
        return cls(
            np.ascontiguousarray(y, dtype=dtype),
            np.ascontiguousarray(u, dtype=dtype),
            np.ascontiguousarray(v, dtype=dtype),
            bit_depth,
            frame_index,
        )

    @classmethod
    def blank(cls, width: int, height: int, bit_depth: int = 8, value: Optional[int] = None):
        if value is None:
            value = 1 << (bit_depth - 1)
        y = np.full((height, width), value)
        c = np.full((height // 2, width // 2), value)
        return cls.from_planes(y, c, c.copy(), bit_depth)


@dataclass(frozen=True)
class VideoMeta:
    width: int
    height: int
    bit_depth: int = 8
    fps: float = 30.0
    frame_count: int = 1

    def __post_init__(self):
        _check_depth(self.bit_depth)
        if self.width < 16 or self.height < 16:
            raise InvalidInputError("width and height must be at least 16")
        if self.width % 2 or self.height % 2:
            raise InvalidInputError(f"odd dimensions {self.width}x{self.height} not allowed in 4:2:0")
        if self.frame_count < 1:
            raise InvalidInputError("frame_count must be >= 1")

    @property
    def frame_byte_size(self) -> int:
        return frame_byte_size(self.width, self.height, self.bit_depth)


def frame_byte_size(width: int, height: int, bit_depth: int) -> int:
    _check_depth(bit_depth)
    samples = width * height + 2 * (width // 2) * (height // 2)
    return samples * (1 if bit_depth == 8 else 2)


def _dtype(bit_depth: int):
    return np.dtype(np.uint8) if bit_depth == 8 else np.dtype("<u2")


def read_yuv420(
    path: os.PathLike | str, meta: VideoMeta, start: int = 0, count: Optional[int] = None
) -> list:
    """Read frames ``[start, start + count)`` in display order."""
    if count is None:
        count = meta.frame_count - start
    if start < 0 or count < 0 or start + count > meta.frame_count:
        raise InvalidInputError(
            f"frame range [{start}, {start + count}) outside 0..{meta.frame_count}"
        )
    fsize = meta.frame_byte_size
    size = os.path.getsize(path)
    if size < meta.frame_count * fsize:
        raise TruncatedInputError(
            f"{path}: {size} bytes, need {meta.frame_count * fsize} for {meta.frame_count} frames"
        )
    w, h = meta.width, meta.height
    dt = _dtype(meta.bit_depth)
    ny, nc = w * h, (w // 2) * (h // 2)
    frames = []
    with open(path, "rb") as fh:
        fh.seek(start * fsize)
        for k in range(count):
            buf = np.frombuffer(fh.read(fsize), dtype=dt)
            y = buf[:ny].reshape(h, w)
            u = buf[ny : ny + nc].reshape(h // 2, w // 2)
            v = buf[ny + nc :].reshape(h // 2, w // 2)
            frame = Frame.from_planes(y, u, v, meta.bit_depth, start + k)
            if meta.bit_depth == 10:
                frame.check_range()
            frames.append(frame)
    return frames


def write_yuv420(path: os.PathLike | str, frames: Sequence[Frame]) -> int:
    """Write frames back to back; returns the number of bytes written."""
    frames = list(frames)
    if frames:
        ref = frames[0]
        for f in frames:
            if f.y.shape != ref.y.shape or f.bit_depth != ref.bit_depth:
                raise InconsistentInputError("frames differ in geometry or bit depth")
            f.check_range()
    written = 0
    with open(path, "wb") as fh:
        for f in frames:
            dt = _dtype(f.bit_depth)
            for plane in f.planes:
                data = np.ascontiguousarray(plane, dtype=dt).tobytes()
                fh.write(data)
                written += len(data)
    return written


def pad_to_block_grid(frame: Frame, block: int) -> Frame:
    """Edge-replicate the bottom/right borders up to a multiple of ``block``."""
    if block <= 0 or block & (block - 1):
        raise InvalidInputError(f"block size {block} is not a power of two")
    h, w = frame.height, frame.width
    ph = -h % block
    pw = -w % block
    if not ph and not pw:
        return frame
    y = np.pad(frame.y, ((0, ph), (0, pw)), mode="edge")
    u = np.pad(frame.u, ((0, ph // 2), (0, pw // 2)), mode="edge")
    v = np.pad(frame.v, ((0, ph // 2), (0, pw // 2)), mode="edge")
    out = Frame(y, u, v, frame.bit_depth, frame.frame_index)
    out.orig_size = frame.orig_size or (h, w)
    return out


def crop(frame: Frame, height: int, width: int) -> Frame:
    if (height, width) == (frame.height, frame.width):
        return frame
    return Frame(
        frame.y[:height, :width].copy(),
        frame.u[: height // 2, : width // 2].copy(),
        frame.v[: height // 2, : width // 2].copy(),
        frame.bit_depth,
        frame.frame_index,
    )


def crop_to_original(frame: Frame) -> Frame:
    if frame.orig_size is None:
        return frame
    return crop(frame, *frame.orig_size)


def random_patch(frame: Frame, size: int, rng: np.random.Generator) -> Frame:
    """Crop a random ``size`` x ``size`` luma patch (even-aligned)."""
    if size % 2 or size > min(frame.height, frame.width):
        raise InvalidInputError(f"patch size {size} does not fit {frame.width}x{frame.height}")
    top = 2 * int(rng.integers(0, (frame.height - size) // 2 + 1))
    left = 2 * int(rng.integers(0, (frame.width - size) // 2 + 1))
    return Frame(
        frame.y[top : top + size, left : left + size].copy(),
        frame.u[top // 2 : (top + size) // 2, left // 2 : (left + size) // 2].copy(),
        frame.v[top // 2 : (top + size) // 2, left // 2 : (left + size) // 2].copy(),
        frame.bit_depth,
        frame.frame_index,
    )

