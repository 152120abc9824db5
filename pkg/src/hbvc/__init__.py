"""Hierarchical B-frame video codec with per-level gains and random-path calibration."""

from .codec import CodecConfig, decode_stream, encode_sequence
from .errors import HbvcError
from .frame_io import Frame, VideoMeta, read_yuv420, write_yuv420
from .gop import build_schedule

__version__ = "0.1.0"

__all__ = [
    "CodecConfig",
    "Frame",
    "HbvcError",
    "VideoMeta",
    "build_schedule",
    "decode_stream",
    "encode_sequence",
    "read_yuv420",
    "write_yuv420",
]
