import hashlib
import json
import struct
from pathlib import Path

import pytest

from conftest import fast_config
from hbvc.bitstream import (
    MAGIC,
    FramePayload,
    StreamHeader,
    frame_record,
    iter_records,
    join_stream,
    peek_t,
    split_stream,
)
from hbvc.codec import N_MODELS, decode_stream, encode_sequence
from hbvc.errors import BitstreamCorruptionError, BitstreamFormatError
from hbvc.synthetic import make_clip
from hbvc.transform import GainTable

DATA = Path(__file__).parent / "data"


def _golden():
    meta = json.loads((DATA / "golden_pan32.json").read_text())
    return meta, (DATA / "golden_pan32.hbv").read_bytes()


def test_golden_stream_reproduced():
    meta, stream = _golden()
    clip = make_clip("pan", meta["frames"], meta["size"], seed=meta["seed"])
    res = encode_sequence(clip, fast_config(meta["op"], gop=meta["gop"]))
    assert res.stream == stream


def test_golden_stream_decodes():
    meta, stream = _golden()
    frames = decode_stream(stream)
    digest = hashlib.sha256(b"".join(p.tobytes() for f in frames for p in f.planes)).hexdigest()
    assert digest == meta["recon_sha256"]


def test_header_layout_by_hand():
    gains = GainTable.ones(2)
    hdr = StreamHeader(48, 32, 10, 29.97, 16, 33, 20.5, 0.95, 16, gains)
    raw = hdr.to_bytes()
    fixed = struct.pack(
        "<4sH6I2IB", b"HBVC", 1, 48, 32, 10, 29970, 16, 33, round(20.5 * 65536), round(0.95 * 65536), 16
    )
    assert raw[: len(fixed)] == fixed
    back, off = StreamHeader.from_bytes(raw)
    assert off == len(raw) and back.gains == gains
    assert (back.width, back.height, back.bit_depth, back.gop_size, back.n_frames) == (48, 32, 10, 16, 33)
    assert back.fps == pytest.approx(29.97) and back.base_step == 20.5


def test_header_errors():
    raw = StreamHeader(16, 16, 8, 30.0, 4, 5, 10.0, 0.9, 16, GainTable.ones(2)).to_bytes()
    with pytest.raises(BitstreamFormatError):
        StreamHeader.from_bytes(raw[:20])
    with pytest.raises(BitstreamFormatError):
        StreamHeader.from_bytes(b"NOPE" + raw[4:])
    with pytest.raises(BitstreamFormatError):
        StreamHeader.from_bytes(raw[:-3])


def test_payload_round_trip():
    p = FramePayload(7, "B", 3, 1, 2, bytes(range(43)), b"mv", b"c", b"residual")
    raw = p.to_bytes()
    q = FramePayload.from_bytes(raw, N_MODELS.__getitem__)
    assert (q.t, q.kind, q.level, q.rc_mult, q.motion_mult) == (7, "B", 3, 1, 2)
    assert (q.models, q.motion, q.confidence, q.residual) == (p.models, b"mv", b"c", b"residual")
    assert peek_t(raw) == 7


def test_payload_corruption():
    raw = FramePayload(1, "I", 0, models=bytes(20), residual=b"abc").to_bytes()
    with pytest.raises(BitstreamCorruptionError):
        FramePayload.from_bytes(raw[:-1], N_MODELS.__getitem__)
    with pytest.raises(BitstreamCorruptionError):
        FramePayload.from_bytes(raw[:6], N_MODELS.__getitem__)
    bad = bytearray(raw)
    bad[4] = 7
    with pytest.raises(BitstreamCorruptionError):
        FramePayload.from_bytes(bytes(bad), N_MODELS.__getitem__)


def test_records_split_and_join():
    _, stream = _golden()
    hdr, head, payloads = split_stream(stream)
    assert stream.startswith(MAGIC) and len(payloads) == hdr.n_frames == 5
    assert [peek_t(p) for p in payloads] == [0, 4, 2, 1, 3]
    assert join_stream(head, payloads) == stream
    assert frame_record(b"xy") == b"\x02\x00\x00\x00xy"
    with pytest.raises(BitstreamCorruptionError):
        list(iter_records(b"\x05\x00\x00\x00ab", 0))
