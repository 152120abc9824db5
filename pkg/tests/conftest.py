import numpy as np
import pytest

from hbvc.codec import CodecConfig
from hbvc.frame_io import Frame
from hbvc.motion import MotionParams
from hbvc.synthetic import make_clip


def random_frame(h=32, w=32, bit_depth=8, seed=0, t=0) -> Frame:
    rng = np.random.default_rng(seed)
    hi = (1 << bit_depth) - 1
    y = rng.integers(0, hi + 1, (h, w))
    u = rng.integers(0, hi + 1, (h // 2, w // 2))
    v = rng.integers(0, hi + 1, (h // 2, w // 2))
    return Frame.from_planes(y, u, v, bit_depth, t)


def fast_config(op: int = 1, gop: int = 8, **kw) -> CodecConfig:
    return CodecConfig.operating_point(op, gop_size=gop, motion=MotionParams(search_range=8, lambda_me=0.0), **kw)


@pytest.fixture(scope="session")
def pan9():
    return make_clip("pan", 9, 64, seed=2)


@pytest.fixture(scope="session")
def static9():
    return make_clip("static", 9, 64, seed=3)


@pytest.fixture
def cfg():
    return fast_config()
