import math

import numpy as np
import pytest

from hbvc.errors import InvalidInputError, InvalidPairingError, NoOverlapError
from hbvc.frame_io import Frame, VideoMeta, write_yuv420
from hbvc.metrics import (
    PSNR_CAP,
    RdCurve,
    bd_rate,
    evaluate_frames,
    evaluate_stream,
    kbps,
    mean_bd_rate,
    psnr_plane,
    read_vmaf_csv,
    weighted_yuv_psnr,
)

ANCHOR = [(100, 30), (200, 33), (400, 36), (800, 39)]
TEST = [(90, 30), (180, 33), (380, 36), (760, 39)]


def _hermite_slopes(x, y):
    """Monotone cubic slopes: weighted harmonic mean inside, 3-point ends."""
    h = np.diff(x)
    d = np.diff(y) / h
    m = np.zeros_like(y)
    for k in range(1, len(x) - 1):
        if d[k - 1] * d[k] > 0:
            w1, w2 = 2 * h[k] + h[k - 1], h[k] + 2 * h[k - 1]
            m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k])
    for end, (h0, h1, d0, d1) in ((0, (h[0], h[1], d[0], d[1])), (-1, (h[-1], h[-2], d[-1], d[-2]))):
        s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
        if np.sign(s) != np.sign(d0):
            s = 0.0
        elif np.sign(d0) != np.sign(d1) and abs(s) > abs(3 * d0):
            s = 3 * d0
        m[end] = s
    return m


def _hermite_eval(x, y, m, q):
    k = np.clip(np.searchsorted(x, q) - 1, 0, len(x) - 2)
    h = x[k + 1] - x[k]
    t = (q - x[k]) / h
    h00, h10 = 2 * t**3 - 3 * t**2 + 1, t**3 - 2 * t**2 + t
    h01, h11 = -2 * t**3 + 3 * t**2, t**3 - t**2
    return h00 * y[k] + h10 * h * m[k] + h01 * y[k + 1] + h11 * h * m[k + 1]


def _oracle_bd(anchor, test, n=200_001):
    qa, ra = np.array([q for _, q in anchor], float), np.log([r for r, _ in anchor])
    qt, rt = np.array([q for _, q in test], float), np.log([r for r, _ in test])
    lo, hi = max(qa[0], qt[0]), min(qa[-1], qt[-1])
    q = np.linspace(lo, hi, n)
    diff = _hermite_eval(qt, rt, _hermite_slopes(qt, rt), q) - _hermite_eval(qa, ra, _hermite_slopes(qa, ra), q)
    avg = np.sum((diff[1:] + diff[:-1]) / 2 * np.diff(q)) / (hi - lo)
    return (math.exp(avg) - 1) * 100


def test_psnr_examples():
    a = np.full((8, 8), 100)
    assert psnr_plane(a, a) == PSNR_CAP
    assert psnr_plane(a, a + 1) == pytest.approx(48.13, abs=0.005)
    assert psnr_plane(a, a + 1, 10) == pytest.approx(20 * math.log10(1023), abs=1e-12)  # 60.198
    with pytest.raises(InvalidInputError):
        psnr_plane(a, a[:4])


def test_weighted_psnr():
    assert weighted_yuv_psnr(40, 40, 40) == 40
    assert weighted_yuv_psnr(40, 32, 32) == 38.0
    rng = np.random.default_rng(0)
    for y, u, v in rng.uniform(20, 60, (100, 3)):
        w = weighted_yuv_psnr(y, u, v)
        assert min(y, u, v) <= w <= max(y, u, v)
        assert weighted_yuv_psnr(y + 1, u, v) > w and weighted_yuv_psnr(y, u + 1, v) > w


def test_bd_identity_and_doubling():
    a = RdCurve.from_pairs("a", ANCHOR)
    assert bd_rate(a, a) == 0.0
    doubled = RdCurve.from_pairs("b", [(2 * r, q) for r, q in ANCHOR])
    assert bd_rate(a, doubled) == pytest.approx(100.0, abs=1e-9)


@pytest.mark.parametrize("method", ["pchip", "cubic"])
def test_bd_four_point_example_against_oracle(method):
    got = bd_rate(RdCurve.from_pairs("a", ANCHOR), RdCurve.from_pairs("t", TEST), method)
    assert abs(got - _oracle_bd(ANCHOR, TEST)) <= 0.1


def test_bd_random_curves_against_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        qa = np.sort(rng.uniform(28, 42, 4))
        ra = np.exp(np.sort(rng.uniform(3, 8, 4)))
        qt = np.sort(rng.uniform(28, 42, 4))
        rt = np.exp(np.sort(rng.uniform(3, 8, 4)))
        a, t = list(zip(ra, qa)), list(zip(rt, qt))
        if min(qa[-1], qt[-1]) - max(qa[0], qt[0]) < 1.0:
            continue
        assert bd_rate(RdCurve.from_pairs("a", a), RdCurve.from_pairs("t", t)) == pytest.approx(
            _oracle_bd(a, t), abs=0.1
        )


def test_bd_antisymmetry_and_scaling():
    a, t = RdCurve.from_pairs("a", ANCHOR), RdCurve.from_pairs("t", TEST)
    ab, ba = bd_rate(a, t), bd_rate(t, a)
    assert (1 + ab / 100) * (1 + ba / 100) == pytest.approx(1.0, abs=1e-6)
    for s in (0.5, 1.7):
        scaled = RdCurve.from_pairs("s", [(s * r, q) for r, q in TEST])
        assert bd_rate(a, scaled) == pytest.approx((s * (1 + ab / 100) - 1) * 100, abs=1e-6)


def test_bd_errors_and_sorting(caplog):
    a = RdCurve.from_pairs("a", ANCHOR)
    with pytest.raises(NoOverlapError):
        bd_rate(a, RdCurve.from_pairs("b", [(10, 50), (20, 52), (40, 54), (80, 56)]))
    with pytest.raises(InvalidInputError):
        bd_rate(a, RdCurve.from_pairs("b", ANCHOR[:3]))
    with pytest.raises(InvalidInputError):
        bd_rate(a, RdCurve.from_pairs("b", ANCHOR[:3] + [ANCHOR[2]]))
    with pytest.raises(InvalidInputError):
        bd_rate(a, RdCurve.from_pairs("t", TEST), method="linear")
    shuffled = RdCurve.from_pairs("s", [TEST[2], TEST[0], TEST[3], TEST[1]])
    assert bd_rate(a, shuffled) == pytest.approx(bd_rate(a, RdCurve.from_pairs("t", TEST)))
    assert "not monotone" in caplog.text


def test_mean_bd_rate():
    a, t = RdCurve.from_pairs("a", ANCHOR), RdCurve.from_pairs("t", TEST)
    d = RdCurve.from_pairs("d", [(2 * r, q) for r, q in ANCHOR])
    assert mean_bd_rate([(a, t), (a, d)]) == pytest.approx((bd_rate(a, t) + 100) / 2)


def test_curve_csv_round_trip():
    c = RdCurve.from_pairs("a", ANCHOR)
    back = RdCurve.from_csv(c.to_csv(), "a")
    assert back.points == c.points
    assert c.gnuplot().splitlines()[0] == "100.0 30.0"


def test_kbps_uses_frame_count():
    assert kbps(97_000, 30.0, 97) == pytest.approx(30.0)


def _frames(n, seed=0, h=16, w=16):
    rng = np.random.default_rng(seed)
    return [
        Frame.from_planes(rng.integers(0, 256, (h, w)), rng.integers(0, 256, (h // 2, w // 2)),
                          rng.integers(0, 256, (h // 2, w // 2)), 8, i)
        for i in range(n)
    ]


def test_evaluate_identical_and_vmaf(tmp_path):
    frames = _frames(3)
    meta = VideoMeta(16, 16, 8, 30.0, 3)
    write_yuv420(tmp_path / "o.yuv", frames)
    write_yuv420(tmp_path / "d.yuv", frames)
    rep = evaluate_stream(tmp_path / "o.yuv", tmp_path / "d.yuv", b"x" * 100, meta, tmp_path / "none.csv")
    assert rep.psnr_yuv == PSNR_CAP and rep.vmaf is None
    assert rep.bitrate_kbps == pytest.approx(800 * 30 / 3 / 1000)
    (tmp_path / "v.csv").write_text("frame,vmaf\n0,90\n1,92\n2,94\n")
    rep = evaluate_stream(tmp_path / "o.yuv", tmp_path / "d.yuv", b"x", meta, tmp_path / "v.csv")
    assert rep.vmaf == pytest.approx(92.0)
    assert rep.frames_csv().splitlines()[1].endswith("90.0000")
    assert '"psnr_yuv": 100.0' in rep.to_json()
    assert read_vmaf_csv(None) == {}


def test_evaluate_pairing_error(tmp_path):
    meta = VideoMeta(16, 16, 8, 30.0, 1)
    write_yuv420(tmp_path / "o.yuv", _frames(3))
    write_yuv420(tmp_path / "d.yuv", _frames(2))
    with pytest.raises(InvalidPairingError):
        evaluate_stream(tmp_path / "o.yuv", tmp_path / "d.yuv", b"", meta)
    with pytest.raises(InvalidPairingError):
        evaluate_frames(_frames(2), _frames(3), 0, 30.0)


def test_evaluate_per_frame_average():
    orig = _frames(2, seed=1)
    dec = [Frame.from_planes(np.clip(f.y.astype(int) + 1, 0, 255), f.u, f.v, 8) for f in orig]
    rep = evaluate_frames(orig, dec, 1000, 25.0)
    assert rep.psnr_y == pytest.approx(np.mean([r.psnr_y for r in rep.frames]))
    assert rep.psnr_u == PSNR_CAP
