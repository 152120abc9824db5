import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hbvc.errors import InvalidGainError, MissingLevelError, UnderdeterminedFitError
from hbvc.transform import (
    BAND_OF,
    FIXED_ONE,
    GainTable,
    LatentBlock,
    dct8_forward,
    dct8_inverse,
    distinct_nonzero,
    extrapolate_gains,
    forward_blocks,
    hgu_dequantize,
    hgu_quantize,
    inverse_blocks,
    round_half_away,
    scale_dequantize,
    scale_quantize,
    snap,
)


def _naive_dct(block):
    """Direct DCT-II sum, independent of the matrix implementation."""
    out = np.zeros((8, 8))
    for u in range(8):
        for v in range(8):
            cu = np.sqrt(1 / 8) if u == 0 else np.sqrt(2 / 8)
            cv = np.sqrt(1 / 8) if v == 0 else np.sqrt(2 / 8)
            acc = 0.0
            for x in range(8):
                for y in range(8):
                    acc += block[x, y] * np.cos((2 * x + 1) * u * np.pi / 16) * np.cos((2 * y + 1) * v * np.pi / 16)
            out[u, v] = cu * cv * acc
    return out


def test_constant_block():
    c = dct8_forward(np.full((8, 8), 37.0))
    assert c[0, 0] == pytest.approx(8 * 37.0)
    c[0, 0] = 0
    assert np.abs(c).max() < 1e-9


def test_matches_direct_sum():
    block = np.random.default_rng(0).normal(size=(8, 8)) * 50
    assert np.allclose(dct8_forward(block), _naive_dct(block), atol=1e-9)


def test_parseval_and_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(50):
        b = rng.uniform(-255, 255, (8, 8))
        c = dct8_forward(b)
        assert abs((c**2).sum() - (b**2).sum()) <= 1e-6 * (b**2).sum()
        assert np.abs(dct8_inverse(c) - b).max() <= 1e-9


def test_batched_matches_single():
    blocks = np.random.default_rng(2).uniform(0, 255, (5, 8, 8))
    c = forward_blocks(blocks)
    for i in range(5):
        assert np.allclose(c[i], dct8_forward(blocks[i]))
    assert np.allclose(inverse_blocks(c), blocks)


def test_band_layout():
    assert BAND_OF[0, 0] == 0 and BAND_OF[0, 1] == BAND_OF[1, 0] == 1
    assert BAND_OF[7, 7] == 9 and BAND_OF.max() == 9


@pytest.mark.parametrize("value,q,expected", [(3.4, 1, 3), (3.4, 2, 7), (-2.5, 1, -3), (2.5, 1, 3), (-0.4, 1, 0)])
def test_quantize_examples(value, q, expected):
    assert scale_quantize(value, q, 1.0) == expected


def test_dequantize_example():
    assert scale_dequantize(7, 0.5, 1.0) == 3.5


def test_identity_gains_round():
    x = np.random.default_rng(3).normal(size=1000) * 20
    assert np.array_equal(scale_dequantize(scale_quantize(x, 1, 1), 1, 1), round_half_away(x))


def test_error_bound_q2():
    x = np.random.default_rng(4).uniform(-50, 50, 100_000)
    err = np.abs(x - scale_dequantize(scale_quantize(x, 2.0, 1.0), 0.5, 1.0))
    assert err.max() <= 0.25


def test_nonpositive_gain():
    with pytest.raises(InvalidGainError):
        scale_quantize(1.0, 0.0, 1.0)
    with pytest.raises(InvalidGainError):
        GainTable({"rc": {1: (-1.0, 1.0)}})


def test_hgu_routes_level_gain():
    table = GainTable({"rc": {1: (2.0, 0.5), 2: (4.0, 0.25)}, "motion": {}})
    lat = LatentBlock("rc", 2, np.array([1.0, -1.1]))
    sym = hgu_quantize(lat, table, 1.0)
    assert sym.tolist() == [4, -4]
    back = hgu_dequantize(sym, table, 1.0, "rc", 2)
    assert back.coeffs.tolist() == [1.0, -1.0]
    assert hgu_quantize(LatentBlock("rc", 0, np.array([1.4])), table, 1.0).tolist() == [1]


def test_missing_level_without_extrapolation():
    table = GainTable({"rc": {1: (1.0, 1.0), 2: (2.0, 0.5)}})
    with pytest.raises(MissingLevelError):
        hgu_dequantize([1], table, 1.0, "rc", 3, extrapolate=False)


def test_extrapolate_exact_exponential():
    table = GainTable.from_encoder_gains({"rc": {1: 1.0, 2: 2.0, 3: 4.0}})
    qe, qd = extrapolate_gains(table, "rc", 4)
    assert qe == 8.0 and qd == 1.0 / 8.0


def test_extrapolate_all_ones():
    table = GainTable.ones(3)
    assert table.lookup("motion", 6) == (1.0, 1.0)


def test_extrapolate_matches_least_squares_oracle():
    table = GainTable.from_encoder_gains({"rc": {1: 1.0, 2: 2.0, 3: 3.0}})
    # normal equations for y = a + b*x on (1, 0), (2, ln 2), (3, ln 3)
    xs = np.array([1.0, 2.0, 3.0])
    ys = np.log([1.0, 2.0, 3.0])
    b = ((xs - xs.mean()) * (ys - ys.mean())).sum() / ((xs - xs.mean()) ** 2).sum()
    a = ys.mean() - b * xs.mean()
    expected = np.exp(a + 4 * b)
    qe, _ = extrapolate_gains(table, "rc", 4)
    assert abs(qe - expected) <= 0.5 / FIXED_ONE


def test_extrapolate_shift_invariant_slope():
    t1 = GainTable.from_encoder_gains({"rc": {1: 1.5, 2: 1.2, 3: 1.0}})
    t2 = GainTable.from_encoder_gains({"rc": {3: 1.5, 4: 1.2, 5: 1.0}})
    assert extrapolate_gains(t1, "rc", 4)[0] == extrapolate_gains(t2, "rc", 6)[0]


def test_extrapolate_underdetermined():
    with pytest.raises(UnderdeterminedFitError):
        extrapolate_gains(GainTable.from_encoder_gains({"rc": {1: 2.0}}), "rc", 2)


def test_gain_table_serialization_round_trip():
    table = GainTable({"motion": {1: (1.3, 1 / 1.3), 2: (0.7, 1.4)}, "rc": {1: (2.0, 0.5), 3: (0.9, 1.2)}})
    raw = table.to_bytes()
    back, n = GainTable.from_bytes(raw)
    assert n == len(raw) and back == table
    assert back.to_bytes() == raw
    assert GainTable.from_json(table.to_json()) == table
    assert table.is_tied("motion", 1) and not table.is_tied("motion", 2)


def test_tied_gains_are_exact_reciprocals():
    for q in np.random.default_rng(5).uniform(0.2, 5.0, 200):
        t = GainTable.from_encoder_gains({"rc": {1: q}})
        qe, qd = GainTable.from_bytes(t.to_bytes())[0].lookup("rc", 1)
        assert qe == snap(q) and qd == 1.0 / qe
        x = np.random.default_rng(6).uniform(-100, 100, 1000)
        # scaling without quantization is identity
        assert np.allclose(x * qe * qd, x, rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-200, 200, allow_nan=False), min_size=1, max_size=50),
    st.floats(0.1, 4.0),
    st.floats(1.01, 3.0),
)
def test_distinct_nonzero_monotone_in_gain(values, q, factor):
    x = np.array(values)
    assert distinct_nonzero(scale_quantize(x, q, 1.0)) <= distinct_nonzero(scale_quantize(x, q * factor, 1.0))
