"""32-bit range coder with 16-bit cumulative frequencies.

Carry-propagating byte-oriented coder (the LZMA construction). Output is
big-endian; the always-zero leading byte of that construction is dropped.
The encoder writes exactly as many bytes as the decoder consumes, which lets
the decoder detect both truncation and trailing garbage.

Symbols are mapped to alphabet index ``s + S`` for ``|s| <= S`` and to an
escape index ``2S + 1`` otherwise; escaped values are followed by a sign bit
and an order-0 Exp-Golomb code of ``|s| - S - 1`` in equiprobable bits.
"""

import numpy as np

from .._accel import njit

PROB_BITS = 16
TOTAL = 1 << PROB_BITS
TOP = 1 << 24
MASK32 = 0xFFFFFFFF

# decoder status codes
OK = 0
EXHAUSTED = -1
BAD_SYMBOL = -2
TRAILING = -3


@njit
def _shift_low(state, out):
    # state: [low, range, cache, cache_size, pos, first]
    low = state[0]
    if (low & MASK32) < 0xFF000000 or (low >> 32) != 0:
        carry = low >> 32
        temp = state[2]
        while True:
            if state[5] == 1:
                state[5] = 0
            else:
                out[state[4]] = (temp + carry) & 0xFF
                state[4] += 1
            temp = 0xFF
            state[3] -= 1
            if state[3] == 0:
                break
        state[2] = (low >> 24) & 0xFF
    state[3] += 1
    state[0] = (low & 0x00FFFFFF) << 8


@njit
def _encode(state, out, start, size):
    r = state[1] >> PROB_BITS
    state[0] += r * start
    state[1] = r * size
    while state[1] < TOP:
        state[1] = state[1] << 8
        _shift_low(state, out)


@njit
def _encode_escape(state, out, value, smax):
    half = TOTAL >> 1
    if value < 0:
        _encode(state, out, half, half)
        m = -value - smax - 1
    else:
        _encode(state, out, 0, half)
        m = value - smax - 1
    m1 = m + 1
    nbits = 0
    tmp = m1
    while tmp > 1:
        tmp >>= 1
        nbits += 1
    for _ in range(nbits):
        _encode(state, out, half, half)
    _encode(state, out, 0, half)
    for b in range(nbits - 1, -1, -1):
        bit = (m1 >> b) & 1
        _encode(state, out, bit * half, half)


@njit
def encode_kernel(symbols, bands, band_model, band_skip, cdf, smax, out):
    """Encode non-skipped symbols into ``out``; returns the byte count."""
    state = np.zeros(6, dtype=np.int64)
    state[1] = MASK32
    state[3] = 1
    state[5] = 1
    esc = 2 * smax + 1
    coded = 0
    for i in range(symbols.shape[0]):
        b = bands[i]
        if band_skip[b]:
            continue
        coded += 1
        m = band_model[b]
        s = symbols[i]
        if -smax <= s <= smax:
            idx = s + smax
        else:
            idx = esc
        lo = cdf[m, idx]
        _encode(state, out, lo, cdf[m, idx + 1] - lo)
        if idx == esc:
            _encode_escape(state, out, s, smax)
    if coded == 0:
        return 0
    for _ in range(5):
        _shift_low(state, out)
    return state[4]


@njit
def _dec_next(dstate, data):
    # dstate: [code, range, pos, status]
    if dstate[2] >= data.shape[0]:
        dstate[3] = EXHAUSTED
        return 0
    v = data[dstate[2]]
    dstate[2] += 1
    return v


@njit
def _dec_update(dstate, data, start, size):
    r = dstate[1] >> PROB_BITS
    dstate[0] -= start * r
    dstate[1] = r * size
    while dstate[1] < TOP:
        dstate[0] = ((dstate[0] << 8) | _dec_next(dstate, data)) & MASK32
        dstate[1] = dstate[1] << 8


@njit
def _dec_bit(dstate, data):
    half = TOTAL >> 1
    r = dstate[1] >> PROB_BITS
    f = dstate[0] // r
    if f >= TOTAL:
        dstate[3] = BAD_SYMBOL
        return 0
    bit = 1 if f >= half else 0
    _dec_update(dstate, data, bit * half, half)
    return bit


@njit
def decode_kernel(data, count, bands, band_model, band_skip, cdf, smax, out):
    """Decode ``count`` symbols into ``out``; returns a status code."""
    dstate = np.zeros(4, dtype=np.int64)
    dstate[1] = MASK32
    need_coder = False
    for i in range(count):
        if not band_skip[bands[i]]:
            need_coder = True
            break
    if need_coder:
        for _ in range(4):
            dstate[0] = (dstate[0] << 8) | _dec_next(dstate, data)
        if dstate[3] != OK:
            return dstate[3]
    esc = 2 * smax + 1
    nsym = esc + 1
    for i in range(count):
        b = bands[i]
        if band_skip[b]:
            out[i] = 0
            continue
        m = band_model[b]
        r = dstate[1] >> PROB_BITS
        f = dstate[0] // r
        if f >= TOTAL:
            return BAD_SYMBOL
        lo = 0
        hi = nsym
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if cdf[m, mid] <= f:
                lo = mid
            else:
                hi = mid
        start = cdf[m, lo]
        _dec_update(dstate, data, start, cdf[m, lo + 1] - start)
        if dstate[3] != OK:
            return dstate[3]
        if lo != esc:
            out[i] = lo - smax
        else:
            neg = _dec_bit(dstate, data)
            nbits = 0
            while _dec_bit(dstate, data) == 1:
                nbits += 1
                if nbits > 62 or dstate[3] != OK:
                    return BAD_SYMBOL if dstate[3] == OK else dstate[3]
            m1 = 1
            for _ in range(nbits):
                m1 = (m1 << 1) | _dec_bit(dstate, data)
            if dstate[3] != OK:
                return dstate[3]
            mag = m1 - 1 + smax + 1
            out[i] = -mag if neg else mag
    if need_coder:
        # the encoder flushes 5 shifts (first byte dropped): 4 bytes of tail
        # are already consumed by the decoder's initial fill
        if dstate[2] != data.shape[0]:
            return TRAILING
    elif data.shape[0] != 0:
        return TRAILING
    return OK
