"""Block-matching search and quarter-pel interpolation kernels.

Each kernel has a numba loop version and a vectorized numpy version; the
module-level names dispatch on ``HAS_NUMBA``. Both produce identical integers.

Interpolation is separable 4-tap Catmull-Rom in 1/128 units. Horizontal and
vertical passes accumulate without intermediate rounding, then
``(acc + 8192) >> 14``; reads outside the plane clamp to the edge.
"""

import numpy as np

from .._accel import HAS_NUMBA, njit

TAPS = np.array(
    [
        [0, 128, 0, 0],
        [-9, 111, 29, -3],
        [-8, 72, 72, -8],
        [-3, 29, 111, -9],
    ],
    dtype=np.int64,
)
SHIFT = 14
ROUND = 1 << (SHIFT - 1)


@njit
def se_bits(v):
    """Length of the signed Exp-Golomb code of ``v``."""
    code = 2 * v - 1 if v > 0 else -2 * v
    n = 0
    x = code + 1
    while x > 1:
        x >>= 1
        n += 1
    return 2 * n + 1


def se_bits_np(v):
    v = np.asarray(v, dtype=np.int64)
    code = np.where(v > 0, 2 * v - 1, -2 * v)
    n = np.floor(np.log2(code + 1)).astype(np.int64)
    return 2 * n + 1


# ---------------------------------------------------------------- search


@njit
def full_search_numba(target, padded, pad, bs, srange, lam):
    """Integer-pel full search. Returns (vy, vx) grids in pel units.

    Cost is SAD + lam * rate(4*v); ties go to lower rate, then lower
    |dx|+|dy|, then the earlier candidate in raster order.
    """
    h, w = target.shape
    nby = h // bs
    nbx = w // bs
    vy = np.zeros((nby, nbx), dtype=np.int64)
    vx = np.zeros((nby, nbx), dtype=np.int64)
    for by in range(nby):
        for bx in range(nbx):
            y0 = by * bs
            x0 = bx * bs
            best = np.inf
            best_rate = 1 << 30
            best_l1 = 1 << 30
            bvy = 0
            bvx = 0
            for dy in range(-srange, srange + 1):
                for dx in range(-srange, srange + 1):
                    rate = se_bits(4 * dx) + se_bits(4 * dy)
                    penalty = lam * rate
                    sad = 0
                    stopped = False
                    for i in range(bs):
                        ry = y0 + i + dy + pad
                        for j in range(bs):
                            d = np.int64(target[y0 + i, x0 + j]) - np.int64(padded[ry, x0 + j + dx + pad])
                            sad += d if d >= 0 else -d
                        if sad + penalty > best:
                            stopped = True
                            break
                    if stopped:
                        continue
                    cost = sad + penalty
                    l1 = abs(dx) + abs(dy)
                    if cost < best or (
                        cost == best and (rate < best_rate or (rate == best_rate and l1 < best_l1))
                    ):
                        best = cost
                        best_rate = rate
                        best_l1 = l1
                        bvy = dy
                        bvx = dx
            vy[by, bx] = bvy
            vx[by, bx] = bvx
    return vy, vx


def full_search_numpy(target, padded, pad, bs, srange, lam):
    h, w = target.shape
    nby, nbx = h // bs, w // bs
    tgt = target.astype(np.int64)
    best = np.full((nby, nbx), np.inf)
    best_rate = np.full((nby, nbx), 1 << 30, dtype=np.int64)
    best_l1 = np.full((nby, nbx), 1 << 30, dtype=np.int64)
    vy = np.zeros((nby, nbx), dtype=np.int64)
    vx = np.zeros((nby, nbx), dtype=np.int64)
    for dy in range(-srange, srange + 1):
        for dx in range(-srange, srange + 1):
            rate = int(se_bits_np(4 * dx) + se_bits_np(4 * dy))
            l1 = abs(dx) + abs(dy)
            shifted = padded[pad + dy : pad + dy + h, pad + dx : pad + dx + w].astype(np.int64)
            sad = np.abs(tgt - shifted).reshape(nby, bs, nbx, bs).sum(axis=(1, 3))
            cost = sad + lam * rate
            better = (cost < best) | (
                (cost == best) & ((rate < best_rate) | ((rate == best_rate) & (l1 < best_l1)))
            )
            best = np.where(better, cost, best)
            best_rate = np.where(better, rate, best_rate)
            best_l1 = np.where(better, l1, best_l1)
            vy[better] = dy
            vx[better] = dx
    return vy, vx


# ---------------------------------------------------------- interpolation


@njit
def interp_plane_numba(ref, vy, vx, bs, maxval):
    """Motion-compensated prediction of a whole plane; vectors in quarter-pel."""
    h, w = ref.shape
    out = np.zeros((h, w), dtype=np.int64)
    tmp = np.zeros(4, dtype=np.int64)
    for by in range(h // bs):
        for bx in range(w // bs):
            mvy = vy[by, bx]
            mvx = vx[by, bx]
            iy = mvy >> 2
            fy = mvy & 3
            ix = mvx >> 2
            fx = mvx & 3
            for i in range(bs):
                y = by * bs + i + iy
                for j in range(bs):
                    x = bx * bs + j + ix
                    for k in range(4):
                        yy = min(max(y - 1 + k, 0), h - 1)
                        acc = np.int64(0)
                        for m in range(4):
                            xx = min(max(x - 1 + m, 0), w - 1)
                            acc += TAPS[fx, m] * np.int64(ref[yy, xx])
                        tmp[k] = acc
                    acc = np.int64(0)
                    for k in range(4):
                        acc += TAPS[fy, k] * tmp[k]
                    v = (acc + ROUND) >> SHIFT
                    out[by * bs + i, bx * bs + j] = min(max(v, 0), maxval)
    return out


def interp_plane_numpy(ref, vy, vx, bs, maxval):
    h, w = ref.shape
    ref = ref.astype(np.int64)
    mvy = np.repeat(np.repeat(np.asarray(vy, dtype=np.int64), bs, 0), bs, 1)
    mvx = np.repeat(np.repeat(np.asarray(vx, dtype=np.int64), bs, 0), bs, 1)
    ys = np.arange(h)[:, None] + (mvy >> 2)
    xs = np.arange(w)[None, :] + (mvx >> 2)
    fy = mvy & 3
    fx = mvx & 3
    acc = np.zeros((h, w), dtype=np.int64)
    for k in range(4):
        yy = np.clip(ys - 1 + k, 0, h - 1)
        row = np.zeros((h, w), dtype=np.int64)
        for m in range(4):
            xx = np.clip(xs - 1 + m, 0, w - 1)
            row += TAPS[fx, m] * ref[yy, xx]
        acc += TAPS[fy, k] * row
    return np.clip((acc + ROUND) >> SHIFT, 0, maxval)


if HAS_NUMBA:
    full_search = full_search_numba
    interp_plane = interp_plane_numba
else:
    full_search = full_search_numpy
    interp_plane = interp_plane_numpy
