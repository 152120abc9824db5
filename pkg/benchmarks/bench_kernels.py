"""Time the numba kernels against the pure numpy/python fallback.

    python3 benchmarks/bench_kernels.py [--size 128] [--range 32] [--symbols 100000]

The fallback column comes from a child process started with
``HBVC_DISABLE_NUMBA=1``, so it measures exactly what users get without numba.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def timed(fn, *args, repeat=3):
    fn(*args)  # warm-up / compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def measure(size: int, srange: int, n_symbols: int, repeat: int) -> dict:
    from hbvc import _accel
    from hbvc import entropy as ent
    from hbvc._kernels import motion as K
    from hbvc._kernels import rangecoder as rc

    rng = np.random.default_rng(0)
    tgt = rng.integers(0, 256, (size, size)).astype(np.int64)
    pad = srange + 2
    padded = np.pad(np.roll(tgt, (3, -5), (0, 1)), pad, mode="edge").astype(np.int64)
    vy = rng.integers(-40, 40, (size // 16, size // 16))
    vx = rng.integers(-40, 40, (size // 16, size // 16))

    s = np.rint(rng.laplace(0, 4, n_symbols)).astype(np.int64)
    bands = np.zeros(s.size, dtype=np.int64)
    midx = ent.fit_model(s, None, 1).as_array()
    skip = np.zeros(1, dtype=np.bool_)
    out = np.zeros(4 * s.size + 64, dtype=np.uint8)
    nbytes = rc.encode_kernel(s, bands, midx, skip, ent.CDF, ent.SMAX, out)
    data = out[:nbytes].copy()
    dec = np.zeros(s.size, dtype=np.int64)

    return {
        "numba": _accel.HAS_NUMBA,
        f"full search {size}x{size} +-{srange}": timed(K.full_search, tgt, padded, pad, 16, srange, 0.0, repeat=repeat),
        f"quarter-pel interp {size}x{size}": timed(K.interp_plane, tgt, vy, vx, 16, 255, repeat=repeat),
        f"range encode {n_symbols} symbols": timed(
            rc.encode_kernel, s, bands, midx, skip, ent.CDF, ent.SMAX, out, repeat=repeat
        ),
        f"range decode {n_symbols} symbols": timed(
            rc.decode_kernel, data, s.size, bands, midx, skip, ent.CDF, ent.SMAX, dec, repeat=repeat
        ),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--range", type=int, default=32)
    ap.add_argument("--symbols", type=int, default=100_000)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        print(json.dumps(measure(args.size, args.range, args.symbols, repeat=1)))
        return

    fast = measure(args.size, args.range, args.symbols, repeat=3)
    env = dict(os.environ, HBVC_DISABLE_NUMBA="1")
    cmd = [sys.executable, __file__, "--child", "--size", str(args.size), "--range", str(args.range),
           "--symbols", str(args.symbols)]
    slow = json.loads(subprocess.run(cmd, env=env, capture_output=True, text=True, check=True).stdout)
    if not fast.pop("numba"):
        print("numba is not active in this process; both columns time the fallback")
    slow.pop("numba")
    print(f"{'kernel':34s} {'numba s':>10s} {'fallback s':>11s} {'speed-up':>9s}")
    for name, a in fast.items():
        b = slow[name]
        print(f"{name:34s} {a:10.4f} {b:11.4f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()
