"""Compare the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 20] [--size 64 256 640]

Times LBP coding, histogramming, block differencing and one full
per-sequence scoring step (20 frames) at several frame sizes. Compilation
is warmed up before timing and both backends are checked for equal output.
"""

import argparse
import statistics
import time

import numpy as np

from fuzzylive import _kernels


def timed(fn, repeat):
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def sequence_step(frames, use_numba):
    # the per-sequence work: one LBP histogram plus 19 pair differences
    codes = _kernels.lbp_codes(frames[len(frames) // 2], use_numba)
    _kernels.code_histogram(codes, use_numba)
    for a, b in zip(frames, frames[1:]):
        _kernels.block_mean_abs_diff(a, b, 4, use_numba)


def cases(size, rng):
    img = rng.integers(0, 256, (size, size)).astype(np.uint8)
    codes = _kernels.lbp_codes(img, use_numba=False)
    side = size - size % 4
    a = rng.random((side, side)) * 255
    b = rng.random((side, side)) * 255
    frames = [rng.random((side, side)) * 255 for _ in range(20)]
    return {
        "lbp": lambda nb: _kernels.lbp_codes(img, nb),
        "histogram": lambda nb: _kernels.code_histogram(codes, nb),
        "block diff": lambda nb: _kernels.block_mean_abs_diff(a, b, 4, nb),
        "sequence": lambda nb: sequence_step(frames, nb),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--size", type=int, nargs="+", default=[64, 256, 640])
    args = ap.parse_args(argv)

    if not _kernels.HAVE_NUMBA:
        print("numba is not installed; only the numpy backend is available")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<11} {'size':>5} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for size in args.size:
        for name, fn in cases(size, rng).items():
            ref, fast = fn(False), fn(True)  # warm-up, also compiles
            if ref is not None:
                assert np.allclose(ref, fast), name
            t_np = timed(lambda: fn(False), args.repeat)
            t_nb = timed(lambda: fn(True), args.repeat)
            print(f"{name:<11} {size:>5} {t_np * 1e3:>10.3f} {t_nb * 1e3:>10.3f} "
                  f"{t_np / t_nb:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
