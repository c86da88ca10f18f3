#!/usr/bin/env python3
"""Benchmark the demosaic kernel backends (numba @njit vs pure numpy).

Usage:
    python3 benchmarks/bench_demosaic.py [--sizes 512,1024,2048] [--repeats 5]

The numba path is warmed before timing so JIT compilation is excluded.
Also times the full attacked pipeline (mosaic -> row drop -> demosaic) at the
largest size to show where the kernel sits in context.
"""

import argparse
import time

import numpy as np

from emistrip import AttackSpec, BayerPattern, RgbImage, inject
from emistrip._kernels import demosaic_numpy

try:
    from emistrip._kernels import demosaic_numba

    HAS_NUMBA = True
except Exception:  # pragma: no cover
    HAS_NUMBA = False


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="512,1024,2048",
                        help="comma-separated square frame sizes")
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats (best-of)")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    rng = np.random.default_rng(0)
    tile = BayerPattern.RGGB.tile

    if HAS_NUMBA:
        demosaic_numba(rng.integers(0, 65536, size=(8, 8), dtype=np.uint16), tile)  # warm JIT

    print(f"{'size':>6} | {'numpy':>10} | {'numba':>10} | {'speedup':>7}")
    print("-" * 44)
    for size in sizes:
        samples = rng.integers(0, 65536, size=(size, size), dtype=np.uint16)
        t_np = best_of(lambda: demosaic_numpy(samples, tile), args.repeats)
        if HAS_NUMBA:
            t_nb = best_of(lambda: demosaic_numba(samples, tile), args.repeats)
            assert np.array_equal(demosaic_numba(samples, tile), demosaic_numpy(samples, tile))
            print(f"{size:>6} | {t_np * 1e3:>8.1f}ms | {t_nb * 1e3:>8.1f}ms | {t_np / t_nb:>6.1f}x")
        else:
            print(f"{size:>6} | {t_np * 1e3:>8.1f}ms | {'n/a':>10} | {'n/a':>7}")

    size = sizes[-1]
    image = RgbImage(rng.integers(0, 256, size=(size, size, 3), dtype=np.uint16))
    spec = AttackSpec.stochastic(0.01, seed=7)
    t_pipe = best_of(lambda: inject(image, BayerPattern.RGGB, spec), args.repeats)
    backend = "numba" if HAS_NUMBA else "numpy"
    print(f"\nfull inject pipeline @ {size}x{size} ({backend} backend): {t_pipe * 1e3:.1f}ms")


if __name__ == "__main__":
    main()
