"""Compiled vs numpy lag-product kernel.

Run: python3 benchmarks/bench_kernels.py [--sizes 128 256 512] [--repeat 5]
"""

import argparse
import time

import numpy as np

from tfimmse import kernels
from tfimmse.tfa import upsample2


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512, 1024])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.compiled_accumulate_lag_products is None:
        print("compiled kernel not built; only the numpy path is available")
    rng = np.random.default_rng(0)
    print(f"{'N':>6} {'numpy ms':>10} {'compiled ms':>12} {'speedup':>8} {'max diff':>10}")
    for n in args.sizes:
        xu = upsample2(rng.standard_normal(n) + 1j * rng.standard_normal(n))
        a = np.zeros((n, n), dtype=np.complex128)
        b = np.zeros((n, n), dtype=np.complex128)
        tp = best_of(lambda: kernels.python_accumulate_lag_products(xu, xu, a, False, 1.0), args.repeat)
        if kernels.compiled_accumulate_lag_products is None:
            print(f"{n:>6} {tp * 1e3:>10.3f} {'-':>12} {'-':>8} {'-':>10}")
            continue
        tc = best_of(lambda: kernels.compiled_accumulate_lag_products(xu, xu, b, False, 1.0), args.repeat)
        a[:] = 0
        b[:] = 0
        kernels.python_accumulate_lag_products(xu, xu, a, False, 1.0)
        kernels.compiled_accumulate_lag_products(xu, xu, b, False, 1.0)
        print(f"{n:>6} {tp * 1e3:>10.3f} {tc * 1e3:>12.3f} {tp / tc:>8.1f} {np.max(np.abs(a - b)):>10.2e}")


if __name__ == "__main__":
    main()
