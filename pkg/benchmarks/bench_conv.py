#!/usr/bin/env python3
"""Benchmark the convolution kernel backends.

Times corr_fwd / corr_wgrad / corr_dgrad on network-realistic shapes
for each available backend and prints a GFLOP/s table.  Numba timings
exclude the first (compilation) call.

Usage: python3 benchmarks/bench_conv.py [--repeats N]
"""

import argparse
import importlib.util
import time

import numpy as np

from uqnet import kernels

CASES = [
    # (name, batch, h, w, c_in, p, q, c_out)
    ("stem 32x32", 32, 32, 32, 1, 3, 3, 8),
    ("stage0 16x16", 32, 16, 16, 8, 3, 3, 8),
    ("stage1 8x8", 32, 8, 8, 16, 3, 3, 16),
    ("wide kernel 7x7", 32, 16, 16, 8, 7, 7, 8),
]


def flops(batch, h, w, c_in, p, q, c_out):
    ho, wo = h - p + 1, w - q + 1
    return 2.0 * batch * ho * wo * c_out * p * q * c_in


def time_call(fn, repeats):
    fn()  # warm up (and compile, for numba)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = ["numpy"]
    if importlib.util.find_spec("numba") is not None:
        backends.append("numba")

    rng = np.random.default_rng(0)
    print(f"{'case':<18} {'op':<6} " + " ".join(f"{b:>12}" for b in backends))
    for name, batch, h, w, c_in, p, q, c_out in CASES:
        x = rng.normal(size=(batch, h, w, c_in)).astype(np.float32)
        wt = rng.normal(size=(p, q, c_in, c_out)).astype(np.float32)
        b = np.zeros(c_out, dtype=np.float32)
        out_shape = (batch, h - p + 1, w - q + 1, c_out)
        g = rng.normal(size=out_shape).astype(np.float32)
        gf = flops(batch, h, w, c_in, p, q, c_out) / 1e9

        ops = {
            "fwd": lambda: kernels.corr_fwd(x, wt, b),
            "wgrad": lambda: kernels.corr_wgrad(x, g),
            "dgrad": lambda: kernels.corr_dgrad(g, wt, h, w),
        }
        for op_name, fn in ops.items():
            cells = []
            for backend in backends:
                kernels.use_backend(backend)
                seconds = time_call(fn, args.repeats)
                cells.append(f"{gf / seconds:>9.2f} GF")
            print(f"{name:<18} {op_name:<6} " + " ".join(f"{c:>12}" for c in cells))
    kernels.use_backend("auto")


if __name__ == "__main__":
    main()
