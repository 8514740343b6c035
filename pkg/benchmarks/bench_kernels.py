"""Benchmark: compiled rank-probability kernels vs the pure-NumPy fallback.

Usage:  python benchmarks/bench_kernels.py [--reps N]

Times the two hot accumulation kernels on representative problem sizes
and prints the speedup of the compiled extension.
"""

import argparse
import time

import numpy as np

from covweight import kernels


def bench(fn, *args, repeat=3):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--reps", type=int, default=20_000,
                        help="Monte-Carlo draws per case")
    args = parser.parse_args()

    if not kernels.USING_COMPILED:
        print("compiled extension not built; benchmarking fallback only")

    rng = np.random.default_rng(0)
    cases = [
        ("exact m=100 (50/50)", "exact", 49, 50, 100),
        ("exact m=500 (400/100)", "exact", 400, 99, 500),
        ("normal m=1,000", "normal", 900, 99, 1000),
        ("normal m=10,000", "normal", 9000, 999, 10000),
    ]
    print(f"{'case':26s} {'compiled':>10s} {'pure':>10s} {'speedup':>8s}")
    for name, kind, n0, n1, m in cases:
        p0 = rng.uniform(0, 1, args.reps)
        p1 = rng.uniform(0, 1, args.reps)
        if kind == "exact":
            fast = bench(kernels.exact_rank_pmf, p0, p1, n0, n1, m)
            slow = bench(kernels.exact_rank_pmf_py, p0, p1, n0, n1, m)
        else:
            fast = bench(kernels.normal_rank_pmf, p0, p1, n0, n1, m)
            slow = bench(kernels.normal_rank_pmf_py, p0, p1, n0, n1, m)
        print(f"{name:26s} {fast:9.3f}s {slow:9.3f}s {slow / fast:7.1f}x")


if __name__ == "__main__":
    main()
