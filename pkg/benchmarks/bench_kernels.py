"""Benchmark the jitted statistics kernel against the pure-numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeats 5]

The compiled path is exercised through the public dispatcher (so it
includes one warm-up call for JIT compilation); the fallback is called
directly.  Set ``LITREL_NO_NUMBA=1`` to confirm both rows then match.
"""

import argparse
import time

import numpy as np

from litrel.kernels import NUM_STATS, _column_stats_numpy, column_stats, using_numba

SHAPES = [(100, 4), (1_000, 8), (10_000, 16), (100_000, 16), (100_000, 64)]


def time_call(fn, repeats):
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

    rng = np.random.default_rng(0)
    print(f"compiled path active: {using_numba()}")
    header = f"{'rows':>8} {'cols':>5} {'compiled (ms)':>14} {'numpy (ms)':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for rows, cols in SHAPES:
        values = rng.normal(size=(rows, cols))
        mask = rng.random(size=(rows, cols)) < 0.7
        values = np.ascontiguousarray(np.where(mask, values, 0.0))
        mask = np.ascontiguousarray(mask)

        expected = _column_stats_numpy(values, mask)
        got = column_stats(values, mask)  # also warms up the JIT
        np.testing.assert_allclose(got, expected, atol=1e-9)
        assert got.shape == (cols, NUM_STATS)

        t_fast = time_call(lambda: column_stats(values, mask), args.repeats)
        t_numpy = time_call(lambda: _column_stats_numpy(values, mask), args.repeats)
        print(
            f"{rows:>8} {cols:>5} {t_fast * 1e3:>14.3f} {t_numpy * 1e3:>12.3f} "
            f"{t_numpy / t_fast:>7.1f}x"
        )


if __name__ == "__main__":
    main()
