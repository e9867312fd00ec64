"""Compare the numba and numpy split-search kernels.

Both paths produce bit-identical results; this script measures how much the
compiled loop buys at typical node sizes. Run as

    python3 benchmarks/split_benchmark.py [--rows 2000] [--cols 200] [--reps 20]

The first numba call includes JIT compilation; it is timed separately.
"""

import argparse
import time

import numpy as np

from stancelab._kernels import (USING_NUMBA, _best_split_numpy, best_split)


def _instances(rows, cols, reps, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(reps):
        X = np.ascontiguousarray(rng.poisson(1.0, size=(rows, cols)).astype(np.float64))
        p = rng.uniform(0.05, 0.95, rows)
        y = (rng.random(rows) < p).astype(np.float64)
        out.append((X, p - y, np.maximum(p * (1 - p), 1e-16)))
    return out


def _time(fn, instances):
    t0 = time.perf_counter()
    for X, g, h in instances:
        fn(X, g, h, 1.0, 1.0)
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--cols", type=int, default=200)
    ap.add_argument("--reps", type=int, default=20)
    args = ap.parse_args()

    instances = _instances(args.rows, args.cols, args.reps)
    print(f"split search on {args.rows} rows x {args.cols} cols, "
          f"{args.reps} reps")

    t_numpy = _time(_best_split_numpy, instances)
    print(f"  numpy fallback : {t_numpy:8.3f}s "
          f"({t_numpy / args.reps * 1000:7.1f} ms/node)")

    if USING_NUMBA:
        t_jit = _time(best_split, instances[:1])
        print(f"  numba warm-up  : {t_jit:8.3f}s (first call, includes JIT)")
        t_numba = _time(best_split, instances)
        print(f"  numba kernel   : {t_numba:8.3f}s "
              f"({t_numba / args.reps * 1000:7.1f} ms/node)")
        print(f"  speedup        : {t_numpy / t_numba:8.1f}x")
        for X, g, h in instances[:5]:
            assert best_split(X, g, h, 1.0, 1.0) == \
                _best_split_numpy(X, g, h, 1.0, 1.0)
        print("  agreement      : identical results on spot-checked nodes")
    else:
        print("  numba unavailable or disabled (STANCELAB_NO_NUMBA); "
              "only the numpy path was timed")


if __name__ == "__main__":
    main()
