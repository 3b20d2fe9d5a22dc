"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from topicsel.kernels import _fallback

try:
    from topicsel.kernels import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    perm = rng.permutation(2000).astype(np.int64)
    scores = rng.normal(size=(100, 200))
    truth = rng.permutation(100).astype(np.int64)
    n_sys, depth, pool = 40, 100, 1500
    lists = np.stack([rng.choice(pool, size=depth, replace=False) for _ in range(n_sys)]).astype(np.int64)
    lengths = np.full(n_sys, depth, dtype=np.int64)
    X = rng.normal(size=(5000, 63))
    r = rng.normal(size=5000)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T, dtype=np.int64)
    return {
        "count_discordant n=2000": lambda m: m.count_discordant(perm),
        "tau_columns 100 systems x 200 columns": lambda m: m.tau_columns(scores, truth),
        "pairwise_list_stats 40 lists depth 100": lambda m: m.pairwise_list_stats(lists, lengths, pool),
        "best_split 5000 x 63": lambda m: m.best_split(X, r, order, 1),
    }


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; only the fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':42s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        py = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:42s} {py:10.2f}")
            continue
        cy = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:42s} {py:10.2f} {cy:10.2f} {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
