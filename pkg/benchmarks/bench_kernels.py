"""Time the numba kernels against their numpy / interpreted fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The jitted versions are warmed up once before timing.  The network simplex
fallback is the same Python source run without compilation, so it is timed
on a smaller instance.
"""
import argparse
import statistics
import time

import numpy as np

from sot_align import _accel
from sot_align.cost import dense_costs, sparsify
from sot_align.kernels import (
    cdist_manhattan_nb,
    cdist_manhattan_np,
    hinge_terms_nb,
    hinge_terms_np,
    knn_manhattan_nb,
    knn_manhattan_np,
)
from sot_align.solver.network import network_simplex_kernel


def timed(fn, args, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return statistics.median(times)


def assignment_flow(D, K, alpha, beta):
    """Flow network of the relaxation with one shared virtual hub as root."""
    C = sparsify(D, K)
    m, n = D.shape
    hub = m + n
    src = np.concatenate([C.rows, np.arange(m), np.full(n, hub)]).astype(np.int64)
    dst = np.concatenate([m + C.cols, np.full(m, hub), m + np.arange(n)]).astype(np.int64)
    cost = np.concatenate([C.costs, np.full(m, beta), np.full(n, alpha)])
    demand = np.concatenate([-np.ones(m), np.ones(n), [m - n]]).astype(np.int64)
    return (hub + 1, src, dst, cost, demand, 1e-12, 10**9, hub)


def cases(rng):
    a, b = rng.normal(size=(1500, 64)), rng.normal(size=(1500, 64))
    yield "cdist 1500x1500x64", cdist_manhattan_nb, cdist_manhattan_np, (a, b)
    e = rng.normal(size=(2000, 64))
    yield "knn k=5 over 2000", knn_manhattan_nb, knn_manhattan_np, (e, 5)
    e1, e2 = rng.normal(size=(400, 96)), rng.normal(size=(400, 96))
    pos = np.repeat(rng.integers(400, size=(2, 2000)), 10, axis=1)  # one row per (anchor, negative)
    neg = rng.integers(400, size=(2, 20000))
    w = rng.random(20000)
    yield "hinge 2000 anchors x 10", hinge_terms_nb, hinge_terms_np, (e1, e2, pos[0], pos[1], neg[0], neg[1], w, 3.0, 96)
    for size, K in ((300, 10), (300, 100)):
        D = dense_costs(rng.random((size, 16)), rng.random((size, 16)))
        args = assignment_flow(D, K, float(np.median(D.min(0))), float(np.median(D.min(1))))
        yield f"network simplex {size}x{size} K={K}", network_simplex_kernel, _accel.interpreted(network_simplex_kernel), args


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not _accel.USE_NUMBA:
        print("numba disabled (SOT_ALIGN_DISABLE_NUMBA set or numba missing): both columns run the fallback")
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'numba':>10s} {'fallback':>10s} {'speedup':>8s}")
    for name, fast, slow, call_args in cases(rng):
        fast(*call_args)
        t_fast = timed(fast, call_args, args.repeat)
        t_slow = timed(slow, call_args, max(1, args.repeat // 2))
        print(f"{name:34s} {t_fast * 1e3:9.1f}ms {t_slow * 1e3:9.1f}ms {t_slow / t_fast:7.1f}x")


if __name__ == "__main__":
    main()
