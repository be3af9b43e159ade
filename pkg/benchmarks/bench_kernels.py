"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from plantedfg import _kernels_py as py
from plantedfg import kernels

CASES = {
    # name: (q, k, batch)
    "q2_k3": (2, 3, 100_000),
    "q3_k2": (3, 2, 100_000),
    "q2_k5": (2, 5, 20_000),
}


def _inputs(q, k, F, seed=0):
    g = np.random.default_rng(seed)
    tables = g.uniform(0.5, 1.5, size=(F, q ** k))
    gammas = g.dirichlet(np.ones(q), size=(F, k))
    hs = g.integers(0, k, size=F)
    return tables, gammas, hs


def _time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.compiled_backend:
        print("compiled extension not available; only the fallback can be timed")
    print(f"{'kernel':<24}{'case':<10}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for name, (q, k, F) in CASES.items():
        tables, gammas, hs = _inputs(q, k, F)
        pairs = [
            ("zf_batch", lambda m: m.zf_batch(tables, gammas)),
            ("messages_batch", lambda m: m.messages_batch(tables, hs, gammas)),
        ]
        for kname, call in pairs:
            tp = _time(lambda: call(py), args.repeat)
            if kernels.compiled_backend:
                cy = kernels.compiled_backend
                tc = _time(lambda: call(cy), args.repeat)
                print(f"{kname:<24}{name:<10}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.1f}")
            else:
                print(f"{kname:<24}{name:<10}{tp:>12.4f}{'-':>12}{'-':>10}")
    g = np.random.default_rng(1)
    for n, m in ((10, 10), (14, 20)):
        wires = g.integers(0, n, size=(m, 3))
        logt = np.log(g.uniform(0.5, 1.5, size=(m, 8)))
        prior = np.log([0.5, 0.5])
        tp = _time(lambda: py.assignment_log_weights(n, 2, wires, logt, prior), args.repeat)
        label = f"n{n}_m{m}"
        if kernels.compiled_backend:
            cy = kernels.compiled_backend
            tc = _time(lambda: cy.assignment_log_weights(n, 2, wires, logt, prior), args.repeat)
            print(f"{'assignment_log_weights':<24}{label:<10}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.1f}")
        else:
            print(f"{'assignment_log_weights':<24}{label:<10}{tp:>12.4f}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
