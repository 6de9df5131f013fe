"""Benchmark the compiled k-NN selection/vote kernels against the
pure-numpy fallback on a synthetic workload, and verify they agree.

Usage: python benchmarks/bench_knn_kernels.py [--queries N] [--refs M]
       [--k K] [--repeats R]
"""

import argparse
import time

import numpy as np

from xfermetric import _nnkernels_py

try:
    from xfermetric import _nnkernels as _compiled
except ImportError:
    _compiled = None


def run(impl, sims, labels, k, num_classes):
    top = impl.top_k_block(sims, k)
    top_labels = np.ascontiguousarray(labels[top])
    top_sims = np.ascontiguousarray(np.take_along_axis(sims, top, axis=1))
    preds = impl.vote_block(top_labels, top_sims, k, num_classes, False)
    return top, preds


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--queries", type=int, default=1024)
    parser.add_argument("--refs", type=int, default=20000)
    parser.add_argument("--k", type=int, default=200)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--classes", type=int, default=10)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    sims = np.ascontiguousarray(rng.standard_normal((args.queries, args.refs)))
    labels = rng.integers(0, args.classes, size=args.refs).astype(np.int64)

    impls = [("python", _nnkernels_py)]
    if _compiled is not None:
        impls.insert(0, ("compiled", _compiled))
    else:
        print("compiled extension not built; timing the fallback only")

    results = {}
    outputs = {}
    for name, impl in impls:
        best = np.inf
        for _ in range(args.repeats):
            start = time.perf_counter()
            outputs[name] = run(impl, sims, labels, args.k, args.classes)
            best = min(best, time.perf_counter() - start)
        results[name] = best
        print(f"{name:>9}: {best:8.4f} s "
              f"({args.queries} queries x {args.refs} refs, k={args.k})")

    if len(outputs) == 2:
        top_c, pred_c = outputs["compiled"]
        top_p, pred_p = outputs["python"]
        assert np.array_equal(top_c, top_p) and np.array_equal(pred_c, pred_p), \
            "kernel outputs diverged"
        print(f"outputs identical; speedup {results['python'] / results['compiled']:.1f}x")


if __name__ == "__main__":
    main()
