"""Time the compiled kernels against the numpy fallback on identical inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]

Each row reports the best-of-``repeat`` wall time per backend and the
maximum absolute difference between their outputs.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from nodeaug import kernels
from nodeaug.graph import synth_sbm
from nodeaug.spectral import unnormalized_laplacian


def _best(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _diff(a, b):
    if isinstance(a, tuple):
        return max(_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def cases(rng):
    for n in (60, 150, 300):
        g = synth_sbm([n // 2, n - n // 2], 0.1, 0.01, 8, 0.5, rng)
        L = unnormalized_laplacian(g)
        yield f"eigh n={n}", "symmetric_eigh", (L,), "eig"
    for n, k in ((2000, 10), (20000, 30)):
        pts, cen = rng.standard_normal((n, 8)), rng.standard_normal((k, 8))
        yield f"kmeans_assign n={n} k={k}", "kmeans_assign", (pts, cen), None
    for m in (50, 400):
        yield f"mean_distances m={m}", "mean_distances", (rng.standard_normal((m, 10)),), None
    for m, d in ((1000, 7), (50000, 7), (20000, 64)):
        P, Q = rng.random((m, d)), rng.random((m, d))
        yield f"pair_distances m={m} d={d}", "pair_distances", (P, Q), None


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--csv")
    args = ap.parse_args(argv)
    if kernels.compiled_backend is None:
        print("compiled backend unavailable; build the extension first", file=sys.stderr)
        return 1
    rows = []
    for label, name, inputs, kind in cases(np.random.default_rng(0)):
        tc, oc = _best(lambda: getattr(kernels.compiled_backend, name)(*inputs), args.repeat)
        tp, op = _best(lambda: getattr(kernels.python_backend, name)(*inputs), args.repeat)
        # eigenvectors are only defined up to sign/rotation: compare the spectra
        diff = _diff(oc[0], op[0]) if kind == "eig" else _diff(oc, op)
        rows.append((label, tc, tp, tp / tc if tc > 0 else np.inf, diff))
    print(f"{'case':34s} {'compiled_s':>11s} {'python_s':>11s} {'py/comp':>8s} {'max|diff|':>10s}")
    for label, tc, tp, ratio, diff in rows:
        print(f"{label:34s} {tc:11.5f} {tp:11.5f} {ratio:8.2f} {diff:10.2e}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["case", "compiled_s", "python_s", "ratio", "max_abs_diff"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
