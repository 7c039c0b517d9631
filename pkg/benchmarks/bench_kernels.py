"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Each case builds its inputs once, then times a fresh copy per call so that
in-place kernels see identical state on every repeat.
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from scenecast import autodiff as ad
from scenecast import kernels


def gibbs_case(rng):
    n, n_docs, K, V = 20000, 400, 8, 500
    docs = np.sort(rng.integers(0, n_docs, n)).astype(np.int64)
    words = rng.integers(0, V, n).astype(np.int64)
    z = rng.integers(0, K, n).astype(np.int64)
    ndk = np.zeros((n_docs, K), dtype=np.int64)
    nkw = np.zeros((K, V), dtype=np.int64)
    np.add.at(ndk, (docs, z), 1)
    np.add.at(nkw, (z, words), 1)
    u = rng.random(n)
    state = (z, ndk, nkw, nkw.sum(axis=1))

    def run(mod):
        mod.gibbs_sweep(docs, words, *[a.copy() for a in state], 0.5, 0.01, u)
    return run


def tree_case(rng):
    X = rng.normal(size=(2000, 20))
    y = X[:, 0] ** 2 + rng.normal(size=2000) * 0.1
    samples = rng.integers(0, 2000, 2000).astype(np.int64)
    return lambda mod: mod.build_tree(X, y, samples, 8, 2, 6, 0)


def adam_case(rng):
    arrs = [rng.normal(size=200_000), rng.normal(size=200_000), np.zeros(200_000), np.zeros(200_000)]

    def run(mod):
        mod.adam_update(*[a.copy() for a in arrs], 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)
    return run


def message_case(rng):
    nv, ne, d = 300, 6000, 64
    h, e = rng.normal(size=(nv, d)), rng.normal(size=(ne, d))
    src, dst = rng.integers(0, nv, ne), rng.integers(0, nv, ne)
    order, indptr = ad.csr_by_destination(dst, nv)
    g = rng.normal(size=(nv, d))

    def run(mod):
        out, m, w = mod.message_aggregate_forward(h, e, src, order, indptr, 1.0, 1e-7)
        mod.message_aggregate_backward(g, h, e, src, dst, m, w, out, 1.0)
    return run


def lasso_case(rng):
    Z = rng.normal(size=(500, 60))
    G, c = Z.T @ Z / 500, Z.T @ rng.normal(size=500) / 500

    def run(mod):
        mod.lasso_cd(G, c, np.zeros(60), 0.01, 1e-12, 2000, 0)
    return run


CASES = {"gibbs_sweep": gibbs_case, "build_tree": tree_case, "adam_update": adam_case,
         "message_aggregate": message_case, "lasso_cd": lasso_case}


def best_time(fn, mod, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(mod)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write the timings here")
    args = ap.parse_args(argv)
    py = kernels.get_backend("python")
    try:
        cy = kernels.get_backend("cython")
    except ImportError:
        raise SystemExit("compiled extension not built; run pip install -e . --no-build-isolation")

    rows = []
    print(f"{'kernel':<20}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for name, make in CASES.items():
        fn = make(np.random.default_rng(0))
        t_py, t_cy = best_time(fn, py, args.repeat), best_time(fn, cy, args.repeat)
        rows.append({"kernel": name, "python": t_py, "cython": t_cy, "speedup": t_py / t_cy})
        print(f"{name:<20}{t_py:>12.4f}{t_cy:>12.4f}{t_py / t_cy:>9.1f}x")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as f:
            json.dump(rows, f, indent=1)


if __name__ == "__main__":
    main()
