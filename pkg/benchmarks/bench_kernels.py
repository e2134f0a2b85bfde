"""Time the numba and numpy kernels on one problem and check they agree.

    python3 benchmarks/bench_kernels.py --rows 20000 --features 200

The package-wide choice is made with PPMINSPECT_BACKEND=numba|numpy; this
script calls both implementations directly.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from ppminspect import gbdt, kernels
from ppminspect._accel import active_backend


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=20_000)
    ap.add_argument("--features", type=int, default=200)
    ap.add_argument("--nodes", type=int, default=8)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    # count-like columns, as produced by the aggregation encoding
    X = rng.poisson(0.3, size=(args.rows, args.features)).astype(float)
    sorted_idx = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))
    node_of = rng.integers(0, args.nodes, size=args.rows).astype(np.int64)
    g, h = rng.normal(size=args.rows), rng.uniform(0.05, 0.25, size=args.rows)
    G = np.bincount(node_of, weights=g, minlength=args.nodes)
    H = np.bincount(node_of, weights=h, minlength=args.nodes)
    split_args = (X, sorted_idx, node_of, g, h, G, H, 1.0, 0.0, 1.0)

    kernels.level_best_splits_numba(*split_args)  # compile outside the timing
    t_nb, a = best_of(lambda: kernels.level_best_splits_numba(*split_args), args.repeats)
    t_np, b = best_of(lambda: kernels.level_best_splits_numpy(*split_args), args.repeats)
    same_split = all(np.array_equal(x, y) for x, y in zip(a, b))

    y = (X[:, 0] + X[:, 1] - X[:, 2] + rng.normal(scale=0.5, size=args.rows) > 0.3).astype(float)
    model = gbdt.fit(X[:2000], y[:2000], gbdt.Hyperparams(n_rounds=50, max_depth=6))
    flat = model._flat(None)
    kernels.predict_forest_numba(X, *flat, model.base_score)
    p_nb_t, p_nb = best_of(lambda: kernels.predict_forest_numba(X, *flat, model.base_score), args.repeats)
    p_np_t, p_np = best_of(lambda: kernels.predict_forest_numpy(X, *flat, model.base_score), args.repeats)

    print(f"active backend: {active_backend()}")
    print(f"split search  {args.rows} x {args.features}, {args.nodes} nodes")
    print(f"  numba {t_nb * 1e3:9.1f} ms   numpy {t_np * 1e3:9.1f} ms   speed-up {t_np / t_nb:5.1f}x   identical={same_split}")
    print(f"forest predict {args.rows} rows, {len(model.trees)} trees")
    print(f"  numba {p_nb_t * 1e3:9.1f} ms   numpy {p_np_t * 1e3:9.1f} ms   speed-up {p_np_t / p_nb_t:5.1f}x   "
          f"identical={np.array_equal(p_nb, p_np)}")
    return 0 if same_split and np.array_equal(p_nb, p_np) else 1


if __name__ == "__main__":
    raise SystemExit(main())
