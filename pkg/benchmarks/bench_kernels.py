"""Compare the compiled split/attribution kernels with the pure fallback.

Runs the same forest fit and exact attribution workload under both
backends, checks the outputs are bit-identical, and prints wall times.

    python3 benchmarks/bench_kernels.py [--trials N] [--features D]
                                        [--trees T] [--repeats R]
"""

import argparse
import time

import numpy as np

from attnshift import _kernels
from attnshift.forest import ForestConfig, fit, predict_proba
from attnshift.shapx import tree_shap


def make_problem(n_trials, n_features, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(0.0, 1.0, (n_trials, n_features))
    y = (X[:, :4].sum(axis=1) + rng.normal(0.0, 1.5, n_trials) > 0).astype(int)
    return X, y


def time_backend(backend, X, y, config, repeats):
    saved = _kernels.backend
    _kernels.backend = backend
    try:
        fit_times, shap_times = [], []
        model = None
        att = None
        for _ in range(repeats):
            t0 = time.perf_counter()
            model = fit(X, y, config)
            fit_times.append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            att = tree_shap(model, X)
            shap_times.append(time.perf_counter() - t0)
        return min(fit_times), min(shap_times), model, att
    finally:
        _kernels.backend = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=80)
    ap.add_argument("--features", type=int, default=500)
    ap.add_argument("--trees", type=int, default=100)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    X, y = make_problem(args.trials, args.features, args.seed)
    config = ForestConfig(n_trees=args.trees, max_depth=10, seed=args.seed)
    print(
        f"workload: {args.trials} trials x {args.features} features, "
        f"{args.trees} trees, best of {args.repeats}"
    )

    backends = [_kernels.pykernels]
    if _kernels.HAVE_COMPILED:
        from attnshift._kernels import _core

        backends.insert(0, _core)
    else:
        print("compiled extension not available; timing the fallback only")

    results = {}
    for backend in backends:
        name = backend.backend_name()
        fit_t, shap_t, model, att = time_backend(backend, X, y, config, args.repeats)
        results[name] = (fit_t, shap_t, model, att)
        print(f"{name:>12}:  fit {fit_t * 1e3:9.1f} ms   tree_shap {shap_t * 1e3:9.1f} ms")

    if len(results) == 2:
        (cf, cs, cm, ca), (pf, ps, pm, pa) = results["compiled"], results["python"]
        print(f"{'speedup':>12}:  fit {pf / cf:8.1f}x    tree_shap {ps / cs:8.1f}x")
        same = np.array_equal(predict_proba(cm, X), predict_proba(pm, X))
        same &= np.array_equal(ca.phi, pa.phi) and ca.base == pa.base
        for tc, tp in zip(cm.trees, pm.trees):
            same &= np.array_equal(tc.threshold, tp.threshold)
            same &= np.array_equal(tc.feature, tp.feature)
        print(f"bit-identical outputs: {bool(same)}")
        if not same:
            raise SystemExit(1)


if __name__ == "__main__":
    main()
