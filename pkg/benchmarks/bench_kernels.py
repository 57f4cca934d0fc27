"""Time each numba kernel against its numpy twin and check they agree.

    python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

The first numba call (compilation, or loading the on-disk cache) is run
once before timing and is not counted.
"""

import argparse
import math
import time

import numpy as np

from rareaug._jit import NUMBA_ENABLED
from rareaug.classifiers import _tree_kernels as TK
from rareaug.ctgan import nn as NN
from rareaug.ctgan import normalizer as NZ
from rareaug.fidelity import _kernels as FK
from rareaug.smote import _knn_nb, _knn_np


def best_time(fn, repeat):
    out, best = None, math.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _agree(a, b, tol):
    if isinstance(a, tuple):
        return all(_agree(x, y, tol) for x, y in zip(a, b))
    if isinstance(a, list):
        a, b = np.asarray(a, float), np.asarray(b, float)
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        return False
    return bool(np.allclose(a, b, rtol=tol, atol=tol))


def cases(scale, rng):
    s = lambda n: max(8, int(n * scale))

    # tree growth on a 2,000 x 20 problem
    n, p = s(2000), 20
    X = rng.normal(size=(n, p))
    y = (X[:, 0] + 0.5 * rng.normal(size=n) > 1.0).astype(np.int64)
    w = np.ones(n, np.int64)
    order = TK.presort(X)
    is_cat = np.zeros(p, np.bool_)
    card = np.zeros(p, np.int64)
    tree_args = (X, y, w, order, is_cat, card, 12, 5, 4, np.uint64(7))
    yield "tree build", lambda: TK.build_tree_nb(*tree_args), lambda: TK.build_tree_np(*tree_args), 0.0
    arrays = TK.build_tree_nb(*tree_args)[:5]
    Xq = rng.normal(size=(s(20000), p))
    yield "tree apply", lambda: TK.apply_tree_nb(Xq, *arrays), lambda: TK.apply_tree_np(Xq, *arrays), 0.0

    a = np.sort(rng.normal(size=s(50000)))
    b = np.sort(rng.normal(0.1, 1.0, size=s(40000)))
    yield "KS statistic", lambda: FK.ks_stat_nb(a, b), lambda: FK.ks_stat_np(a, b), 1e-12

    Z = rng.normal(size=(s(600), 10))
    yield "kNN (k=5)", lambda: _knn_nb(Z, 5), lambda: _knn_np(Z, 5), 0.0

    Xt = rng.normal(size=(s(400), 10))
    sq = np.sum(Xt * Xt, 1)
    D2 = np.maximum(sq[:, None] + sq[None, :] - 2 * Xt @ Xt.T, 0.0)
    np.fill_diagonal(D2, 0.0)
    lp = math.log(30.0)
    yield "t-SNE affinities", lambda: FK.cond_probs_nb(D2, lp, 1e-5, 200), lambda: FK.cond_probs_np(D2, lp, 1e-5, 200), 1e-9
    P = FK.cond_probs_np(D2, lp, 1e-5, 200)
    P = (P + P.T) / (2 * len(P))
    Y = rng.normal(scale=1e-2, size=(len(P), 2))
    yield "t-SNE gradient", lambda: FK.tsne_grad_nb(P, Y, 12.0), lambda: FK.tsne_grad_np(P, Y, 12.0), 1e-9

    x = np.concatenate([rng.normal(-3, 1, s(5000)), rng.normal(3, 0.5, s(5000))])
    init = NZ._init_params(x, 3)
    yield ("GMM EM (k=3)", lambda: NZ._em_nb(x, *init, 100, 1e-6)[:3],
           lambda: NZ._em_np(x, *init, 100, 1e-6)[:3], 1e-8)

    m = s(200_000)
    g = rng.normal(size=m)
    state = [rng.normal(size=m) for _ in range(3)]

    def adam(kernel):
        p_, m_, v_ = (a.copy() for a in state)
        v_ = np.abs(v_)
        kernel(p_, g, m_, v_, 1e-3, 0.9, 0.999, 0.1, 0.001, 1e-8)
        return p_

    yield "Adam update", lambda: adam(NN._adam_nb), lambda: adam(NN._adam_np), 1e-12


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply problem sizes")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"numba dispatch enabled: {NUMBA_ENABLED}")
    print(f"{'kernel':<18}{'numba ms':>10}{'numpy ms':>10}{'speed-up':>10}  agree")
    for name, nb_fn, np_fn, tol in cases(args.scale, rng):
        nb_fn()  # compile / load cache
        t_nb, r_nb = best_time(nb_fn, args.repeat)
        t_np, r_np = best_time(np_fn, args.repeat)
        print(f"{name:<18}{t_nb * 1e3:>10.2f}{t_np * 1e3:>10.2f}{t_np / max(t_nb, 1e-12):>9.1f}x  {_agree(r_nb, r_np, tol)}")


if __name__ == "__main__":
    main()
