"""Slow, obviously-correct reference implementations used by the tests."""

from fractions import Fraction

import numpy as np


def count_confusion(pred, actual, positive=1):
    tp = fp = fn = tn = 0
    for p, a in zip(pred, actual):
        if p == positive and a == positive:
            tp += 1
        elif p == positive:
            fp += 1
        elif a == positive:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def exact_metrics(pred, actual):
    """Per-class precision / recall / F1 and accuracy as Fractions (None when undefined)."""
    out = {}
    for c in (0, 1):
        tp, fp, fn, tn = count_confusion(pred, actual, c)
        prec = Fraction(tp, tp + fp) if tp + fp else None
        rec = Fraction(tp, tp + fn) if tp + fn else None
        if prec is None or rec is None:
            f1 = None
        elif prec + rec == 0:
            f1 = Fraction(0)
        else:
            f1 = 2 * prec * rec / (prec + rec)
        out[c] = (prec, rec, f1, tp + fn)
    tp, fp, fn, tn = count_confusion(pred, actual, 1)
    out["accuracy"] = Fraction(tp + tn, len(pred))
    return out


def ks_brute(a, b):
    """max |F_a(t) - F_b(t)| over every sample point."""
    a, b = list(a), list(b)
    best = 0.0
    for t in a + b:
        fa = sum(v <= t for v in a) / len(a)
        fb = sum(v <= t for v in b) / len(b)
        best = max(best, abs(fa - fb))
    return best


def knn_brute(Z, i, k):
    """Set of indices within the k smallest distances from row i (ties at the boundary included)."""
    d = [(float(np.sum((Z[i] - Z[j]) ** 2)), j) for j in range(len(Z)) if j != i]
    d.sort()
    cutoff = d[k - 1][0]
    return {j for dist, j in d if dist <= cutoff}


def pca_svd(X, k):
    """Principal axes from an SVD of the centred data (no covariance matrix)."""
    Xc = X - X.mean(axis=0)
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    var = s ** 2 / (len(X) - 1)
    return vt[:k], var[:k] / var.sum(), Xc @ vt[:k].T


def gini_counts(c0, c1):
    n = c0 + c1
    return 1.0 - (c0 / n) ** 2 - (c1 / n) ** 2 if n else 0.0


def best_root_split(X, y):
    """Largest weighted Gini decrease over every (feature, midpoint)."""
    n = len(y)
    parent = gini_counts(int(np.sum(y == 0)), int(np.sum(y == 1)))
    best = 0.0
    for j in range(X.shape[1]):
        vals = np.unique(X[:, j])
        for lo, hi in zip(vals, vals[1:]):
            t = 0.5 * (lo + hi)
            left = X[:, j] <= t
            yl, yr = y[left], y[~left]
            child = (len(yl) * gini_counts(np.sum(yl == 0), np.sum(yl == 1))
                     + len(yr) * gini_counts(np.sum(yr == 0), np.sum(yr == 1))) / n
            best = max(best, parent - child)
    return best


def central_difference(params, loss, h=1e-5):
    """Finite-difference gradient of ``loss()`` w.r.t. every entry of every
    array in ``params`` (perturbed in place and restored)."""
    out = []
    for p in params:
        g = np.zeros_like(p)
        flat, gf = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = loss()
            flat[i] = old - h
            down = loss()
            flat[i] = old
            gf[i] = (up - down) / (2 * h)
        out.append(g)
    return out


def max_relative_error(a_list, b_list, floor=1e-6):
    """Entries smaller than ``floor`` in both arrays are compared on an
    absolute scale, since a central difference cannot resolve them."""
    worst = 0.0
    for a, b in zip(a_list, b_list):
        den = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
        worst = max(worst, float(np.max(np.abs(a - b) / den)))
    return worst
