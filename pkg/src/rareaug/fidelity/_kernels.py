"""Hot loops for the fidelity diagnostics (KS scan, exact t-SNE)."""

import numpy as np

from .._jit import njit, pick

# -- two-sample KS ----------------------------------------------------------


@njit
def ks_stat_nb(sa, sb):
    na, nb = sa.shape[0], sb.shape[0]
    i = 0
    j = 0
    d = 0.0
    while i < na and j < nb:
        v = sa[i] if sa[i] < sb[j] else sb[j]
        while i < na and sa[i] == v:
            i += 1
        while j < nb and sb[j] == v:
            j += 1
        gap = abs(i / na - j / nb)
        if gap > d:
            d = gap
    return d


def ks_stat_np(sa, sb):
    pts = np.concatenate([sa, sb])
    fa = np.searchsorted(sa, pts, side="right") / sa.shape[0]
    fb = np.searchsorted(sb, pts, side="right") / sb.shape[0]
    return float(np.max(np.abs(fa - fb)))


ks_stat = pick(ks_stat_nb, ks_stat_np)


# -- t-SNE: input affinities --------------------------------------------------


@njit
def cond_probs_nb(D2, log_perp, tol, max_iter):
    n = D2.shape[0]
    P = np.zeros((n, n))
    row = np.empty(n)
    for i in range(n):
        dmin = np.inf
        for j in range(n):
            if j != i and D2[i, j] < dmin:
                dmin = D2[i, j]
        beta = 1.0
        lo = -np.inf
        hi = np.inf
        for _ in range(max_iter):
            s = 0.0
            sd = 0.0
            for j in range(n):
                if j == i:
                    row[j] = 0.0
                    continue
                e = np.exp(-beta * (D2[i, j] - dmin))
                row[j] = e
                s += e
                sd += (D2[i, j] - dmin) * e
            H = np.log(s) + beta * sd / s
            diff = H - log_perp
            if abs(diff) < tol:
                break
            if diff > 0:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = beta / 2.0 if lo == -np.inf else (beta + lo) / 2.0
        for j in range(n):
            P[i, j] = row[j] / s
    return P


def cond_probs_np(D2, log_perp, tol, max_iter):
    n = D2.shape[0]
    off = ~np.eye(n, dtype=bool)
    dmin = np.where(off, D2, np.inf).min(axis=1)
    Dc = np.where(off, D2 - dmin[:, None], 0.0)
    beta = np.ones(n)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    active = np.ones(n, dtype=bool)
    rows = np.zeros((n, n))
    for _ in range(max_iter):
        if not active.any():
            break
        a = np.flatnonzero(active)
        E = np.exp(-beta[a, None] * Dc[a]) * off[a]
        s = E.sum(axis=1)
        H = np.log(s) + beta[a] * (Dc[a] * E).sum(axis=1) / s
        rows[a] = E / s[:, None]
        diff = H - log_perp
        done = np.abs(diff) < tol
        up = ~done & (diff > 0)
        dn = ~done & (diff <= 0)
        b = beta[a]
        lo_a, hi_a = lo[a], hi[a]
        lo_a = np.where(up, b, lo_a)
        hi_a = np.where(dn, b, hi_a)
        nb = np.where(up, np.where(np.isinf(hi_a), b * 2.0, (b + hi_a) / 2.0), b)
        nb = np.where(dn, np.where(np.isinf(lo_a), b / 2.0, (b + lo_a) / 2.0), nb)
        lo[a], hi[a], beta[a] = lo_a, hi_a, nb
        active[a[done]] = False
    return rows


cond_probs = pick(cond_probs_nb, cond_probs_np)


# -- t-SNE: gradient and KL ---------------------------------------------------


@njit
def tsne_grad_nb(P, Y, exaggeration):
    n = Y.shape[0]
    num = np.empty((n, n))
    z = 0.0
    for i in range(n):
        num[i, i] = 0.0
        for j in range(i + 1, n):
            dx = Y[i, 0] - Y[j, 0]
            dy = Y[i, 1] - Y[j, 1]
            v = 1.0 / (1.0 + dx * dx + dy * dy)
            num[i, j] = v
            num[j, i] = v
            z += 2.0 * v
    grad = np.zeros((n, 2))
    kl = 0.0
    for i in range(n):
        g0 = 0.0
        g1 = 0.0
        for j in range(n):
            if j == i:
                continue
            q = num[i, j] / z
            p = P[i, j]
            kl += p * np.log(p / max(q, 1e-300))
            m = (exaggeration * p - q) * num[i, j]
            g0 += m * (Y[i, 0] - Y[j, 0])
            g1 += m * (Y[i, 1] - Y[j, 1])
        grad[i, 0] = 4.0 * g0
        grad[i, 1] = 4.0 * g1
    return grad, kl


def tsne_grad_np(P, Y, exaggeration):
    sq = np.sum(Y * Y, axis=1)
    D = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (Y @ Y.T), 0.0)
    num = 1.0 / (1.0 + D)
    np.fill_diagonal(num, 0.0)
    Q = num / num.sum()
    off = ~np.eye(len(Y), dtype=bool)
    kl = float(np.sum(P[off] * np.log(P[off] / np.maximum(Q[off], 1e-300))))
    M = (exaggeration * P - Q) * num
    grad = 4.0 * (M.sum(axis=1)[:, None] * Y - M @ Y)
    return grad, kl


tsne_grad = pick(tsne_grad_nb, tsne_grad_np)
