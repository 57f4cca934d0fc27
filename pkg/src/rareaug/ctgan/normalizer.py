"""Mode-specific normalisation of continuous columns.

Each column gets a univariate Gaussian mixture; a value is represented by
the mode it belongs to and its offset inside that mode, scaled to roughly
[-1, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .._jit import njit, pick
from ..errors import DomainError

STD_FLOOR = 1e-4
PRUNE_WEIGHT = 0.01
MIN_VALUES = 10
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class GmmNormalizer:
    means: np.ndarray
    stds: np.ndarray
    weights: np.ndarray
    log_likelihood: list = field(default_factory=list)  # per EM iteration of the chosen fit
    n_candidates: int = 1

    @property
    def n_modes(self):
        return len(self.means)

    def responsibilities(self, v):
        v = np.asarray(v, dtype=np.float64)[:, None]
        logp = (np.log(self.weights) - np.log(self.stds) - 0.5 * _LOG_2PI
                - 0.5 * ((v - self.means) / self.stds) ** 2)
        logp -= logp.max(axis=1, keepdims=True)
        r = np.exp(logp)
        return r / r.sum(axis=1, keepdims=True)

    def to_dict(self):
        return {"means": self.means.tolist(), "stds": self.stds.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["means"], float), np.asarray(d["stds"], float), np.asarray(d["weights"], float))


# -- EM kernels ---------------------------------------------------------------


@njit
def _em_nb(x, means, stds, weights, iters, floor):
    n = x.shape[0]
    k = means.shape[0]
    mu = means.copy()
    sd = stds.copy()
    w = weights.copy()
    ll_hist = np.empty(iters + 1)
    r = np.empty((n, k))
    logp = np.empty(k)
    const = np.empty(k)
    inv = np.empty(k)
    count = 0
    prev = -np.inf
    for it in range(iters + 1):
        ll = 0.0
        for c in range(k):
            const[c] = np.log(w[c]) - np.log(sd[c]) - 0.9189385332046727
            inv[c] = 1.0 / sd[c]
        for i in range(n):
            m = -np.inf
            for c in range(k):
                z = (x[i] - mu[c]) * inv[c]
                logp[c] = const[c] - 0.5 * z * z
                if logp[c] > m:
                    m = logp[c]
            s = 0.0
            for c in range(k):
                e = np.exp(logp[c] - m)
                r[i, c] = e
                s += e
            for c in range(k):
                r[i, c] /= s
            ll += m + np.log(s)
        ll_hist[count] = ll
        count += 1
        if it == iters or (it > 0 and ll - prev <= 1e-10 * abs(ll)):
            break
        prev = ll
        for c in range(k):
            nk = 0.0
            sx = 0.0
            for i in range(n):
                nk += r[i, c]
                sx += r[i, c] * x[i]
            if nk <= 1e-300:
                continue
            mu_c = sx / nk
            sv = 0.0
            for i in range(n):
                t = x[i] - mu_c
                sv += r[i, c] * t * t
            mu[c] = mu_c
            sd[c] = max(np.sqrt(sv / nk), floor)
            w[c] = nk / n
    return mu, sd, w, ll_hist[:count]


def _em_np(x, means, stds, weights, iters, floor):
    mu, sd, w = means.copy(), stds.copy(), weights.copy()
    hist = []
    prev = -np.inf
    n = x.shape[0]
    for it in range(iters + 1):
        z = (x[:, None] - mu) / sd
        logp = np.log(w) - np.log(sd) - 0.5 * _LOG_2PI - 0.5 * z * z
        m = logp.max(axis=1, keepdims=True)
        e = np.exp(logp - m)
        s = e.sum(axis=1, keepdims=True)
        r = e / s
        ll = float(np.sum(m[:, 0] + np.log(s[:, 0])))
        hist.append(ll)
        if it == iters or (it > 0 and ll - prev <= 1e-10 * abs(ll)):
            break
        prev = ll
        nk = r.sum(axis=0)
        live = nk > 1e-300
        mu_new = np.where(live, (r * x[:, None]).sum(axis=0) / np.where(live, nk, 1.0), mu)
        var = (r * (x[:, None] - mu_new) ** 2).sum(axis=0) / np.where(live, nk, 1.0)
        sd = np.where(live, np.maximum(np.sqrt(var), floor), sd)
        mu = mu_new
        w = np.where(live, nk / n, w)
    return mu, sd, w, np.array(hist)


em_fit = pick(_em_nb, _em_np)


def _init_params(x, k):
    """Means at evenly spaced quantiles; common spread; equal weights."""
    qs = (np.arange(k) + 0.5) / k
    means = np.quantile(x, qs)
    spread = max(float(x.std()) / k, STD_FLOOR)
    return means.astype(np.float64), np.full(k, spread), np.full(k, 1.0 / k)


def fit_normalizer(values, max_modes=5, em_iters=100, seed=0, max_rows=None) -> GmmNormalizer:
    """Gaussian mixture for one continuous column.

    Mixtures with 1..``max_modes`` components are fitted by EM and the one
    with the lowest BIC kept; components lighter than 1% are then dropped
    and the weights renormalised. Initialisation is quantile based and
    deterministic. With ``max_rows`` set, longer columns are fitted on a
    random subsample of that size drawn with ``seed``; otherwise the seed
    has no effect.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if max_rows is not None and x.size > int(max_rows):
        x = x[np.sort(np.random.default_rng(seed).choice(x.size, int(max_rows), replace=False))]
    if x.size < MIN_VALUES:
        raise DomainError(f"need at least {MIN_VALUES} values to fit a mixture, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DomainError("column holds non-finite values")
    if np.ptp(x) == 0.0:
        return GmmNormalizer(np.array([x[0]]), np.array([STD_FLOOR]), np.array([1.0]), [0.0], 1)
    n = x.size
    best = None
    for k in range(1, max_modes + 1):
        if len(np.unique(x)) < k:
            break
        mu, sd, w, hist = em_fit(x, *_init_params(x, k), int(em_iters), STD_FLOOR)
        bic = -2.0 * hist[-1] + (3 * k - 1) * math.log(n)
        if best is None or bic < best[0]:
            best = (bic, mu, sd, w, hist)
    _, mu, sd, w, hist = best
    keep = w >= PRUNE_WEIGHT
    mu, sd, w = mu[keep], sd[keep], w[keep]
    order = np.argsort(mu, kind="stable")
    return GmmNormalizer(mu[order], sd[order], w[order] / w.sum(), [float(v) for v in hist], max_modes)
