"""Exact t-SNE for the class-overlap diagnostic plot.

O(n^2) per iteration, so inputs above ``max_points`` rows are subsampled
with the given seed first.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
from . import _kernels as K

EXAGGERATION = 12.0
EXAGGERATION_ITERS = 100
ENTROPY_TOL = 1e-5
P_FLOOR = 1e-12


@dataclass
class Embedding2D:
    coords: np.ndarray
    kl: float
    kl_history: list = field(default_factory=list)
    indices: np.ndarray | None = None  # rows of the input that were embedded
    exaggeration_iters: int = EXAGGERATION_ITERS


def joint_probabilities(X, perplexity):
    """Symmetrised input affinities ``(P + P^T) / 2n`` with every row's
    bandwidth set so its conditional distribution hits ``perplexity``."""
    X = np.asarray(X, dtype=np.float64)
    sq = np.sum(X * X, axis=1)
    D2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (X @ X.T), 0.0)
    np.fill_diagonal(D2, 0.0)
    P = K.cond_probs(np.ascontiguousarray(D2), math.log(perplexity), ENTROPY_TOL, 200)
    P = (P + P.T) / (2.0 * X.shape[0])
    P = np.maximum(P, P_FLOOR)
    np.fill_diagonal(P, 0.0)
    return P


def tsne(data, perplexity=30.0, iterations=500, seed=0, max_points=2000, learning_rate=None) -> Embedding2D:
    """Embed ``data`` in two dimensions.

    The first ``min(100, iterations)`` steps use early exaggeration (x12)
    and momentum 0.5 with per-coordinate gains. Afterwards each momentum
    step is only accepted if it does not raise the KL divergence; rejected
    steps drop the velocity and halve the step size, so the logged KL is
    non-increasing from then on.
    """
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError("t-SNE expects a 2-D matrix")
    rng = np.random.default_rng(seed)
    idx = np.arange(X.shape[0])
    if X.shape[0] > max_points:
        idx = np.sort(rng.choice(X.shape[0], size=max_points, replace=False))
        X = X[idx]
    n = X.shape[0]
    if n < 3:
        raise ConfigError("t-SNE needs at least 3 rows")
    if not (1.0 <= perplexity <= n - 1):
        raise ConfigError(f"perplexity {perplexity} infeasible for {n} rows")
    if perplexity >= n / 3:
        warnings.warn(f"perplexity {perplexity} is large for {n} rows", stacklevel=2)

    P = joint_probabilities(X, perplexity)
    lr = learning_rate or max(n / EXAGGERATION / 4.0, 50.0)
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    vel = np.zeros_like(Y)
    gains = np.ones_like(Y)
    n_exag = min(EXAGGERATION_ITERS, iterations)
    history = []

    for _ in range(n_exag):
        grad, kl = K.tsne_grad(P, Y, EXAGGERATION)
        # kl above is measured against the unexaggerated P
        history.append(kl)
        same = np.sign(grad) == np.sign(vel)
        gains = np.where(same, gains * 0.8, gains + 0.2).clip(0.01)
        vel = 0.5 * vel - lr * gains * grad
        Y = Y + vel
        Y -= Y.mean(axis=0)

    grad, kl = K.tsne_grad(P, Y, 1.0)
    step = lr
    for _ in range(iterations - n_exag):
        for _attempt in range(30):
            cand_vel = 0.8 * vel - step * grad
            Yc = Y + cand_vel
            Yc -= Yc.mean(axis=0)
            g_new, kl_new = K.tsne_grad(P, Yc, 1.0)
            if kl_new <= kl:
                Y, vel, grad, kl = Yc, cand_vel, g_new, kl_new
                step = min(step * 1.1, lr)
                break
            vel = np.zeros_like(vel)
            step *= 0.5
        history.append(kl)
    return Embedding2D(Y, float(kl), history, idx, n_exag)
