"""Logistic regression trained by full-batch gradient descent."""

from __future__ import annotations

import math

import numpy as np

from ..data import CATEGORICAL, TabularDataset
from ..errors import DomainError, NumericalError, ShapeError
from .tree import TrainConfig


def sigmoid(x):
    """Logistic function, evaluated on the sign-appropriate branch so
    neither ``exp`` call can overflow."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


class OneHotLayout:
    """Expands categorical code columns into indicator blocks; other
    columns pass through in place."""

    def __init__(self, cardinalities):
        # 0 for pass-through columns, k for a k-level categorical
        self.cardinalities = [int(c) for c in cardinalities]
        self.width = sum(c if c else 1 for c in self.cardinalities)

    @classmethod
    def from_dataset(cls, ds: TabularDataset):
        return cls([k.cardinality if k.kind == CATEGORICAL else 0 for k in ds.kinds])

    @property
    def n_raw(self):
        return len(self.cardinalities)

    def expand(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_raw:
            raise ShapeError(f"expected rows of width {self.n_raw}, got shape {X.shape}")
        if not any(self.cardinalities):
            return X
        blocks = []
        for j, k in enumerate(self.cardinalities):
            col = X[:, j]
            if k:
                blocks.append((col[:, None].astype(np.int64) == np.arange(k)).astype(np.float64))
            else:
                blocks.append(col[:, None])
        return np.hstack(blocks)


class LogisticModel:
    kind = "lr"

    def __init__(self, weights, bias, layout: OneHotLayout, threshold=0.5, grad_max_norm=None, n_iter=0, loss_history=None):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = float(bias)
        self.layout = layout
        self.threshold = float(threshold)
        self.grad_max_norm = grad_max_norm
        self.n_iter = n_iter
        self.loss_history = loss_history if loss_history is not None else []

    @property
    def n_features(self):
        return self.layout.n_raw

    @property
    def stochastic(self):
        return False

    def decision_function(self, X):
        return self.layout.expand(X) @ self.weights + self.bias

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))

    def predict(self, X):
        return (self.predict_proba(X) > self.threshold).astype(np.int64)

    def to_dict(self):
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "threshold": self.threshold,
            "cardinalities": self.layout.cardinalities,
            "grad_max_norm": self.grad_max_norm,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["weights"], d["bias"], OneHotLayout(d["cardinalities"]), d.get("threshold", 0.5),
                   d.get("grad_max_norm"), d.get("n_iter", 0))


def logistic_loss(Z, y, w, b, l2=0.0):
    """Mean negative log-likelihood plus ``l2/2 * ||w||^2``."""
    s = Z @ w + b
    return float(np.mean(np.logaddexp(0.0, s) - y * s) + 0.5 * l2 * np.dot(w, w))


def logistic_grad(Z, y, w, b, l2=0.0):
    r = sigmoid(Z @ w + b) - y
    return Z.T @ r / len(y) + l2 * w, float(np.mean(r))


def fit_logistic(train: TabularDataset, cfg: TrainConfig | None = None) -> LogisticModel:
    """Zero-initialised full-batch gradient descent on the L2-regularised
    log-loss. Expects scaled continuous features."""
    cfg = cfg or TrainConfig()
    n0, n1 = train.class_counts()
    if n0 == 0 or n1 == 0:
        raise DomainError("logistic regression needs rows of both classes")
    layout = OneHotLayout.from_dataset(train)
    Z = layout.expand(train.X)
    y = train.y.astype(np.float64)
    w = np.zeros(Z.shape[1])
    b = 0.0
    lr = cfg.learning_rate
    reg = cfg.l2
    losses = []
    it = 0
    while True:
        s = Z @ w + b
        loss = float(np.mean(np.logaddexp(0.0, s) - y * s) + 0.5 * reg * np.dot(w, w))
        if not math.isfinite(loss):
            raise NumericalError(f"logistic loss became {loss} at epoch {it}; lower learning_rate")
        losses.append(loss)
        r = sigmoid(s) - y
        gw = Z.T @ r / len(y) + reg * w
        gb = float(np.mean(r))
        gmax = max(float(np.max(np.abs(gw))) if gw.size else 0.0, abs(gb))
        if it == cfg.epochs or (cfg.tol and gmax < cfg.tol):
            break
        w = w - lr * gw
        b = b - lr * gb
        it += 1
    return LogisticModel(w, b, layout, grad_max_norm=gmax, n_iter=it, loss_history=losses)


def predict_proba(model, rows):
    return model.predict_proba(rows)


def predict_label(model, rows):
    return model.predict(rows)
