"""L1-penalised logistic regression for feature screening."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..classifiers.logistic import OneHotLayout, sigmoid
from ..data import CATEGORICAL, TabularDataset
from ..errors import ConfigError, DomainError

GRID_SIZE = 10
GRID_SPAN = 1e-3  # smallest grid value relative to lambda_max
CV_FOLDS = 5


@dataclass
class LassoConfig:
    lam: float = 0.01
    epochs: int = 5000
    step_size: float | None = None  # None: 1/L from the data
    tolerance: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ConfigError("lam must be a finite non-negative number")
        if int(self.epochs) < 1:
            raise ConfigError("epochs must be at least 1")
        if self.step_size is not None and not self.step_size > 0:
            raise ConfigError("step_size must be positive")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")


@dataclass
class FeatureSelection:
    """``coefficients`` live in the one-hot expanded space named by
    ``coefficient_names``; ``selected`` lists source features with any
    nonzero coefficient, strongest first."""

    coefficients: np.ndarray
    coefficient_names: list
    selected: list
    bias: float
    lam: float
    converged: bool
    n_iter: int
    feature_strength: dict = field(default_factory=dict)
    cv: dict | None = None

    def to_dict(self):
        return {
            "lambda": self.lam,
            "bias": self.bias,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "selected": list(self.selected),
            "coefficients": dict(zip(self.coefficient_names, self.coefficients.tolist())),
            "cv": self.cv,
        }


def soft_threshold(z, t):
    """Proximal map of ``t * |.|``."""
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _expanded(train: TabularDataset):
    layout = OneHotLayout.from_dataset(train)
    names, owner = [], []
    for j, col in enumerate(train.feature_columns):
        if col.kind.kind == CATEGORICAL:
            for c in range(col.kind.cardinality):
                names.append(f"{col.name}={c}")
                owner.append(j)
        else:
            names.append(col.name)
            owner.append(j)
    return layout.expand(train.X), names, np.array(owner, dtype=np.int64)


def _check_classes(y):
    if y.size == 0 or y.min() == y.max():
        raise DomainError("lasso needs rows of both classes")


def lipschitz_step(Z):
    """1/L for the mean logistic loss, bias included: L = s_max([Z 1])^2 / (4n)."""
    A = np.hstack([Z, np.ones((Z.shape[0], 1))])
    s = np.linalg.norm(A, 2)
    return 4.0 * Z.shape[0] / max(s * s, 1e-300)


def _fista(Z, y, lam, step, epochs, tol, w0=None, b0=0.0):
    """Accelerated proximal gradient with gradient-based restarts.

    Stops once no coefficient (bias included) moves by more than ``tol``
    in an iteration.
    """
    n, p = Z.shape
    w = np.zeros(p) if w0 is None else w0.copy()
    b = float(b0)
    vw, vb = w.copy(), b
    t = 1.0
    converged = False
    it = 0
    for it in range(1, int(epochs) + 1):
        r = sigmoid(Z @ vw + vb) - y
        gw = Z.T @ r / n
        gb = float(np.mean(r))
        w_new = soft_threshold(vw - step * gw, step * lam)
        b_new = vb - step * gb
        dw = w_new - w
        db = b_new - b
        change = max(float(np.max(np.abs(dw))) if p else 0.0, abs(db))
        # restart momentum when it points uphill
        if float(np.dot(vw - w_new, dw)) + (vb - b_new) * db > 0.0:
            t = 1.0
            vw, vb = w_new.copy(), b_new
        else:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_new
            vw = w_new + beta * dw
            vb = b_new + beta * db
            t = t_new
        w, b = w_new, b_new
        if change < tol:
            converged = True
            break
    return w, b, converged, it


def _selection(w, b, names, owner, feature_names, lam, converged, it, cv=None):
    strength = {}
    for k, j in enumerate(owner):
        if w[k] != 0.0:
            name = feature_names[j]
            strength[name] = max(strength.get(name, 0.0), abs(float(w[k])))
    order = sorted(strength, key=lambda nm: (-strength[nm], feature_names.index(nm)))
    return FeatureSelection(w, names, order, float(b), float(lam), converged, it, strength, cv)


def fit_lasso_logistic(train: TabularDataset, cfg: LassoConfig | None = None, warm_start=None) -> FeatureSelection:
    """Minimise mean log-loss + ``lam * sum|w_j|`` with an unpenalised
    bias. Expects scaled continuous features. Running out of epochs is
    reported through ``converged`` rather than raised."""
    cfg = cfg or LassoConfig()
    Z, names, owner = _expanded(train)
    y = train.y.astype(np.float64)
    _check_classes(y)
    step = cfg.step_size or lipschitz_step(Z)
    w0, b0 = (None, 0.0) if warm_start is None else (warm_start.coefficients, warm_start.bias)
    w, b, conv, it = _fista(Z, y, cfg.lam, step, cfg.epochs, cfg.tolerance, w0, b0)
    return _selection(w, b, names, owner, train.feature_names, cfg.lam, conv, it)


def lambda_max(train: TabularDataset):
    """Smallest penalty at which every coefficient is zero."""
    Z, _, _ = _expanded(train)
    y = train.y.astype(np.float64)
    _check_classes(y)
    return float(np.max(np.abs(Z.T @ (y - y.mean())))) / len(y)


def lambda_grid(train: TabularDataset, size=GRID_SIZE, span=GRID_SPAN):
    """Log-spaced grid from ``lambda_max`` down to ``span * lambda_max``,
    largest first."""
    top = lambda_max(train)
    return np.geomspace(top, top * span, int(size))


def _folds(y, k, seed):
    """Stratified fold ids."""
    rng = np.random.default_rng(seed)
    fold = np.empty(len(y), dtype=np.int64)
    for c in (0, 1):
        idx = np.flatnonzero(y == c)
        rng.shuffle(idx)
        fold[idx] = np.arange(len(idx)) % k
    return fold


def select_lambda(train: TabularDataset, cfg: LassoConfig | None = None, grid=None, folds=CV_FOLDS):
    """Cross-validated penalty choice.

    Each grid value is scored by the mean class-1 recall over stratified
    folds (threshold 0.5). Ties go to the lower mean validation log-loss.
    Returns ``(best_lambda, table)`` with one row per grid value.
    """
    cfg = cfg or LassoConfig()
    grid = lambda_grid(train) if grid is None else np.sort(np.asarray(grid, float))[::-1]
    Z, _, _ = _expanded(train)
    y = train.y.astype(np.float64)
    _check_classes(y)
    fold = _folds(train.y, folds, cfg.seed)
    recall = np.zeros((len(grid), folds))
    loss = np.zeros((len(grid), folds))
    for f in range(folds):
        tr, va = fold != f, fold == f
        Zt, yt = Z[tr], y[tr]
        step = cfg.step_size or lipschitz_step(Zt)
        w, b = None, 0.0
        for g, lam in enumerate(grid):
            # warm start along the decreasing path
            w, b, _, _ = _fista(Zt, yt, lam, step, cfg.epochs, cfg.tolerance, w, b)
            s = Z[va] @ w + b
            pos = y[va] == 1
            recall[g, f] = float(np.mean(sigmoid(s[pos]) > 0.5)) if pos.any() else 0.0
            loss[g, f] = float(np.mean(np.logaddexp(0.0, s) - y[va] * s))
    mr, ml = recall.mean(axis=1), loss.mean(axis=1)
    best = min(range(len(grid)), key=lambda g: (-mr[g], ml[g]))
    table = [{"lambda": float(l), "recall_class1": float(r), "log_loss": float(q)} for l, r, q in zip(grid, mr, ml)]
    return float(grid[best]), table


def lasso_path(train: TabularDataset, grid, cfg: LassoConfig | None = None):
    """Warm-started fits along ``grid`` (largest penalty first)."""
    cfg = cfg or LassoConfig()
    out = []
    prev = None
    for lam in sorted((float(v) for v in grid), reverse=True):
        c = LassoConfig(lam, cfg.epochs, cfg.step_size, cfg.tolerance, cfg.seed)
        prev = fit_lasso_logistic(train, c, warm_start=prev)
        out.append(prev)
    return out


def tuned_lasso(train: TabularDataset, cfg: LassoConfig | None = None, grid=None, folds=CV_FOLDS) -> FeatureSelection:
    cfg = cfg or LassoConfig()
    lam, table = select_lambda(train, cfg, grid, folds)
    sel = fit_lasso_logistic(train, LassoConfig(lam, cfg.epochs, cfg.step_size, cfg.tolerance, cfg.seed))
    sel.cv = {"folds": folds, "grid": table, "chosen": lam}
    return sel
