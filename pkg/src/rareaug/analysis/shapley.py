"""Permutation-sampling Shapley values for any probabilistic classifier."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from ..data import TabularDataset
from ..errors import ConfigError, DomainError, ShapeError

BACKGROUND_SIZE = 100


@dataclass
class Attribution:
    instance_index: int
    phi: np.ndarray
    base_value: float  # mean model output over the background
    model_output: float
    std_error: np.ndarray
    n_permutations: int

    @property
    def residual(self):
        """Local-accuracy gap ``sum(phi) - (f(x) - base)``."""
        return float(self.phi.sum() - (self.model_output - self.base_value))

    def to_dict(self, names=None):
        names = names or [f"f{j}" for j in range(len(self.phi))]
        return {
            "instance_index": self.instance_index,
            "base_value": self.base_value,
            "model_output": self.model_output,
            "n_permutations": self.n_permutations,
            "phi": dict(zip(names, self.phi.tolist())),
            "std_error": dict(zip(names, self.std_error.tolist())),
        }


@dataclass
class GlobalImportance:
    cls: int
    feature_names: list
    values: np.ndarray  # mean |phi| over the class's rows
    n_instances: int

    @property
    def empty(self):
        return self.n_instances == 0

    def ranked(self):
        order = sorted(range(len(self.values)), key=lambda j: (-self.values[j], j))
        return [(self.feature_names[j], float(self.values[j])) for j in order]

    def to_dict(self):
        return {"class": self.cls, "n_instances": self.n_instances, "empty": self.empty,
                "ranking": [{"feature": f, "importance": v} for f, v in self.ranked()]}


def _proba(model, X):
    if callable(model) and not hasattr(model, "predict_proba"):
        return np.asarray(model(X), dtype=np.float64)
    return np.asarray(model.predict_proba(X), dtype=np.float64)


def stratified_background(ds: TabularDataset, size=BACKGROUND_SIZE, seed=0):
    """Row indices: ``size`` rows drawn without replacement, class shares
    kept (largest remainder), at least one row per present class."""
    n = ds.row_count
    if n == 0:
        raise DomainError("cannot draw a background from an empty dataset")
    size = min(int(size), n)
    rng = np.random.default_rng([seed, 7])
    groups = [np.flatnonzero(ds.y == c) for c in (0, 1)]
    exact = np.array([len(g) * size / n for g in groups])
    take = np.floor(exact).astype(int)
    for c in np.argsort(-(exact - take), kind="stable")[: size - take.sum()]:
        take[c] += 1
    for c in (0, 1):
        if len(groups[c]) and take[c] == 0:
            take[c] = 1
            take[1 - c] -= 1
    picked = [rng.choice(g, size=t, replace=False) for g, t in zip(groups, take) if t]
    return np.sort(np.concatenate(picked))


def shapley_attribution(model, instance, background, n_permutations=2000, seed=0, instance_index=-1) -> Attribution:
    """Monte-Carlo Shapley values of ``P(class 1)`` for one row.

    Orderings come in antithetic pairs (an ordering and its reverse), each
    pair sharing one background row, assigned round-robin. Along an
    ordering, features switch from the background row's values to the
    instance's; each switch's change in output is that feature's
    contribution. ``model`` is a fitted classifier or a callable mapping
    rows to probabilities.
    """
    if int(n_permutations) < 2:
        raise ConfigError("n_permutations must be at least 2")
    x = np.asarray(instance, dtype=np.float64).ravel()
    bg = np.asarray(background, dtype=np.float64)
    if bg.ndim != 2 or bg.shape[0] == 0:
        raise DomainError("background must be a non-empty 2-D row sample")
    p = x.size
    if bg.shape[1] != p:
        raise ShapeError(f"background width {bg.shape[1]} differs from instance width {p}")
    n_pairs = int(n_permutations) // 2
    rng = np.random.default_rng(seed)
    perms = np.argsort(rng.random((n_pairs, p)), axis=1)
    perms = np.concatenate([perms, perms[:, ::-1]])
    z_idx = np.tile(np.arange(n_pairs) % bg.shape[0], 2)
    # chain rows: step s has the first s features of the ordering set to x
    m = 2 * n_pairs
    steps = np.arange(p + 1)
    rank = np.empty_like(perms)
    np.put_along_axis(rank, perms, np.arange(p)[None, :].repeat(m, 0), axis=1)
    use_x = rank[:, None, :] < steps[None, :, None]  # (m, p+1, p)
    rows = np.where(use_x, x[None, None, :], bg[z_idx][:, None, :])
    out = _proba(model, rows.reshape(-1, p)).reshape(m, p + 1)
    delta = np.diff(out, axis=1)  # contribution of perms[:, s]
    contrib = np.empty((m, p))
    np.put_along_axis(contrib, perms, delta, axis=1)
    paired = 0.5 * (contrib[:n_pairs] + contrib[n_pairs:])
    phi = paired.mean(axis=0)
    se = paired.std(axis=0, ddof=1) / np.sqrt(n_pairs) if n_pairs > 1 else np.full(p, np.inf)
    base = float(_proba(model, bg).mean())
    fx = float(_proba(model, x[None, :])[0])
    return Attribution(int(instance_index), phi, base, fx, se, m)


def global_importance(model, dataset: TabularDataset, background, n_permutations=200, seed=0, max_per_class=None):
    """Mean |phi| per feature over the rows of each true class.

    Returns ``{0: GlobalImportance, 1: GlobalImportance}``. A class with no
    rows gets zeros and ``empty`` set. ``max_per_class`` caps the rows
    explained per class (taken in order).
    """
    names = dataset.feature_names
    out = {}
    for c in (0, 1):
        idx = np.flatnonzero(dataset.y == c)
        if max_per_class is not None:
            idx = idx[: int(max_per_class)]
        acc = np.zeros(dataset.n_features)
        for i in idx:
            a = shapley_attribution(model, dataset.X[i], background, n_permutations, seed=[seed, int(i)],
                                    instance_index=int(i))
            acc += np.abs(a.phi)
        vals = acc / len(idx) if len(idx) else acc
        out[c] = GlobalImportance(c, list(names), vals, int(len(idx)))
    return out


def write_importance_csv(path, importance):
    g0, g1 = importance[0], importance[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["feature", "class0_importance", "class1_importance"])
        for j, name in enumerate(g0.feature_names):
            w.writerow([name, repr(float(g0.values[j])), repr(float(g1.values[j]))])


def write_importance_json(path, importance):
    doc = {"class0": importance[0].to_dict(), "class1": importance[1].to_dict()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
