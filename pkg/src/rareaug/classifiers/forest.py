"""Bagged random forest over CART trees with per-node feature sampling."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..data import TabularDataset
from ..errors import DomainError, ShapeError
from ._tree_kernels import presort
from .tree import TrainConfig, TreeModel, _feature_layout, grow

BOOTSTRAP_FRACTION = 2.0 / 3.0


def tree_seed(master_seed, index):
    """64-bit seed for tree ``index``; independent of training order."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


class ForestModel:
    """Majority vote over trees; exact ties go to class 0.

    ``predict_proba`` is the fraction of trees voting for class 1, so
    ``predict`` is ``predict_proba > 0.5``.
    """

    kind = "rf"

    def __init__(self, trees, features_per_split, tree_seeds, bootstrap_fraction=BOOTSTRAP_FRACTION):
        self.trees = list(trees)
        self.features_per_split = int(features_per_split)
        self.tree_seeds = [int(s) for s in tree_seeds]
        self.bootstrap_fraction = float(bootstrap_fraction)

    @property
    def n_features(self):
        return self.trees[0].n_features

    @property
    def stochastic(self):
        return True

    def votes(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"expected rows of width {self.n_features}, got shape {X.shape}")
        return np.stack([t.predict(X) for t in self.trees])

    def predict_proba(self, X):
        return self.votes(X).mean(axis=0)

    def predict(self, X):
        v = self.votes(X)
        return (2 * v.sum(axis=0) > len(self.trees)).astype(np.int64)

    def to_dict(self):
        return {
            "features_per_split": self.features_per_split,
            "bootstrap_fraction": self.bootstrap_fraction,
            "tree_seeds": [str(s) for s in self.tree_seeds],
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            [TreeModel.from_dict(t) for t in d["trees"]],
            d["features_per_split"],
            [int(s) for s in d["tree_seeds"]],
            d.get("bootstrap_fraction", BOOTSTRAP_FRACTION),
        )


def bootstrap_counts(n, n_boot, seed):
    rng = np.random.default_rng(seed)
    return np.bincount(rng.integers(0, n, size=n_boot), minlength=n).astype(np.int64)


def _fit_one(X, y, order, is_cat, card, cfg, mtry, seed, n_boot):
    w = bootstrap_counts(len(y), n_boot, seed)
    return grow(X, y, is_cat, card, cfg, weights=w, order=order, mtry=mtry, seed=seed)


def fit_forest(train: TabularDataset, cfg: TrainConfig | None = None, n_jobs=1) -> ForestModel:
    """Train ``cfg.n_trees`` trees on bootstrap samples of ``round(2n/3)`` rows.

    Tree ``i`` draws its bootstrap rows and node feature subsets from
    ``tree_seed(cfg.seed, i)``, so ``n_jobs > 1`` gives the same model as a
    serial fit.
    """
    cfg = cfg or TrainConfig()
    n = train.row_count
    if n == 0:
        raise DomainError("cannot fit a forest on an empty dataset")
    p = train.n_features
    mtry = cfg.features_per_split or max(1, int(math.floor(math.sqrt(p))))
    n_boot = max(1, int(round(BOOTSTRAP_FRACTION * n)))
    is_cat, card = _feature_layout(train)
    X = np.ascontiguousarray(train.X)
    y = np.ascontiguousarray(train.y)
    order = presort(X)
    seeds = [tree_seed(cfg.seed, i) for i in range(cfg.n_trees)]
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(lambda s: _fit_one(X, y, order, is_cat, card, cfg, mtry, s, n_boot), seeds))
    else:
        trees = [_fit_one(X, y, order, is_cat, card, cfg, mtry, s, n_boot) for s in seeds]
    return ForestModel(trees, mtry, seeds)


def forest_predict(model: ForestModel, rows):
    return model.predict(rows)
