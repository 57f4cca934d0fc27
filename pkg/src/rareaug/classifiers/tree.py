"""CART decision tree with Gini impurity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import CATEGORICAL as CAT_KIND, TabularDataset
from ..errors import DomainError, ShapeError
from . import _tree_kernels as K


@dataclass
class TrainConfig:
    max_depth: int = 12
    min_leaf_size: int = 5
    n_trees: int = 100
    features_per_split: int | None = None  # None -> floor(sqrt(p)) for forests
    learning_rate: float = 0.1
    epochs: int = 500
    l2: float = 1e-4
    tol: float = 0.0  # early stop on gradient max-norm; 0 runs every epoch
    seed: int = 0

    def __post_init__(self):
        from ..errors import ConfigError

        for name in ("max_depth", "min_leaf_size", "n_trees", "epochs"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ConfigError("features_per_split must be positive")
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ConfigError("learning_rate must be positive and finite")
        if not (np.isfinite(self.l2) and self.l2 >= 0):
            raise ConfigError("l2 must be finite and non-negative")


def gini(class_counts) -> float:
    """Gini impurity ``1 - sum(p_i^2)`` of a pair of class counts."""
    a, b = (float(c) for c in class_counts)
    if a < 0 or b < 0:
        raise DomainError("class counts must be non-negative")
    if a + b == 0:
        raise DomainError("gini of an empty node is undefined")
    return float(K._gini_np(a, b))


def _feature_layout(ds_or_kinds):
    kinds = ds_or_kinds.kinds if isinstance(ds_or_kinds, TabularDataset) else list(ds_or_kinds)
    is_cat = np.array([k.kind == CAT_KIND for k in kinds], dtype=np.bool_)
    card = np.array([k.cardinality if k.kind == CAT_KIND else 0 for k in kinds], dtype=np.int64)
    return is_cat, card


class TreeModel:
    """Flat-array CART tree. ``predict_proba`` returns the class-1 fraction
    of the leaf; ``predict`` the leaf majority with ties going to class 0."""

    kind = "dt"

    def __init__(self, feature, threshold, node_kind, left, right, count0, count1, n_features, is_cat, card):
        self.feature = np.asarray(feature, np.int64)
        self.threshold = np.asarray(threshold, float)
        self.node_kind = np.asarray(node_kind, np.int64)
        self.left = np.asarray(left, np.int64)
        self.right = np.asarray(right, np.int64)
        self.count0 = np.asarray(count0, np.int64)
        self.count1 = np.asarray(count1, np.int64)
        self.n_features = int(n_features)
        self.is_cat = np.asarray(is_cat, np.bool_)
        self.card = np.asarray(card, np.int64)

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def stochastic(self):
        return False

    def depth(self):
        d = np.zeros(self.n_nodes, np.int64)
        for i in range(self.n_nodes):
            if self.node_kind[i] != K.LEAF:
                d[self.left[i]] = d[i] + 1
                d[self.right[i]] = d[i] + 1
        return int(d.max())

    def _check(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"expected rows of width {self.n_features}, got shape {X.shape}")
        return X

    def apply(self, X):
        X = self._check(X)
        return K.apply_tree(X, self.feature, self.threshold, self.node_kind, self.left, self.right)

    def predict_proba(self, X):
        leaf = self.apply(X)
        c0, c1 = self.count0[leaf], self.count1[leaf]
        return c1 / (c0 + c1)

    def predict(self, X):
        leaf = self.apply(X)
        return (self.count1[leaf] > self.count0[leaf]).astype(np.int64)

    # -- serialisation: nested nodes --------------------------------------
    def _node_dict(self, i):
        if self.node_kind[i] == K.LEAF:
            return {"leaf": [int(self.count0[i]), int(self.count1[i])]}
        split = {"feature": int(self.feature[i])}
        if self.node_kind[i] == K.CATEGORICAL:
            split["category"] = int(self.threshold[i])
        else:
            split["threshold"] = float(self.threshold[i])
        split["counts"] = [int(self.count0[i]), int(self.count1[i])]
        split["left"] = self._node_dict(self.left[i])
        split["right"] = self._node_dict(self.right[i])
        return split

    def to_dict(self):
        return {
            "n_features": self.n_features,
            "categorical": {str(int(j)): int(self.card[j]) for j in np.flatnonzero(self.is_cat)},
            "root": self._node_dict(0),
        }

    @classmethod
    def from_dict(cls, d):
        n_features = int(d["n_features"])
        is_cat = np.zeros(n_features, np.bool_)
        card = np.zeros(n_features, np.int64)
        for j, k in d.get("categorical", {}).items():
            is_cat[int(j)] = True
            card[int(j)] = int(k)
        cols = {k: [] for k in ("feature", "threshold", "kind", "left", "right", "c0", "c1")}

        def add(node):
            i = len(cols["feature"])
            for k in cols:
                cols[k].append(-1 if k in ("feature", "left", "right") else 0)
            if "leaf" in node:
                cols["c0"][i], cols["c1"][i] = node["leaf"]
                cols["kind"][i] = K.LEAF
                return i
            cols["feature"][i] = node["feature"]
            if "category" in node:
                cols["kind"][i], cols["threshold"][i] = K.CATEGORICAL, float(node["category"])
            else:
                cols["kind"][i], cols["threshold"][i] = K.NUMERIC, float(node["threshold"])
            cols["c0"][i], cols["c1"][i] = node["counts"]
            cols["left"][i] = add(node["left"])
            cols["right"][i] = add(node["right"])
            return i

        add(d["root"])
        return cls(cols["feature"], cols["threshold"], cols["kind"], cols["left"], cols["right"],
                   cols["c0"], cols["c1"], n_features, is_cat, card)


def grow(X, y, is_cat, card, cfg: TrainConfig, weights=None, order=None, mtry=None, seed=0) -> TreeModel:
    """Grow one tree. ``weights`` are integer row multiplicities (bootstrap
    counts); ``order`` is ``presort(X)`` when the caller fits many trees."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    p = X.shape[1]
    if weights is None:
        weights = np.ones(len(y), dtype=np.int64)
    if order is None:
        order = K.presort(X)
    mtry = p if mtry is None else int(min(mtry, p))
    arrays = K.build_tree(X, y, np.ascontiguousarray(weights, np.int64), order, is_cat, card,
                          int(cfg.max_depth), int(cfg.min_leaf_size), mtry, np.uint64(seed))
    return TreeModel(*arrays, n_features=p, is_cat=is_cat, card=card)


def fit_tree(train: TabularDataset, cfg: TrainConfig | None = None, feature_subset=None) -> TreeModel:
    """Greedy CART fit on every row of ``train``.

    ``feature_subset`` restricts the candidate features at every node to
    the given column indices (the other columns are never split on).
    """
    cfg = cfg or TrainConfig()
    if train.row_count == 0:
        raise DomainError("cannot fit a tree on an empty dataset")
    is_cat, card = _feature_layout(train)
    X = train.X
    if feature_subset is not None:
        keep = np.zeros(train.n_features, bool)
        keep[list(feature_subset)] = True
        # hide excluded columns by making them constant
        X = np.where(keep, X, 0.0)
    return grow(X, train.y, is_cat, card, cfg, seed=cfg.seed)
