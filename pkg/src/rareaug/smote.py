"""SMOTE oversampling with per-row provenance.

Every synthetic row records the base and neighbor it was interpolated
between and the interpolation weight, so the batch can be audited (and
rebuilt) after the fact.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._jit import njit, pick
from .data import BINARY, CATEGORICAL, CONTINUOUS, TabularDataset, write_csv
from .errors import ConfigError, InsufficientMinorityError, ShapeError

SMOTE = "smote"
CTGAN = "ctgan"

COPY_FROM_BASE = "copy_from_base"
NEIGHBOR_VOTE = "neighbor_vote"
CATEGORICAL_POLICIES = (COPY_FROM_BASE, NEIGHBOR_VOTE)

# minority:majority ratio the pipeline restores before retraining
TARGET_RATIO = 0.403


@dataclass
class SmoteConfig:
    n_samples: int = 1
    k: int = 5
    seed: int = 0
    categorical_policy: str = COPY_FROM_BASE

    def __post_init__(self):
        if int(self.k) < 1:
            raise ConfigError("k must be at least 1")
        if int(self.n_samples) < 1:
            raise ConfigError("n_samples must be positive")
        if self.categorical_policy not in CATEGORICAL_POLICIES:
            raise ConfigError(f"categorical_policy must be one of {CATEGORICAL_POLICIES}")


class SyntheticBatch:
    """Generated minority rows plus where they came from.

    ``base_index`` / ``neighbor_index`` index the minority rows handed to
    the generator (``-1`` when not applicable) and ``lam`` is the
    interpolation weight (NaN for GAN rows). ``source_ids`` maps those
    indices back to dataset row ids when the caller supplies them.
    """

    def __init__(self, X, y, technique, seed, base_index=None, neighbor_index=None, lam=None,
                 source_ids=None, extra=None):
        self.X = np.asarray(X, dtype=np.float64)
        n = self.X.shape[0]
        self.y = np.asarray(y, dtype=np.int64).reshape(n)
        self.technique = technique
        self.seed = int(seed)
        self.base_index = np.full(n, -1, np.int64) if base_index is None else np.asarray(base_index, np.int64)
        self.neighbor_index = (np.full(n, -1, np.int64) if neighbor_index is None
                               else np.asarray(neighbor_index, np.int64))
        self.lam = np.full(n, np.nan) if lam is None else np.asarray(lam, np.float64)
        self.source_ids = None if source_ids is None else np.asarray(source_ids, np.int64)
        self.extra = dict(extra or {})

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_rows(self):
        return len(self)

    def provenance(self):
        out = []
        for i in range(len(self)):
            rec = {"technique": self.technique, "seed": self.seed}
            if self.base_index[i] >= 0:
                rec["base_index"] = int(self.base_index[i])
                rec["neighbor_index"] = int(self.neighbor_index[i])
                rec["lambda"] = float(self.lam[i])
            out.append(rec)
        return out

    def to_dataset(self, columns) -> TabularDataset:
        return TabularDataset(columns, self.X, self.y, np.full(len(self), -1, np.int64))

    def provenance_dict(self):
        doc = {"technique": self.technique, "seed": self.seed, "n_rows": len(self), **self.extra}
        if self.source_ids is not None:
            doc["source_row_ids"] = self.source_ids.tolist()
        doc["records"] = self.provenance()
        return doc

    def write(self, columns, csv_path, provenance_path=None):
        write_csv(self.to_dataset(columns), csv_path)
        if provenance_path is not None:
            with open(provenance_path, "w", encoding="utf-8") as fh:
                json.dump(self.provenance_dict(), fh, indent=1)


def target_count(n_minority, n_majority, ratio=TARGET_RATIO):
    """Synthetic rows needed so that minority / majority reaches ``ratio``.

    The minority total is ``floor(ratio * majority)``; the ratio can only
    be approached from below with whole rows.
    """
    if ratio <= 0:
        raise ConfigError("ratio must be positive")
    return max(0, int(math.floor(ratio * n_majority + 1e-9)) - int(n_minority))


# -- nearest neighbours -----------------------------------------------------


@njit
def _knn_nb(Z, k):
    m, d = Z.shape
    out = np.empty((m, k), np.int64)
    best_d = np.empty(k)
    best_i = np.empty(k, np.int64)
    for i in range(m):
        filled = 0
        for j in range(m):
            if j == i:
                continue
            s = 0.0
            for c in range(d):
                t = Z[i, c] - Z[j, c]
                s += t * t
            # insertion into a sorted list; equal distances keep index order
            if filled < k:
                pos = filled
                filled += 1
            elif s < best_d[k - 1]:
                pos = k - 1
            else:
                continue
            while pos > 0 and best_d[pos - 1] > s:
                best_d[pos] = best_d[pos - 1]
                best_i[pos] = best_i[pos - 1]
                pos -= 1
            best_d[pos] = s
            best_i[pos] = j
        for t in range(k):
            out[i, t] = best_i[t]
    return out


def _knn_np(Z, k):
    m = Z.shape[0]
    diff = Z[:, None, :] - Z[None, :, :]
    D = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(D, np.inf)
    order = np.argsort(D, axis=1, kind="stable")
    return np.ascontiguousarray(order[:, :k]).astype(np.int64) if m > 1 else np.empty((m, k), np.int64)


_knn = pick(_knn_nb, _knn_np)


def nearest_neighbors(Z, k):
    """Indices of the ``k`` nearest other rows of ``Z`` (squared Euclidean),
    closest first, equal distances resolved by lower index."""
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    if Z.ndim != 2:
        raise ShapeError("expected a 2-D matrix")
    if not 1 <= k < Z.shape[0]:
        raise ConfigError(f"k must lie in [1, {Z.shape[0] - 1}]")
    return _knn(Z, int(k))


# -- generation -------------------------------------------------------------


def _kinds_of(schema, p):
    if schema is None:
        return [CONTINUOUS] * p
    kinds = []
    for item in schema:
        kind = getattr(item, "kind", item)
        kinds.append(getattr(kind, "kind", kind))
    if len(kinds) != p:
        raise ShapeError(f"schema describes {len(kinds)} features, rows have {p}")
    return kinds


def _allocate(m, n, rng):
    """Samples per base: ``n // m`` each, the remainder spread over a random
    subset of bases so every base is equally likely to get an extra row."""
    counts = np.full(m, n // m, np.int64)
    extra = n - counts.sum()
    if extra:
        counts[np.sort(rng.choice(m, size=extra, replace=False))] += 1
    return counts


def generate_smote(minority_rows, schema, cfg: SmoteConfig, minority_label=1, source_ids=None) -> SyntheticBatch:
    """Interpolate ``cfg.n_samples`` synthetic rows between minority rows
    and their nearest minority neighbours.

    Parameters
    ----------
    minority_rows : (m, p) array
        Minority-class feature rows, already scaled.
    schema : sequence of ColumnSchema or FeatureKind, optional
        Feature kinds; categorical columns are left out of the distance and
        filled by ``cfg.categorical_policy`` instead of interpolated.
    cfg : SmoteConfig

    Returns
    -------
    SyntheticBatch
        Rows ordered by base index, then by sample index within a base.
    """
    R = np.ascontiguousarray(minority_rows, dtype=np.float64)
    if R.ndim != 2:
        raise ShapeError("minority_rows must be a 2-D matrix")
    m, p = R.shape
    if m < 2:
        raise InsufficientMinorityError(f"SMOTE needs at least 2 minority rows, got {m}")
    kinds = _kinds_of(schema, p)
    k = int(cfg.k)
    if k > m - 1:
        warnings.warn(f"k={k} exceeds the {m - 1} available neighbours; using k={m - 1}", stacklevel=2)
        k = m - 1
    cat = np.array([kd == CATEGORICAL for kd in kinds])
    binary = np.array([kd == BINARY for kd in kinds])
    metric_cols = ~cat
    nbrs = nearest_neighbors(R[:, metric_cols], k) if metric_cols.any() else _all_others(m, k)

    rng = np.random.default_rng(cfg.seed)
    counts = _allocate(m, int(cfg.n_samples), rng)
    base = np.repeat(np.arange(m), counts)
    n = len(base)
    pick_ = rng.integers(0, k, size=n)
    lam = rng.random(n)
    nbr = nbrs[base, pick_]

    B, N = R[base], R[nbr]
    X = B + lam[:, None] * (N - B)
    if binary.any():
        X[:, binary] = np.floor(X[:, binary] + 0.5)
    if cat.any():
        if cfg.categorical_policy == COPY_FROM_BASE:
            X[:, cat] = B[:, cat]
        else:
            X[:, cat] = _vote(R[:, cat], nbrs)[base]
    return SyntheticBatch(X, np.full(n, minority_label), SMOTE, cfg.seed, base, nbr, lam,
                          source_ids=source_ids, extra={"k": k, "categorical_policy": cfg.categorical_policy})


def _all_others(m, k):
    idx = np.arange(m)
    return np.stack([np.concatenate([idx[:i], idx[i + 1:]])[:k] for i in range(m)])


def _vote(C, nbrs):
    """Most common code among each row's neighbours (lowest code on ties)."""
    out = np.empty((nbrs.shape[0], C.shape[1]))
    for j in range(C.shape[1]):
        codes = C[:, j].astype(np.int64)
        votes = codes[nbrs]
        width = int(codes.max()) + 1
        tallies = np.stack([np.bincount(v, minlength=width) for v in votes])
        out[:, j] = np.argmax(tallies, axis=1)
    return out


def smote_augment(train: TabularDataset, cfg: SmoteConfig, minority_label=1):
    """Oversample the minority class of ``train``; returns the batch and the
    augmented dataset (original rows first)."""
    idx = np.flatnonzero(train.y == minority_label)
    batch = generate_smote(train.X[idx], train.feature_columns, cfg, minority_label, train.row_ids[idx])
    return batch, train.append(batch.X, batch.y)


def reconstruct(batch: SyntheticBatch, minority_rows):
    """Rebuild the interpolated rows from provenance alone."""
    R = np.asarray(minority_rows, dtype=np.float64)
    B, N = R[batch.base_index], R[batch.neighbor_index]
    return B + batch.lam[:, None] * (N - B)
