"""Tabular dataset container, CSV ingestion, splitting, scaling and a
synthetic rare-event benchmark."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, IoError, ParseError, SchemaError

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
BINARY = "binary"

FEATURE = "feature"
LABEL = "label"

DEFAULT_LABEL = "y"
CATEGORICAL_MAX = 32
STD_FLOOR = 1e-12


@dataclass(frozen=True)
class FeatureKind:
    kind: str
    cardinality: int | None = None
    # raw values for each code when the file stores non-contiguous integers
    levels: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, CATEGORICAL, BINARY):
            raise SchemaError(f"unknown feature kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if self.cardinality is None or self.cardinality < 2:
                raise SchemaError("categorical cardinality must be >= 2")
            if self.levels is not None and len(self.levels) != self.cardinality:
                raise SchemaError("levels must have one entry per category")

    @classmethod
    def continuous(cls):
        return cls(CONTINUOUS)

    @classmethod
    def binary(cls):
        return cls(BINARY)

    @classmethod
    def categorical(cls, cardinality, levels=None):
        return cls(CATEGORICAL, int(cardinality), tuple(levels) if levels is not None else None)

    @property
    def is_discrete(self):
        return self.kind != CONTINUOUS

    @property
    def n_categories(self):
        """Number of one-hot slots the column needs (2 for binary)."""
        if self.kind == BINARY:
            return 2
        if self.kind == CATEGORICAL:
            return self.cardinality
        return 0


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: FeatureKind
    role: str = FEATURE

    def to_dict(self):
        out = {"kind": self.kind.kind, "role": self.role}
        if self.kind.kind == CATEGORICAL:
            out["cardinality"] = self.kind.cardinality
            if self.kind.levels is not None:
                out["levels"] = list(self.kind.levels)
        return out

    @classmethod
    def from_dict(cls, name, d):
        extra = set(d) - {"kind", "cardinality", "role", "levels"}
        if extra:
            raise SchemaError(f"unknown schema keys for {name!r}: {sorted(extra)}")
        kind = d.get("kind")
        if kind == CATEGORICAL:
            fk = FeatureKind.categorical(d.get("cardinality", 0) or 0, d.get("levels"))
        else:
            fk = FeatureKind(kind)
        return cls(name, fk, d.get("role", FEATURE))


def validate_schema(columns: Sequence[ColumnSchema]):
    names = [c.name for c in columns]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise SchemaError(f"duplicate column names: {dup}")
    labels = [c for c in columns if c.role == LABEL]
    if len(labels) != 1:
        raise SchemaError(f"expected exactly one label column, found {len(labels)}")
    if labels[0].kind.kind != BINARY:
        raise SchemaError(f"label column {labels[0].name!r} must be binary")
    for c in columns:
        if c.role not in (FEATURE, LABEL):
            raise SchemaError(f"unknown role {c.role!r} for column {c.name!r}")


class TabularDataset:
    """Feature matrix, binary labels and the column schema.

    ``X`` holds the feature columns in schema order (label excluded);
    categorical columns hold integer codes in ``[0, cardinality)``.
    ``row_ids`` tracks the originating row of the source file (``-1`` for
    synthetic rows) so leakage audits can follow rows through the pipeline.
    Arrays are made read-only; treat the object as immutable.
    """

    def __init__(self, columns, X, y, row_ids=None, validate=True):
        self.columns = tuple(columns)
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y).astype(np.int64)
        n_feat = len(self.feature_columns)
        if X.ndim != 2:
            X = X.reshape(len(y), n_feat)
        if row_ids is None:
            row_ids = np.arange(len(y), dtype=np.int64)
        row_ids = np.asarray(row_ids, dtype=np.int64)
        self.X = X
        self.y = y
        self.row_ids = row_ids
        for a in (self.X, self.y, self.row_ids):
            a.flags.writeable = False
        if validate:
            self.validate()

    # -- schema helpers -------------------------------------------------
    @property
    def feature_columns(self):
        return [c for c in self.columns if c.role == FEATURE]

    @property
    def feature_names(self):
        return [c.name for c in self.feature_columns]

    @property
    def label_column(self):
        return next(c for c in self.columns if c.role == LABEL)

    @property
    def kinds(self):
        return [c.kind for c in self.feature_columns]

    @property
    def row_count(self):
        return int(self.y.shape[0])

    @property
    def n_features(self):
        return self.X.shape[1]

    def class_counts(self):
        return (int(np.sum(self.y == 0)), int(np.sum(self.y == 1)))

    def validate(self):
        validate_schema(self.columns)
        n, p = self.X.shape
        if p != len(self.feature_columns):
            raise SchemaError(f"matrix has {p} columns, schema has {len(self.feature_columns)} features")
        if self.y.shape != (n,) or self.row_ids.shape != (n,):
            raise SchemaError("labels / row ids do not match row count")
        if n and not np.all(np.isfinite(self.X)):
            raise SchemaError("non-finite feature values")
        if n and not np.all((self.y == 0) | (self.y == 1)):
            raise SchemaError("labels must be 0/1")
        for j, col in enumerate(self.feature_columns):
            v = self.X[:, j]
            if col.kind.kind == BINARY and n and not np.all((v == 0) | (v == 1)):
                raise SchemaError(f"binary column {col.name!r} holds values outside {{0, 1}}")
            if col.kind.kind == CATEGORICAL and n:
                bad = (v != np.floor(v)) | (v < 0) | (v >= col.kind.cardinality)
                if np.any(bad):
                    i = int(np.argmax(bad))
                    raise SchemaError(
                        f"categorical code {v[i]!r} out of range [0, {col.kind.cardinality}) "
                        f"in column {col.name!r}, row {i}"
                    )

    # -- row operations -------------------------------------------------
    def subset(self, idx):
        idx = np.asarray(idx)
        return TabularDataset(self.columns, self.X[idx], self.y[idx], self.row_ids[idx], validate=False)

    def append(self, X, y, row_ids=None):
        X = np.asarray(X, dtype=np.float64).reshape(-1, self.n_features)
        y = np.asarray(y, dtype=np.int64).reshape(-1)
        if row_ids is None:
            row_ids = np.full(len(y), -1, dtype=np.int64)
        return TabularDataset(
            self.columns,
            np.vstack([self.X, X]),
            np.concatenate([self.y, y]),
            np.concatenate([self.row_ids, row_ids]),
        )

    def with_X(self, X):
        return TabularDataset(self.columns, X, self.y, self.row_ids, validate=False)

    def summary(self):
        n0, n1 = self.class_counts()
        minority, majority = min(n0, n1), max(n0, n1)
        return {
            "row_count": self.row_count,
            "class_counts": {"0": n0, "1": n1},
            "minority_ratio": (minority / majority) if majority else None,
            "columns": {c.name: c.to_dict() for c in self.columns},
        }

    def __repr__(self):
        n0, n1 = self.class_counts()
        return f"TabularDataset(rows={self.row_count}, features={self.n_features}, classes=({n0}, {n1}))"


@dataclass(frozen=True)
class SplitPair:
    train: TabularDataset
    test: TabularDataset
    seed: int
    stratified: bool


@dataclass(frozen=True)
class ScalerParams:
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


@dataclass(frozen=True)
class BenchmarkSpec:
    n_rows: int = 18398
    n_positives: int = 124
    n_continuous: int = 59
    n_categorical: int = 1
    n_binary: int = 1
    class_separation: float = 1.5
    seed: int = 0
    n_informative: int = 3
    multimodal_fraction: float = 0.5
    categorical_cardinality: int = 8


# ---------------------------------------------------------------------------
# schema inference and CSV I/O


def _parse_cell(text, row, column):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"non-numeric value {text!r}", row=row, column=column) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {text!r}", row=row, column=column)
    return value


def infer_schema(header, sample_rows, label=DEFAULT_LABEL, categorical_max=CATEGORICAL_MAX):
    """Type each column from the values in ``sample_rows``.

    Binary: at most two distinct values, all in {0, 1}. Categorical:
    integer-valued with at most ``categorical_max`` distinct values (codes
    that are not ``0..k-1`` get a ``levels`` table). Anything else is
    continuous. The column called ``label`` gets the label role.
    """
    header = [h.strip() for h in header]
    if not header:
        raise SchemaError("empty header")
    if len(set(header)) != len(header):
        dup = sorted({h for h in header if header.count(h) > 1})
        raise SchemaError(f"duplicate column names: {dup}")
    data = np.empty((len(sample_rows), len(header)))
    for i, row in enumerate(sample_rows):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", row=i + 1)
        for j, cell in enumerate(row):
            data[i, j] = cell if isinstance(cell, (int, float)) else _parse_cell(cell, i + 1, header[j])

    columns = []
    for j, name in enumerate(header):
        col = data[:, j]
        distinct = np.unique(col)
        role = LABEL if name == label else FEATURE
        if len(distinct) <= 2 and np.all((distinct == 0) | (distinct == 1)):
            kind = FeatureKind.binary()
        elif role == LABEL:
            raise SchemaError(f"label column {name!r} is not binary")
        elif (
            len(distinct) >= 2
            and len(distinct) <= categorical_max
            and np.all(distinct == np.floor(distinct))
        ):
            if distinct[0] == 0 and distinct[-1] == len(distinct) - 1:
                kind = FeatureKind.categorical(len(distinct))
            else:
                kind = FeatureKind.categorical(len(distinct), levels=[float(v) for v in distinct])
        else:
            kind = FeatureKind.continuous()
        columns.append(ColumnSchema(name, kind, role))
    if not any(c.role == LABEL for c in columns):
        raise SchemaError(f"label column {label!r} not found in header")
    return columns


def _encode_column(values, kind, name, first_row):
    if kind.kind == CATEGORICAL and kind.levels is not None:
        lookup = {v: i for i, v in enumerate(kind.levels)}
        out = np.empty_like(values)
        for i, v in enumerate(values):
            try:
                out[i] = lookup[v]
            except KeyError:
                raise SchemaError(
                    f"categorical value {v!r} not among the {kind.cardinality} levels "
                    f"of column {name!r} (row {first_row + i})"
                ) from None
        return out
    return values


def load_csv(path, schema=None, label=DEFAULT_LABEL, categorical_max=CATEGORICAL_MAX):
    """Read a comma-separated file with a header row.

    ``schema`` may be a list of ``ColumnSchema``; otherwise it is inferred
    from the file contents. Row numbers in errors are 1-based data rows
    (the header is row 0).
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise IoError(f"no such file: {path}")
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise ParseError("missing header row", row=0) from None
            raw = [r for r in reader if r]
    except UnicodeDecodeError as exc:
        raise ParseError(f"file is not UTF-8: {exc}") from None

    width = len(header)
    data = np.empty((len(raw), width))
    for i, row in enumerate(raw):
        if len(row) != width:
            raise ParseError(f"expected {width} fields, got {len(row)}", row=i + 1)
        for j, cell in enumerate(row):
            data[i, j] = _parse_cell(cell, i + 1, header[j])

    if schema is None:
        schema = infer_schema(header, data, label=label, categorical_max=categorical_max)
    else:
        schema = list(schema)
        if [c.name for c in schema] != header:
            raise SchemaError("schema column names do not match the file header")
    validate_schema(schema)

    label_idx = next(j for j, c in enumerate(schema) if c.role == LABEL)
    feat_idx = [j for j, c in enumerate(schema) if c.role == FEATURE]
    X = np.empty((len(raw), len(feat_idx)))
    for k, j in enumerate(feat_idx):
        X[:, k] = _encode_column(data[:, j], schema[j].kind, schema[j].name, 1)
    y = data[:, label_idx]
    if len(y) and not np.all((y == 0) | (y == 1)):
        i = int(np.argmax((y != 0) & (y != 1)))
        raise SchemaError(f"label value {y[i]!r} is not 0/1 (row {i + 1})")
    return TabularDataset(schema, X, y.astype(np.int64))


def _format_value(v, kind):
    if kind.kind == CONTINUOUS:
        return repr(float(v))
    if kind.kind == CATEGORICAL and kind.levels is not None:
        v = kind.levels[int(v)]
    return str(int(v))


def write_csv(ds: TabularDataset, path):
    """Write ``ds`` back in the file layout it was loaded from.

    Continuous values use ``repr`` (shortest round-trip form) so reloading
    is bit-exact.
    """
    cols = ds.columns
    feat_pos = {}
    k = 0
    for j, c in enumerate(cols):
        if c.role == FEATURE:
            feat_pos[j] = k
            k += 1
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([c.name for c in cols])
        for i in range(ds.row_count):
            out = []
            for j, c in enumerate(cols):
                if c.role == LABEL:
                    out.append(str(int(ds.y[i])))
                else:
                    out.append(_format_value(ds.X[i, feat_pos[j]], c.kind))
            w.writerow(out)


def read_schema_sidecar(path):
    """Schema sidecar: JSON object mapping column name to {kind, cardinality, role}."""
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except FileNotFoundError:
        raise IoError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid schema JSON: {exc}") from None
    if not isinstance(d, dict):
        raise SchemaError("schema sidecar must be a JSON object")
    return [ColumnSchema.from_dict(name, spec) for name, spec in d.items()]


def write_schema_sidecar(columns, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({c.name: c.to_dict() for c in columns}, fh, indent=2)


# ---------------------------------------------------------------------------
# splitting and scaling


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def split(ds: TabularDataset, test_fraction=0.3, seed=0, stratified=True) -> SplitPair:
    """Seeded train/test partition.

    Stratified mode allocates the test size ``round(f * n)`` across classes
    by largest remainder, so each class gets ``round(f * count)`` rows up to
    one row of slack.
    """
    if not (0.0 < test_fraction < 1.0):
        raise ConfigError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = ds.row_count
    if n < 2:
        raise ConfigError("need at least two rows to split")
    rng = np.random.default_rng(seed)
    if not stratified:
        perm = rng.permutation(n)
        n_test = min(max(_round_half_up(test_fraction * n), 1), n - 1)
        test_idx = np.sort(perm[:n_test])
        train_idx = np.sort(perm[n_test:])
    else:
        classes = [c for c in (0, 1) if np.any(ds.y == c)]
        members = {c: np.flatnonzero(ds.y == c) for c in classes}
        quotas = {c: test_fraction * len(members[c]) for c in classes}
        alloc = {c: int(math.floor(quotas[c])) for c in classes}
        total = min(max(_round_half_up(test_fraction * n), 1), n - 1)
        rest = total - sum(alloc.values())
        order = sorted(classes, key=lambda c: (-(quotas[c] - alloc[c]), -len(members[c]), c))
        for c in order[: max(rest, 0)]:
            alloc[c] += 1
        test_parts, train_parts = [], []
        for c in classes:
            perm = rng.permutation(members[c])
            test_parts.append(perm[: alloc[c]])
            train_parts.append(perm[alloc[c]:])
        test_idx = np.sort(np.concatenate(test_parts))
        train_idx = np.sort(np.concatenate(train_parts))
    return SplitPair(ds.subset(train_idx), ds.subset(test_idx), seed, stratified)


def continuous_mask(columns_or_kinds):
    kinds = [c.kind if isinstance(c, ColumnSchema) else c for c in columns_or_kinds]
    return np.array([k.kind == CONTINUOUS for k in kinds], dtype=bool)


def fit_scaler(ds: TabularDataset) -> ScalerParams:
    """Per-column mean and population std of the continuous columns.

    Discrete columns get identity parameters (mean 0, std 1). Standard
    deviations under ``STD_FLOOR`` are replaced by 1.0.
    """
    p = ds.n_features
    mean = np.zeros(p)
    std = np.ones(p)
    cont = continuous_mask(ds.feature_columns)
    if ds.row_count:
        Xc = ds.X[:, cont]
        m = Xc.mean(axis=0)
        s = np.sqrt(((Xc - m) ** 2).mean(axis=0))
        s[s < STD_FLOOR] = 1.0
        mean[cont] = m
        std[cont] = s
    return ScalerParams(mean, std)


def apply_scaler(ds: TabularDataset, params: ScalerParams) -> TabularDataset:
    return ds.with_X((ds.X - params.mean) / params.std)


def invert_scaler(X, params: ScalerParams):
    return np.asarray(X) * params.std + params.mean


# ---------------------------------------------------------------------------
# synthetic benchmark


def _standardised(v):
    return (v - v.mean()) / v.std()


def make_benchmark(spec: BenchmarkSpec) -> TabularDataset:
    """Rare-event stand-in for the confidential mill data.

    Continuous features alternate between Gaussian and well-separated
    bimodal shapes (``multimodal_fraction`` of them bimodal), each
    standardised to unit variance. Positives are shifted by
    ``class_separation`` on ``n_informative`` randomly chosen continuous
    features; everything else shares one distribution across classes.
    The informative indices are stored on the returned object as
    ``informative``.
    """
    n_feat = spec.n_continuous + spec.n_categorical + spec.n_binary
    if spec.n_rows < 2 or spec.n_positives < 1 or spec.n_positives >= spec.n_rows:
        raise ConfigError("need 1 <= n_positives < n_rows")
    if n_feat < 1:
        raise ConfigError("benchmark needs at least one feature")
    if not (0.0 <= spec.class_separation <= 5.0):
        raise ConfigError("class_separation must lie in [0, 5]")
    rng = np.random.default_rng(spec.seed)
    n = spec.n_rows
    y = np.zeros(n, dtype=np.int64)
    y[rng.choice(n, size=spec.n_positives, replace=False)] = 1

    n_multi = int(round(spec.multimodal_fraction * spec.n_continuous))
    multi = set(rng.choice(spec.n_continuous, size=n_multi, replace=False).tolist()) if n_multi else set()
    k_inf = min(spec.n_informative, spec.n_continuous)
    informative = np.sort(rng.choice(spec.n_continuous, size=k_inf, replace=False)) if k_inf else np.array([], int)

    X = np.empty((n, n_feat))
    for j in range(spec.n_continuous):
        if j in multi:
            centre = rng.uniform(2.0, 3.5)
            side = np.where(rng.random(n) < rng.uniform(0.35, 0.65), -1.0, 1.0)
            raw = side * centre + rng.normal(0.0, 0.5, n)
            # standardise using the population mixture moments, not the sample
            w = np.mean(side < 0)
            mu = centre * (1 - 2 * w)
            var = 0.25 + centre**2 - mu**2
            X[:, j] = (raw - mu) / math.sqrt(var)
        else:
            X[:, j] = rng.normal(0.0, 1.0, n)
    for j in informative:
        X[y == 1, j] += spec.class_separation

    base = spec.n_continuous
    card = spec.categorical_cardinality
    for j in range(spec.n_categorical):
        probs = 1.0 / np.arange(1, card + 1)
        probs /= probs.sum()
        X[:, base + j] = rng.choice(card, size=n, p=probs)
    base += spec.n_categorical
    for j in range(spec.n_binary):
        X[:, base + j] = (rng.random(n) < 0.3).astype(float)

    columns = [ColumnSchema(DEFAULT_LABEL, FeatureKind.binary(), LABEL)]
    for j in range(n_feat):
        if j < spec.n_continuous:
            kind = FeatureKind.continuous()
        elif j < spec.n_continuous + spec.n_categorical:
            kind = FeatureKind.categorical(card)
        else:
            kind = FeatureKind.binary()
        columns.append(ColumnSchema(f"x{j + 1}", kind))
    ds = TabularDataset(columns, X, y)
    ds.informative = informative
    return ds


def make_toy(n_rows=5000, seed=0, positive_rate=0.05) -> TabularDataset:
    """Small generator test bed: ``x1`` is an even mixture of N(-5, 1) and
    N(5, 1), ``x2`` a 3-level categorical with shares 0.5 / 0.3 / 0.2, and
    the label is independent of both."""
    rng = np.random.default_rng(seed)
    side = np.where(rng.random(n_rows) < 0.5, -5.0, 5.0)
    x1 = side + rng.normal(0.0, 1.0, n_rows)
    x2 = rng.choice(3, size=n_rows, p=[0.5, 0.3, 0.2])
    y = (rng.random(n_rows) < positive_rate).astype(np.int64)
    columns = [ColumnSchema(DEFAULT_LABEL, FeatureKind.binary(), LABEL),
               ColumnSchema("x1", FeatureKind.continuous()),
               ColumnSchema("x2", FeatureKind.categorical(3))]
    return TabularDataset(columns, np.c_[x1, x2], y)
