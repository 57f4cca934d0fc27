"""Machine-checkable "synthetic rows look like the real ones" gate."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from ..data import BINARY, CATEGORICAL, CONTINUOUS, TabularDataset
from ..errors import ConfigError, SchemaError
from .pca import pca_fit, pca_project
from .stats import KsResult, ks_two_sample

BOX_PERCENTILES = (0.5, 99.5)


@dataclass(frozen=True)
class StructureThresholds:
    max_ks_per_continuous: float = 0.15
    max_categorical_l1: float = 0.10
    min_pca_overlap: float = 0.5

    def __post_init__(self):
        for name in ("max_ks_per_continuous", "max_categorical_l1", "min_pca_overlap"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")

    def to_dict(self):
        return {"max_ks_per_continuous": self.max_ks_per_continuous,
                "max_categorical_l1": self.max_categorical_l1,
                "min_pca_overlap": self.min_pca_overlap}


@dataclass
class FidelityReport:
    thresholds: StructureThresholds
    ks: dict  # column name -> KsResult
    l1: dict  # discrete column name -> L1 distance between frequency vectors
    overlap: float
    pca_real: np.ndarray = field(repr=False)
    pca_synthetic: np.ndarray = field(repr=False)
    n_real: int = 0
    n_synthetic: int = 0
    technique: str | None = None

    @property
    def aggregate_ks(self):
        """Mean KS over continuous columns; lower is better."""
        return float(np.mean([r.statistic for r in self.ks.values()])) if self.ks else 0.0

    @property
    def max_ks(self):
        return max((r.statistic for r in self.ks.values()), default=0.0)

    @property
    def max_l1(self):
        return max(self.l1.values(), default=0.0)

    def failures(self):
        t = self.thresholds
        out = [f"ks:{c}" for c, r in self.ks.items() if r.statistic > t.max_ks_per_continuous]
        out += [f"l1:{c}" for c, v in self.l1.items() if v > t.max_categorical_l1]
        if self.overlap < t.min_pca_overlap:
            out.append("pca_overlap")
        return out

    @property
    def passed(self):
        return not self.failures()

    def to_dict(self):
        return {
            "technique": self.technique,
            "thresholds": self.thresholds.to_dict(),
            "pass": self.passed,
            "failures": self.failures(),
            "aggregate_ks": self.aggregate_ks,
            "max_ks": self.max_ks,
            "max_categorical_l1": self.max_l1,
            "pca_overlap": self.overlap,
            "n_real": self.n_real,
            "n_synthetic": self.n_synthetic,
            "ks": {c: r.to_dict() for c, r in self.ks.items()},
            "categorical_l1": dict(self.l1),
        }

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)


def frequency_l1(a, b, levels):
    fa = np.array([np.mean(a == v) for v in levels]) if len(a) else np.zeros(len(levels))
    fb = np.array([np.mean(b == v) for v in levels]) if len(b) else np.zeros(len(levels))
    return float(np.abs(fa - fb).sum())


def box_overlap(real_proj, synth_proj, percentiles=BOX_PERCENTILES):
    """Share of synthetic points inside the per-axis central-99% box of the
    real points."""
    if len(synth_proj) == 0:
        return 1.0
    lo = np.percentile(real_proj, percentiles[0], axis=0)
    hi = np.percentile(real_proj, percentiles[1], axis=0)
    inside = np.all((synth_proj >= lo) & (synth_proj <= hi), axis=1)
    return float(inside.mean())


def structure_check(real: TabularDataset, synthetic, thresholds: StructureThresholds | None = None,
                    label=None, columns=None) -> FidelityReport:
    """Compare a synthetic batch with the real rows of the same class.

    Parameters
    ----------
    real : TabularDataset
        Real rows; only those carrying ``label`` are used.
    synthetic : SyntheticBatch or TabularDataset
    label : int, optional
        Class to compare; defaults to the label of the synthetic rows.
    columns : iterable of str, optional
        Restrict the per-column tests to these feature names.
    """
    thresholds = thresholds or StructureThresholds()
    Xs = np.asarray(synthetic.X, dtype=np.float64)
    if Xs.ndim != 2 or Xs.shape[1] != real.n_features:
        raise SchemaError(f"synthetic rows have shape {Xs.shape}, real data has {real.n_features} features")
    ys = np.asarray(synthetic.y)
    if label is None:
        label = int(ys[0]) if len(ys) else 1
    Xr = real.X[real.y == label]
    if len(Xr) < 2:
        raise SchemaError(f"need at least two real rows of class {label}")
    wanted = None if columns is None else set(columns)

    ks, l1 = {}, {}
    for j, col in enumerate(real.feature_columns):
        if wanted is not None and col.name not in wanted:
            continue
        kind = col.kind.kind
        if kind == CONTINUOUS:
            ks[col.name] = ks_two_sample(Xr[:, j], Xs[:, j]) if len(Xs) else KsResult(0.0, len(Xr), 0)
        elif kind in (CATEGORICAL, BINARY):
            levels = range(col.kind.n_categories)
            l1[col.name] = frequency_l1(Xr[:, j], Xs[:, j], levels)

    pca = pca_fit(Xr, 2)
    pr = pca_project(pca, Xr)
    ps = pca_project(pca, Xs) if len(Xs) else np.empty((0, pca.n_components))
    return FidelityReport(thresholds, ks, l1, box_overlap(pr, ps), pr, ps, len(Xr), len(Xs),
                          getattr(synthetic, "technique", None))


def write_curves(path, series):
    """Long-format curve file with columns ``series, x, y``.

    ``series`` maps a name to an ``(x, y)`` pair of equal-length arrays.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["series", "x", "y"])
        for name, (xs, ys) in series.items():
            for a, b in zip(np.asarray(xs).ravel(), np.asarray(ys).ravel()):
                w.writerow([name, repr(float(a)), repr(float(b))])
