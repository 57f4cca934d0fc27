"""Binary confusion matrix and the per-class precision / recall / F1 /
overall-accuracy summary.

Undefined ratios (zero denominators) are ``None`` and serialise as JSON
``null``; they are never coerced to 0 or 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int
    positive_class: int = 1

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn

    def swap(self):
        """Same predictions, other class treated as positive."""
        return ConfusionMatrix(self.tn, self.fn, self.fp, self.tp, 1 - self.positive_class)

    def to_dict(self):
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn, "positive_class": self.positive_class}


@dataclass(frozen=True)
class ClassMetrics:
    precision: float | None
    recall: float | None
    f1: float | None
    support: int

    def to_dict(self):
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1, "support": self.support}


@dataclass(frozen=True)
class MetricsSummary:
    class0: ClassMetrics
    class1: ClassMetrics
    overall_accuracy: float | None

    def per_class(self, c):
        return self.class1 if c == 1 else self.class0

    def to_dict(self):
        return {"class0": self.class0.to_dict(), "class1": self.class1.to_dict(), "overall_accuracy": self.overall_accuracy}

    def get(self, name):
        """Look up a flat metric name such as ``recall_class1`` or ``accuracy``."""
        if name in ("accuracy", "overall_accuracy"):
            return self.overall_accuracy
        metric, _, cls = name.rpartition("_class")
        return getattr(self.per_class(int(cls)), metric)


def _as_labels(v, name):
    a = np.asarray(v)
    if a.ndim != 1:
        a = a.reshape(-1)
    if a.size and not np.all((a == 0) | (a == 1)):
        raise DomainError(f"{name} contains values outside {{0, 1}}")
    return a.astype(np.int64)


def confusion(predicted, actual, positive_class=1) -> ConfusionMatrix:
    p = _as_labels(predicted, "predicted")
    a = _as_labels(actual, "actual")
    if p.shape != a.shape:
        raise ShapeError(f"length mismatch: {p.shape[0]} predicted vs {a.shape[0]} actual")
    if p.size == 0:
        raise ShapeError("need at least one prediction")
    if positive_class not in (0, 1):
        raise DomainError("positive_class must be 0 or 1")
    pos_p = p == positive_class
    pos_a = a == positive_class
    tp = int(np.sum(pos_p & pos_a))
    fp = int(np.sum(pos_p & ~pos_a))
    fn = int(np.sum(~pos_p & pos_a))
    tn = int(np.sum(~pos_p & ~pos_a))
    return ConfusionMatrix(tp, fp, fn, tn, positive_class)


def _ratio(num, den):
    return num / den if den else None


def class_metrics(cm: ConfusionMatrix) -> ClassMetrics:
    """Precision/recall/F1 for ``cm.positive_class``."""
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0:
        f1 = 0.0
    else:
        # equals 2PR/(P+R) but with a single rounding
        f1 = 2 * cm.tp / (2 * cm.tp + cm.fp + cm.fn)
    return ClassMetrics(precision, recall, f1, cm.tp + cm.fn)


def summarize(cm: ConfusionMatrix) -> MetricsSummary:
    pos1 = cm if cm.positive_class == 1 else cm.swap()
    return MetricsSummary(
        class0=class_metrics(pos1.swap()),
        class1=class_metrics(pos1),
        overall_accuracy=_ratio(cm.tp + cm.tn, cm.total),
    )


def evaluate(predicted, actual) -> MetricsSummary:
    return summarize(confusion(predicted, actual, 1))
