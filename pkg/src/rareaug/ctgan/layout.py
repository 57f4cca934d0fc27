"""Row encoding for the GAN: mode-normalised continuous spans plus one-hot
blocks for discrete columns (the label included)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import CONTINUOUS, TabularDataset
from ..errors import ShapeError
from .normalizer import GmmNormalizer

LABEL_INDEX = -1  # ``source`` of the span holding the label


@dataclass(frozen=True)
class Span:
    name: str
    source: int  # feature index, or LABEL_INDEX
    start: int
    width: int
    continuous: bool

    @property
    def n_options(self):
        # modes for continuous spans, categories otherwise
        return self.width - 1 if self.continuous else self.width


class EncodedLayout:
    """Where each column lives in the encoded vector.

    Continuous column: ``[alpha, one-hot(mode)]`` with
    ``alpha = clip((v - mu_m) / (4 sigma_m), -1, 1)``. Discrete columns and
    the label: ``one-hot(code)``.
    """

    def __init__(self, columns, normalizers: dict):
        self.columns = tuple(columns)
        self.normalizers = dict(normalizers)
        spans = []
        pos = 0
        feats = [c for c in self.columns if c.role == "feature"]
        label = next(c for c in self.columns if c.role == "label")
        for j, col in enumerate(feats):
            if col.kind.kind == CONTINUOUS:
                w = 1 + self.normalizers[col.name].n_modes
                spans.append(Span(col.name, j, pos, w, True))
            else:
                w = col.kind.n_categories
                spans.append(Span(col.name, j, pos, w, False))
            pos += w
        spans.append(Span(label.name, LABEL_INDEX, pos, 2, False))
        self.spans = spans
        self.width = pos + 2
        self.n_features = len(feats)
        self._by_name = {s.name: s for s in spans}

    def span(self, name):
        return self._by_name[name]

    def head_spans(self):
        out = []
        for s in self.spans:
            if s.continuous:
                out += [(s.start, 1, "tanh"), (s.start + 1, s.width - 1, "softmax")]
            else:
                out.append((s.start, s.width, "softmax"))
        return out

    def encode(self, X, y, rng=None):
        """Encode rows. Modes are the most responsible component, or drawn
        from the responsibilities when ``rng`` is given."""
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"expected rows of width {self.n_features}, got shape {X.shape}")
        n = X.shape[0]
        E = np.zeros((n, self.width))
        rows = np.arange(n)
        for s in self.spans:
            if s.source == LABEL_INDEX:
                E[rows, s.start + y.astype(np.int64)] = 1.0
            elif s.continuous:
                norm: GmmNormalizer = self.normalizers[s.name]
                v = X[:, s.source]
                r = norm.responsibilities(v)
                if rng is None:
                    mode = np.argmax(r, axis=1)
                else:
                    u = rng.random(n)
                    mode = np.minimum((u[:, None] > np.cumsum(r, axis=1)).sum(axis=1), norm.n_modes - 1)
                alpha = (v - norm.means[mode]) / (4.0 * norm.stds[mode])
                E[:, s.start] = np.clip(alpha, -1.0, 1.0)
                E[rows, s.start + 1 + mode] = 1.0
            else:
                E[rows, s.start + X[:, s.source].astype(np.int64)] = 1.0
        return E

    def decode(self, E):
        E = np.asarray(E, dtype=np.float64)
        if E.ndim != 2 or E.shape[1] != self.width:
            raise ShapeError(f"expected encoded width {self.width}, got shape {E.shape}")
        n = E.shape[0]
        X = np.empty((n, self.n_features))
        y = np.zeros(n, dtype=np.int64)
        for s in self.spans:
            if s.continuous:
                norm = self.normalizers[s.name]
                mode = np.argmax(E[:, s.start + 1:s.start + s.width], axis=1)
                alpha = np.clip(E[:, s.start], -1.0, 1.0)
                X[:, s.source] = alpha * 4.0 * norm.stds[mode] + norm.means[mode]
            else:
                code = np.argmax(E[:, s.start:s.start + s.width], axis=1)
                if s.source == LABEL_INDEX:
                    y = code.astype(np.int64)
                else:
                    X[:, s.source] = code
        return X, y

    def encode_dataset(self, ds: TabularDataset, rng=None):
        return self.encode(ds.X, ds.y, rng)


def encode_row(row, label, layout: EncodedLayout):
    return layout.encode(np.asarray(row, float)[None, :], np.array([label]))[0]


def decode_row(encoded, layout: EncodedLayout):
    X, y = layout.decode(np.asarray(encoded, float)[None, :])
    return X[0], int(y[0])
