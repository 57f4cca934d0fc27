"""Principal components from the eigendecomposition of the covariance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, ShapeError


@dataclass
class PcaModel:
    components: np.ndarray  # (k, p), orthonormal rows
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray
    mean: np.ndarray
    requested: int = 2
    reduced: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n_components(self):
        return self.components.shape[0]

    def project(self, data):
        return pca_project(self, data)


def pca_fit(data, n_components=2) -> PcaModel:
    """Top principal axes of ``data`` (rows are observations).

    Each axis is signed so its largest-magnitude loading is positive. When
    more components are asked for than ``min(n - 1, p)`` the count is cut
    down and ``reduced`` is set.
    """
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError("PCA expects a 2-D matrix")
    n, p = X.shape
    if n < 2:
        raise DomainError("PCA needs at least two rows")
    if n_components < 1:
        raise DomainError("n_components must be positive")
    k = min(int(n_components), n - 1, p)
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    comps = evecs[:, :k].T.copy()
    for r in comps:
        if r[np.argmax(np.abs(r))] < 0:
            r *= -1
    total = evals.sum()
    ratio = evals[:k] / total if total > 0 else np.zeros(k)
    return PcaModel(comps, evals[:k], ratio, mean, int(n_components), k < n_components)


def pca_project(model: PcaModel, data):
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.mean.shape[0]:
        raise ShapeError(f"expected rows of width {model.mean.shape[0]}")
    return (X - model.mean) @ model.components.T
