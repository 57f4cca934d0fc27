"""Empirical CDFs, Gaussian KDE and the two-sample KS statistic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from . import _kernels as K

KDE_GRID = 256


@dataclass(frozen=True)
class EcdfCurve:
    x: np.ndarray  # sorted unique values
    p: np.ndarray  # P(X <= x)

    def __call__(self, t):
        idx = np.searchsorted(self.x, t, side="right")
        return np.where(idx > 0, self.p[np.maximum(idx - 1, 0)], 0.0)


@dataclass(frozen=True)
class DensityCurve:
    x: np.ndarray
    density: np.ndarray
    bandwidth: float


@dataclass(frozen=True)
class KsResult:
    statistic: float
    n_a: int
    n_b: int

    def to_dict(self):
        return {"statistic": self.statistic, "n_a": self.n_a, "n_b": self.n_b}


def _values(v, what="values"):
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size == 0:
        raise DomainError(f"{what} must be non-empty")
    return v


def ecdf(values) -> EcdfCurve:
    v = np.sort(_values(values))
    x, counts = np.unique(v, return_counts=True)
    return EcdfCurve(x, np.cumsum(counts) / v.size)


def silverman_bandwidth(v):
    v = np.asarray(v, dtype=np.float64)
    n = v.size
    sd = v.std(ddof=1) if n > 1 else 0.0
    q75, q25 = np.percentile(v, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    h = 0.9 * spread * n ** (-0.2)
    return float(h) if h > 0 else 1.0


def kde(values, bandwidth=None, grid_size=KDE_GRID) -> DensityCurve:
    """Gaussian kernel density on ``grid_size`` points spanning the data
    plus three bandwidths either side."""
    v = _values(values)
    h = silverman_bandwidth(v) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise DomainError("bandwidth must be positive")
    grid = np.linspace(v.min() - 3 * h, v.max() + 3 * h, grid_size)
    z = (grid[:, None] - v[None, :]) / h
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (v.size * h * np.sqrt(2 * np.pi))
    return DensityCurve(grid, dens, h)


def ks_two_sample(a, b) -> KsResult:
    """Largest gap between the two empirical CDFs (exact, no p-value)."""
    sa = np.sort(_values(a, "first sample"))
    sb = np.sort(_values(b, "second sample"))
    return KsResult(float(K.ks_stat(sa, sb)), sa.size, sb.size)
