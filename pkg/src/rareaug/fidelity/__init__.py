"""Real-versus-synthetic diagnostics and the augmentation gate."""

from .pca import PcaModel, pca_fit, pca_project
from .stats import DensityCurve, EcdfCurve, KsResult, ecdf, kde, ks_two_sample, silverman_bandwidth
from .structure import FidelityReport, StructureThresholds, box_overlap, frequency_l1, structure_check, write_curves
from .tsne import Embedding2D, tsne

__all__ = [
    "DensityCurve", "EcdfCurve", "Embedding2D", "FidelityReport", "KsResult", "PcaModel",
    "StructureThresholds", "box_overlap", "ecdf", "frequency_l1", "kde", "ks_two_sample", "pca_fit",
    "pca_project", "silverman_bandwidth", "structure_check", "tsne", "write_curves",
]
