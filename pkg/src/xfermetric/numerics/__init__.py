"""Shared numerical kernels: PSD linear algebra, diagonal GMM EM,
k-NN-graph heat traces, and exact optimal transport."""

from .gmm import GmmModel, gmm_fit
from .heat import DEFAULT_T_GRID, heat_trace, knn_adjacency, normalized_laplacian
from .linalg import (
    check_symmetric,
    logdet_psd,
    reg_covariance,
    sqrtm_psd,
    sqrtm_psd_product,
)
from .transport import ot_exact

__all__ = [
    "DEFAULT_T_GRID",
    "GmmModel",
    "check_symmetric",
    "gmm_fit",
    "heat_trace",
    "knn_adjacency",
    "logdet_psd",
    "normalized_laplacian",
    "ot_exact",
    "reg_covariance",
    "sqrtm_psd",
    "sqrtm_psd_product",
]
