"""Dense PSD kernels shared by the metric implementations.

PSD matrices are plain float64 ndarrays; symmetry is checked at the
entry points that require it.  Covariances use divisor n throughout
(not n - 1) so that every metric sees the same estimator.
"""

from __future__ import annotations

import numpy as np

SYMMETRY_RTOL = 1e-10
LOGDET_EIG_FLOOR = 1e-12
SQRTM_NEG_EIG_TOL = 1e-8


def check_symmetric(m: np.ndarray, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(float(np.abs(m).max(initial=0.0)), 1e-300)
    if float(np.abs(m - m.T).max(initial=0.0)) > rtol * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (m + m.T)


def reg_covariance(x: np.ndarray, eps: float = 0.0) -> np.ndarray:
    """Sample covariance (divisor n) of mean-centered rows, plus eps * I."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected an (n, d) matrix")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    if eps < 0:
        raise ValueError("regularization must be nonnegative")
    n, d = x.shape
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / n
    cov = 0.5 * (cov + cov.T)
    if eps:
        cov[np.diag_indices(d)] += eps
    return cov


def logdet_psd(m: np.ndarray) -> float:
    """Log-determinant of a PSD matrix.

    Tries Cholesky first; falls back to an eigendecomposition with
    eigenvalues clamped to a floor of LOGDET_EIG_FLOOR * trace so the
    result stays finite for rank-deficient inputs.
    """
    m = check_symmetric(np.asarray(m, dtype=np.float64))
    try:
        chol = np.linalg.cholesky(m)
        return float(2.0 * np.sum(np.log(np.diag(chol))))
    except np.linalg.LinAlgError:
        pass
    eigvals = np.linalg.eigvalsh(m)
    floor = max(LOGDET_EIG_FLOOR * max(float(np.trace(m)), 0.0), 1e-300)
    return float(np.sum(np.log(np.maximum(eigvals, floor))))


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition; negative eigenvalues clamp to 0."""
    m = check_symmetric(np.asarray(m, dtype=np.float64))
    eigvals, eigvecs = np.linalg.eigh(m)
    root = eigvecs * np.sqrt(np.maximum(eigvals, 0.0))
    return root @ eigvecs.T


def sqrtm_psd_product(a: np.ndarray, b: np.ndarray) -> float:
    """tr((A B)^(1/2)) for PSD A, B, via the symmetric form A^(1/2) B A^(1/2).

    Mildly negative eigenvalues of the symmetric form (above
    -SQRTM_NEG_EIG_TOL * trace) clamp to zero; anything more negative
    signals an invalid covariance and raises.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    root_a = sqrtm_psd(a)
    sym = root_a @ check_symmetric(b) @ root_a
    sym = 0.5 * (sym + sym.T)
    eigvals = np.linalg.eigvalsh(sym)
    tol = SQRTM_NEG_EIG_TOL * max(float(np.trace(sym)), 1e-300)
    if eigvals.min(initial=0.0) < -tol:
        raise ValueError(
            f"strongly negative eigenvalue {eigvals.min():.3e} in symmetric product"
        )
    return float(np.sum(np.sqrt(np.maximum(eigvals, 0.0))))
