"""Diagonal-covariance Gaussian mixture fitted with EM.

Full covariances are ill-conditioned for wide embedding matrices with
few samples per component, so only the diagonal family is provided.
Initialization is seeded k-means++; the per-iteration average
log-likelihood trajectory is retained on the fitted model so callers
can assert EM monotonicity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray       # (K,), nonnegative, sums to 1
    means: np.ndarray         # (K, d)
    variances: np.ndarray     # (K, d), floored at var_floor
    log_likelihood_path: np.ndarray  # average log-likelihood per EM iteration

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    def log_prob(self, x: np.ndarray) -> np.ndarray:
        """(n, K) matrix of log(weight_k) + log N(x | mean_k, diag var_k)."""
        x = np.asarray(x, dtype=np.float64)
        out = np.empty((x.shape[0], self.n_components))
        for k in range(self.n_components):
            diff2 = (x - self.means[k]) ** 2 / self.variances[k]
            out[:, k] = -0.5 * (
                diff2.sum(axis=1) + np.log(self.variances[k]).sum() + x.shape[1] * _LOG_2PI
            )
        return out + np.log(self.weights)

    def responsibilities(self, x: np.ndarray) -> np.ndarray:
        """Posterior component probabilities, one row per sample, rows sum to 1."""
        lp = self.log_prob(x)
        return np.exp(lp - logsumexp(lp, axis=1, keepdims=True))


def _kmeans_pp_centers(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    dist2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = dist2.sum()
        if total <= 0:
            centers[j] = x[rng.integers(n)]
        else:
            centers[j] = x[rng.choice(n, p=dist2 / total)]
        dist2 = np.minimum(dist2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def gmm_fit(
    x: np.ndarray,
    n_components: int,
    seed: int = 0,
    max_iter: int = 200,
    tol: float = 1e-6,
    var_floor: float = 1e-6,
) -> GmmModel:
    """Fit a diagonal GMM by EM with seeded k-means++ initialization.

    Stops when the relative improvement of the average log-likelihood
    drops below ``tol`` or after ``max_iter`` iterations.  Raises if a
    component goes empty after variance flooring.
    """
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if n_components < 1:
        raise ValueError("need at least one component")
    if n < n_components:
        raise ValueError(f"cannot fit {n_components} components to {n} samples")

    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_centers(x, n_components, rng)
    # hard assignment to the nearest seed center bootstraps the first M-step
    dist2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assign = dist2.argmin(axis=1)
    resp = np.zeros((n, n_components))
    resp[np.arange(n), assign] = 1.0

    weights = means = variances = None
    ll_path: list[float] = []
    for _ in range(max_iter):
        # M-step
        nk = resp.sum(axis=0)
        if np.any(nk <= 0):
            raise ValueError("empty mixture component during EM")
        weights = nk / n
        means = (resp.T @ x) / nk[:, None]
        variances = np.empty_like(means)
        for k in range(n_components):
            diff = x - means[k]
            variances[k] = (resp[:, k] @ (diff * diff)) / nk[k]
        variances = np.maximum(variances, var_floor)

        # E-step
        model = GmmModel(weights, means, variances, np.array(ll_path))
        lp = model.log_prob(x)
        row_ll = logsumexp(lp, axis=1)
        ll = float(row_ll.mean())
        resp = np.exp(lp - row_ll[:, None])

        if ll_path:
            prev = ll_path[-1]
            ll_path.append(ll)
            if abs(ll - prev) <= tol * max(abs(prev), 1.0):
                break
        else:
            ll_path.append(ll)

    return GmmModel(weights, means, variances, np.array(ll_path))
