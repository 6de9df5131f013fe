"""Transferability metrics computed from target features and labels only.

Each function takes the bundle plus its own hyperparameters and returns
a plain float; registration at the bottom of the module wires defaults
and orientation into the shared registry.
"""

from __future__ import annotations

import logging
import warnings

import numpy as np
from scipy.stats import spearmanr

from ..numerics import logdet_psd, reg_covariance
from .registry import register_metric

log = logging.getLogger(__name__)

TRANSRATE_NEGATIVE_SLACK = 1e-6


def _centered_features(bundle) -> np.ndarray:
    x = bundle.features.astype(np.float64)
    return x - x.mean(axis=0)


def _class_partition(bundle):
    """(class id, index array) for every non-empty class."""
    labels = bundle.labels
    return [
        (c, np.flatnonzero(labels == c))
        for c in range(bundle.num_classes)
        if np.any(labels == c)
    ]


def _subsample(bundle, cap: int, seed: int) -> np.ndarray:
    if bundle.n <= cap:
        return np.arange(bundle.n)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(bundle.n, size=cap, replace=False))


def h_score(bundle, seed: int = 0, eps: float = 1e-4) -> float:
    """tr(cov(F)^-1 cov(class-mean F)): low feature redundancy and high
    inter-class scatter both push the score up."""
    if bundle.n < 2:
        raise ValueError("h-score needs at least 2 samples")
    x = _centered_features(bundle)
    cov_raw = reg_covariance(x, 0.0)
    trace = float(np.trace(cov_raw))
    ridge = eps * trace / bundle.d if trace > 0 else eps
    cov = cov_raw + ridge * np.eye(bundle.d)

    class_means = np.zeros_like(x)
    for _, idx in _class_partition(bundle):
        class_means[idx] = x[idx].mean(axis=0)
    cov_between = reg_covariance(class_means, 0.0)

    try:
        np.linalg.cholesky(cov + 1e-30 * np.eye(bundle.d))
        solved = np.linalg.solve(cov, cov_between)
    except np.linalg.LinAlgError as exc:
        raise ValueError("feature covariance is singular even after regularization") from exc
    return float(np.trace(solved))


def logme(bundle, seed: int = 0, max_iter: int = 100, tol: float = 1e-6) -> float:
    """Mean per-class, per-sample maximum log evidence of a Bayesian
    linear regression from features onto the one-vs-all class indicator.

    The precision pair (weight prior alpha, noise beta) is optimized by
    the standard fixed-point iteration over the SVD of the centered
    feature matrix.
    """
    if bundle.n < 2 or bundle.num_classes < 2:
        raise ValueError("logme needs n >= 2 and at least 2 classes")
    x = _centered_features(bundle)
    n, d = x.shape
    u, s, _ = np.linalg.svd(x, full_matrices=False)
    sigma = s**2

    def evidence_at(alpha, beta, z, res2_base):
        denom = alpha + beta * sigma
        m2 = float((beta**2 * sigma * z**2 / denom**2).sum())
        res2 = float((alpha**2 * z**2 / denom**2).sum()) + res2_base
        logdet_a = float(np.log(denom).sum()) + (d - sigma.size) * np.log(alpha)
        return 0.5 * (
            d * np.log(alpha)
            + n * np.log(beta)
            - n * np.log(2.0 * np.pi)
            - logdet_a
            - beta * res2
            - alpha * m2
        )

    evidences = []
    for c, idx in _class_partition(bundle):
        y = (bundle.labels == c).astype(np.float64)
        z = u.T @ y
        res2_base = max(float(y @ y - z @ z), 0.0)

        alpha, beta = 1.0, 1.0
        # on pure-noise targets alpha legitimately drifts toward infinity,
        # so convergence is judged on the evidence value, not the parameters
        evidence = evidence_at(alpha, beta, z, res2_base)
        converged = False
        for _ in range(max_iter):
            denom = alpha + beta * sigma
            gamma = float((beta * sigma / denom).sum())
            m2 = float((beta**2 * sigma * z**2 / denom**2).sum())
            res2 = float((alpha**2 * z**2 / denom**2).sum()) + res2_base
            alpha = gamma / max(m2, 1e-300)
            beta = (n - gamma) / max(res2, 1e-300)
            new_evidence = evidence_at(alpha, beta, z, res2_base)
            if abs(new_evidence - evidence) <= tol * max(abs(evidence), 1.0):
                evidence = new_evidence
                converged = True
                break
            evidence = new_evidence
        if not converged:
            warnings.warn(f"logme fixed point for class {c} did not converge", stacklevel=2)
        evidences.append(evidence / n)
    return float(np.mean(evidences))


def gbc(bundle, seed: int = 0, covariance: str = "diagonal", eps: float = 1e-4) -> float:
    """Negated sum of exp(-Bhattacharyya distance) over unordered class
    pairs under per-class (diagonal or spherical) Gaussian fits."""
    if covariance not in ("diagonal", "spherical"):
        raise ValueError(f"unknown covariance family: {covariance}")
    parts = _class_partition(bundle)
    if len(parts) < 2:
        raise ValueError("gbc needs at least 2 non-empty classes")
    x = bundle.features.astype(np.float64)

    means, variances = [], []
    for _, idx in parts:
        sub = x[idx]
        means.append(sub.mean(axis=0))
        if idx.size >= 2:
            var = sub.var(axis=0)
        else:
            var = np.zeros(bundle.d)
        if covariance == "spherical":
            var = np.full(bundle.d, var.mean())
        variances.append(np.maximum(var, eps))

    value = 0.0
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            vbar = 0.5 * (variances[i] + variances[j])
            diff = means[i] - means[j]
            d_b = 0.125 * float((diff * diff / vbar).sum()) + 0.5 * float(
                (np.log(vbar) - 0.5 * np.log(variances[i]) - 0.5 * np.log(variances[j])).sum()
            )
            value -= np.exp(-d_b)
    return value


def _coding_rate(gram_scaled: np.ndarray) -> float:
    d = gram_scaled.shape[0]
    return 0.5 * logdet_psd(np.eye(d) + gram_scaled)


def transrate(bundle, seed: int = 0, eps: float = 1e-4) -> float:
    """Coding-rate gap between all target features and their per-class
    partition: an estimate of the feature/label mutual information."""
    if bundle.n < 2:
        raise ValueError("transrate needs at least 2 samples")
    z = _centered_features(bundle)
    n, d = z.shape
    total = _coding_rate((d / (n * eps**2)) * (z.T @ z))
    within = 0.0
    for _, idx in _class_partition(bundle):
        zc = z[idx]
        within += (idx.size / n) * _coding_rate((d / (idx.size * eps**2)) * (zc.T @ zc))
    value = total - within
    if value < 0:
        log.debug("transrate raw value %.3e clamped to 0", value)
        if value > -TRANSRATE_NEGATIVE_SLACK:
            value = 0.0
    return float(value)


def _row_standardize(x: np.ndarray, what: str) -> np.ndarray:
    centered = x - x.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    if np.any(norms == 0):
        raise ValueError(f"degenerate {what}: zero-variance rows")
    return centered / norms[:, None]


def parc(bundle, seed: int = 0, sample_cap: int = 4096) -> float:
    """Spearman correlation between pairwise feature dissimilarity and
    pairwise label dissimilarity (both 1 - Pearson across rows)."""
    if bundle.n < 3:
        raise ValueError("parc needs at least 3 samples")
    idx = _subsample(bundle, sample_cap, seed)
    feats = _row_standardize(bundle.features[idx].astype(np.float64), "features")
    onehot = np.eye(bundle.num_classes)[bundle.labels[idx]]
    labels = _row_standardize(onehot, "labels")

    dis_f = 1.0 - feats @ feats.T
    dis_y = 1.0 - labels @ labels.T
    tri = np.triu_indices(idx.size, k=1)
    rho = spearmanr(dis_f[tri], dis_y[tri]).statistic
    return float(rho)


def tmi(bundle, seed: int = 0, eps: float = 1e-4) -> float:
    """Class-frequency-weighted Gaussian entropy (up to constants) of the
    per-class diagonal covariances: summarizes intra-class feature variance."""
    x = bundle.features.astype(np.float64)
    value = 0.0
    for _, idx in _class_partition(bundle):
        var = x[idx].var(axis=0) if idx.size >= 2 else np.zeros(bundle.d)
        value += (idx.size / bundle.n) * 0.5 * float(np.log(var + eps).sum())
    return value


def lfc(bundle, seed: int = 0, sample_cap: int = 4096) -> float:
    """Cosine of the angle between the centered feature Gram matrix and
    the centered label Gram matrix."""
    if bundle.n < 3:
        raise ValueError("lfc needs at least 3 samples")
    idx = _subsample(bundle, sample_cap, seed)
    x = bundle.features[idx].astype(np.float64)
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        raise ValueError(f"zero-norm feature vector at sample index {int(idx[np.argmin(norms)])}")
    x = x / norms[:, None]
    onehot = np.eye(bundle.num_classes)[bundle.labels[idx]]

    def centered_gram(rows):
        k = rows @ rows.T
        k -= k.mean(axis=0, keepdims=True)
        k -= k.mean(axis=1, keepdims=True)
        return k

    k_f = centered_gram(x)
    k_y = centered_gram(onehot)
    denom = np.linalg.norm(k_f) * np.linalg.norm(k_y)
    if denom == 0:
        raise ValueError("zero-norm kernel (identical samples or a single class)")
    return float((k_f * k_y).sum() / denom)


register_metric("hscore", h_score, defaults={"eps": 1e-4})
register_metric("logme", logme, defaults={"max_iter": 100, "tol": 1e-6})
register_metric("gbc", gbc, defaults={"covariance": "diagonal", "eps": 1e-4})
register_metric("transrate", transrate, defaults={"eps": 1e-4})
register_metric("parc", parc, defaults={"sample_cap": 4096})
register_metric("tmi", tmi, defaults={"eps": 1e-4})
register_metric("lfc", lfc, defaults={"sample_cap": 4096})
