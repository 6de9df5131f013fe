"""Transferability metrics driven by labels and source-softmax predictions.

All scores here are higher-better.  The log-likelihood style metrics
are nonpositive by construction and reach 0 exactly when the target
labels are a deterministic function of the (pseudo or soft) source
assignment.
"""

from __future__ import annotations

import numpy as np

from ..numerics import gmm_fit
from .registry import register_metric


def num_c(bundle, seed: int = 0) -> float:
    """Inverse class count: fewer target classes, easier transfer."""
    return 1.0 / bundle.num_classes


def nce(bundle, seed: int = 0) -> float:
    """Negative conditional entropy of target labels given argmax source labels."""
    if bundle.predictions is None:
        raise ValueError("nce requires source predictions")
    z = bundle.predictions.argmax(axis=1)
    y = bundle.labels
    n = y.size
    value = 0.0
    for zv in np.unique(z):
        mask = z == zv
        pz = mask.sum() / n
        cond = np.bincount(y[mask]) / mask.sum()
        cond = cond[cond > 0]
        value += pz * float((cond * np.log(cond)).sum())
    return value


def leep(bundle, seed: int = 0) -> float:
    """Average log-likelihood of target labels under the empirical
    source-to-target conditional composed with the soft source predictions."""
    if bundle.predictions is None:
        raise ValueError("leep requires source predictions")
    theta = bundle.predictions.astype(np.float64)
    y = bundle.labels
    n, num_z = theta.shape
    c = bundle.num_classes

    joint = np.zeros((c, num_z))
    for cls in range(c):
        rows = theta[y == cls]
        if rows.size:
            joint[cls] = rows.sum(axis=0)
    joint /= n
    pz = joint.sum(axis=0)
    keep = pz > 0
    cond = np.zeros_like(joint)
    cond[:, keep] = joint[:, keep] / pz[keep]

    likelihood = (cond[y][:, keep] * theta[:, keep]).sum(axis=1)
    return float(np.log(likelihood).mean())


def nleep(bundle, seed: int = 0, n_components: int | None = None, pca_energy: float = 0.8) -> float:
    """LEEP computed against GMM cluster responsibilities instead of the
    source classifier: PCA to the given energy, fit a diagonal GMM with
    (by default) one component per target class, then apply the LEEP
    formula to the posterior responsibilities."""
    k = bundle.num_classes if n_components is None else n_components
    if bundle.n < k:
        raise ValueError(f"nleep needs at least {k} samples")
    x = bundle.features.astype(np.float64)
    x = x - x.mean(axis=0)
    # project onto the smallest leading subspace holding pca_energy of variance
    u, s, _ = np.linalg.svd(x, full_matrices=False)
    energy = np.cumsum(s**2)
    if energy[-1] > 0:
        rank = int(np.searchsorted(energy / energy[-1], pca_energy) + 1)
        x = u[:, :rank] * s[:rank]
    model = gmm_fit(x, k, seed=seed)
    resp = model.responsibilities(x)

    y = bundle.labels
    joint = np.zeros((bundle.num_classes, k))
    for cls in range(bundle.num_classes):
        rows = resp[y == cls]
        if rows.size:
            joint[cls] = rows.sum(axis=0)
    joint /= bundle.n
    pz = joint.sum(axis=0)
    keep = pz > 0
    cond = np.zeros_like(joint)
    cond[:, keep] = joint[:, keep] / pz[keep]
    likelihood = (cond[y][:, keep] * resp[:, keep]).sum(axis=1)
    return float(np.log(np.maximum(likelihood, 1e-300)).mean())


register_metric("numc", num_c)
register_metric("nce", nce, requires_predictions=True)
register_metric("leep", leep, requires_predictions=True)
register_metric("nleep", nleep, defaults={"n_components": None, "pca_energy": 0.8})
