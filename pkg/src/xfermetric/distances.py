"""Distances between a source and a target embedding bundle.

All distances registered here are lower-better: smaller values indicate
closer domains and hence a larger expected benefit from transfer.  The
evaluation harness negates them before correlating with performance.
"""

from __future__ import annotations

import time

import numpy as np

from .bundle import EmbeddingBundle
from .metrics.registry import DISTANCE_REGISTRY, DistanceScore, register_distance
from .numerics import DEFAULT_T_GRID, heat_trace, ot_exact, reg_covariance, sqrtm_psd_product


def _check_dims(source: EmbeddingBundle, target: EmbeddingBundle) -> None:
    if source.d != target.d:
        raise ValueError(
            f"feature dimension mismatch: source d={source.d}, target d={target.d}"
        )


def fid(source, target, seed: int = 0, eps: float = 1e-6) -> float:
    """Fréchet distance between Gaussian fits of the two feature clouds."""
    _check_dims(source, target)
    if source.n < 2 or target.n < 2:
        raise ValueError("fid needs at least 2 samples per bundle")
    xs = source.features.astype(np.float64)
    xt = target.features.astype(np.float64)
    mu_s, mu_t = xs.mean(axis=0), xt.mean(axis=0)
    cov_s = reg_covariance(xs, eps)
    cov_t = reg_covariance(xt, eps)
    value = (
        float(((mu_s - mu_t) ** 2).sum())
        + float(np.trace(cov_s) + np.trace(cov_t))
        - 2.0 * sqrtm_psd_product(cov_s, cov_t)
    )
    return max(value, 0.0)


def _poly_kernel(a: np.ndarray, b: np.ndarray, degree: int) -> np.ndarray:
    return ((a @ b.T) / a.shape[1] + 1.0) ** degree


def _mmd2_unbiased(x: np.ndarray, y: np.ndarray, degree: int) -> float:
    m, w = x.shape[0], y.shape[0]
    kxx = _poly_kernel(x, x, degree)
    kyy = _poly_kernel(y, y, degree)
    kxy = _poly_kernel(x, y, degree)
    sum_xx = kxx.sum() - np.trace(kxx)
    sum_yy = kyy.sum() - np.trace(kyy)
    return float(sum_xx / (m * (m - 1)) + sum_yy / (w * (w - 1)) - 2.0 * kxy.mean())


def kid(source, target, seed: int = 0, degree: int = 3, blocks: int = 10,
        block_size: int | None = None) -> float:
    """Polynomial-kernel MMD^2 between the bundles, averaged over seeded
    subsampled blocks.  The unbiased estimator can be slightly negative."""
    _check_dims(source, target)
    if source.n < 2 or target.n < 2:
        raise ValueError("kid needs at least 2 samples per bundle")
    xs = source.features.astype(np.float64)
    xt = target.features.astype(np.float64)
    size = block_size or min(source.n, target.n, 1000)
    size = min(size, source.n, target.n)
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(blocks):
        bs = xs[rng.choice(source.n, size=size, replace=False)] if size < source.n else xs
        bt = xt[rng.choice(target.n, size=size, replace=False)] if size < target.n else xt
        values.append(_mmd2_unbiased(bs, bt, degree))
    return float(np.mean(values))


def _class_clusters(bundle) -> tuple[np.ndarray, np.ndarray]:
    labels = bundle.labels
    classes = [c for c in range(bundle.num_classes) if np.any(labels == c)]
    if not classes:
        raise ValueError("bundle has no class clusters")
    x = bundle.features.astype(np.float64)
    means = np.stack([x[labels == c].mean(axis=0) for c in classes])
    weights = np.array([(labels == c).sum() for c in classes], dtype=np.float64)
    return means, weights / weights.sum()


def emd(source, target, seed: int = 0, ground: str = "euclidean") -> float:
    """Exact earth mover's distance between class-mean clusters weighted
    by class frequency."""
    _check_dims(source, target)
    mu_s, w_s = _class_clusters(source)
    mu_t, w_t = _class_clusters(target)
    if ground == "euclidean":
        diff = mu_s[:, None, :] - mu_t[None, :, :]
        cost = np.sqrt((diff**2).sum(axis=2))
    elif ground == "cosine":
        ns = mu_s / np.linalg.norm(mu_s, axis=1, keepdims=True)
        nt = mu_t / np.linalg.norm(mu_t, axis=1, keepdims=True)
        cost = np.clip(1.0 - ns @ nt.T, 0.0, None)
    else:
        raise ValueError(f"unknown ground metric: {ground}")
    return ot_exact(w_s, w_t, cost)


def ids(source, target, seed: int = 0, sample_cap: int = 10000) -> float:
    """Mean distance from each (L2-normalized) target sample to its
    closest source sample.  Asymmetric by construction."""
    _check_dims(source, target)
    if source.n < 1 or target.n < 1:
        raise ValueError("ids needs non-empty bundles")
    rng = np.random.default_rng(seed)

    def prep(bundle):
        x = bundle.features.astype(np.float64)
        if bundle.n > sample_cap:
            x = x[rng.choice(bundle.n, size=sample_cap, replace=False)]
        norms = np.linalg.norm(x, axis=1)
        if np.any(norms == 0):
            raise ValueError("zero-norm feature vector")
        return x / norms[:, None]

    xs = prep(source)
    xt = prep(target)
    total = 0.0
    block = 2048
    src_sq = (xs * xs).sum(axis=1)
    for start in range(0, xt.shape[0], block):
        stop = min(start + block, xt.shape[0])
        chunk = xt[start:stop]
        d2 = (chunk * chunk).sum(axis=1)[:, None] + src_sq[None, :] - 2.0 * chunk @ xs.T
        total += np.sqrt(np.maximum(d2.min(axis=1), 0.0)).sum()
    return total / xt.shape[0]


def imd(source, target, seed: int = 0, t_grid: np.ndarray | None = None,
        graph_k: int = 5, lanczos_steps: int = 10, probes: int = 16) -> float:
    """Spectral discrepancy of the two k-NN-graph heat traces, weighted by
    exp(-2 (t + 1/t)) over the t grid."""
    _check_dims(source, target)
    t = DEFAULT_T_GRID if t_grid is None else np.asarray(t_grid, dtype=np.float64)
    h_s = heat_trace(source.features, t, graph_k, lanczos_steps, probes, seed)
    h_t = heat_trace(target.features, t, graph_k, lanczos_steps, probes, seed)
    return float((np.exp(-2.0 * (t + 1.0 / t)) * np.abs(h_s - h_t)).sum())


def compute_distance(source, target, metric_id: str, seed: int = 0, **overrides) -> DistanceScore:
    if metric_id not in DISTANCE_REGISTRY:
        raise KeyError(f"unknown distance metric: {metric_id}")
    desc = DISTANCE_REGISTRY[metric_id]
    params = dict(desc.defaults)
    params.update(overrides)
    start = time.perf_counter()
    value = desc.fn(source, target, seed=seed, **params)
    return DistanceScore(
        metric=metric_id,
        value=float(value),
        wall_time_s=time.perf_counter() - start,
        asymmetric=desc.asymmetric,
        hyperparameters=params,
    )


def mean_dist(table: dict[str, list[float]]) -> list[float]:
    """Combine per-metric distance columns into one per-candidate score.

    Raw distance scales differ by orders of magnitude, so each column is
    z-scored across the candidate set (zero-variance columns become all
    zeros) before averaging.  Needs at least 2 candidates and no missing
    entries.
    """
    if not table:
        raise ValueError("mean-dist needs at least one metric column")
    lengths = {len(v) for v in table.values()}
    if len(lengths) != 1:
        raise ValueError("mean-dist columns must be equal length")
    n = lengths.pop()
    if n < 2:
        raise ValueError("mean-dist needs >= 2 candidates")
    cols = []
    for metric in sorted(table):
        col = np.asarray(table[metric], dtype=np.float64)
        if not np.all(np.isfinite(col)):
            raise ValueError(f"mean-dist column {metric} has missing entries")
        std = col.std()
        cols.append((col - col.mean()) / std if std > 0 else np.zeros(n))
    return list(np.mean(cols, axis=0))


register_distance("fid", fid, defaults={"eps": 1e-6})
register_distance("kid", kid, defaults={"degree": 3, "blocks": 10, "block_size": None})
register_distance("emd", emd, defaults={"ground": "euclidean"})
register_distance("ids", ids, defaults={"sample_cap": 10000}, asymmetric=True)
register_distance(
    "imd",
    imd,
    defaults={"t_grid": None, "graph_k": 5, "lanczos_steps": 10, "probes": 16},
)
