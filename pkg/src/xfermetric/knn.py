"""k-nearest-neighbor transferability score.

The target training features are split into a reference part and a
held-out part; held-out samples are classified by cosine-similarity
nearest neighbors from the reference part and the resulting accuracy is
the transferability score.  A 3-fold cross-validation mode averages the
per-fold accuracy of the same procedure.

The top-k selection and vote run through a compiled kernel when the
extension built, with a pure-numpy fallback selected at import time
(`XFERMETRIC_PURE_PYTHON=1` forces the fallback).  Both produce
identical predictions.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import _nnkernels_py
from .bundle import EmbeddingBundle, split_train_eval, stratified_kfold
from .metrics.registry import MetricScore, register_metric

log = logging.getLogger(__name__)

if os.environ.get("XFERMETRIC_PURE_PYTHON"):
    _kernels = _nnkernels_py
else:
    try:
        from . import _nnkernels as _kernels  # type: ignore[no-redef]
    except ImportError:
        _kernels = _nnkernels_py

KERNEL_IMPL = "compiled" if _kernels.__name__.endswith("._nnkernels") else "python"

QUERY_BLOCK = 512

MODE_SINGLE = "single-split"
MODE_CV3 = "3-fold-cv"

# count ties break by higher summed similarity, then lower class index;
# rank ties at the k boundary break by lower sample index
TIE_BREAK_DEFAULT = "count-similarity-index"


@dataclass(frozen=True)
class KnnConfig:
    k: int = 200
    fraction: float = 0.8
    seed: int = 0
    mode: str = MODE_SINGLE
    stratified: bool = True
    weighted_vote: bool = False
    tie_break: str = TIE_BREAK_DEFAULT

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0.0 < self.fraction < 1.0:
            raise ValueError("split fraction must be in (0, 1)")
        if self.mode not in (MODE_SINGLE, MODE_CV3):
            raise ValueError(f"unknown k-NN mode: {self.mode}")
        if self.tie_break != TIE_BREAK_DEFAULT:
            raise ValueError(f"unknown tie-break rule: {self.tie_break}")


def _unit_rows(features: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(features, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise ValueError(f"zero-norm feature vector at sample index {int(bad[0])}")
    return x / norms[:, None]


def _rank_neighbors(
    queries: np.ndarray, refs: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Cosine-rank the reference rows for every query row.

    Returns (indices, similarities), both (n_queries, k'), ordered by
    similarity descending with index-ascending tie-breaks;
    k' = min(k, len(refs)) with any clamping logged.
    """
    k_eff = min(k, refs.shape[0])
    if k_eff < k:
        log.info("k=%d clamped to reference size %d", k, refs.shape[0])
    idx = np.empty((queries.shape[0], k_eff), dtype=np.int64)
    sims = np.empty((queries.shape[0], k_eff), dtype=np.float64)
    for start in range(0, queries.shape[0], QUERY_BLOCK):
        stop = min(start + QUERY_BLOCK, queries.shape[0])
        block = np.ascontiguousarray(queries[start:stop] @ refs.T)
        top = _kernels.top_k_block(block, k_eff)
        idx[start:stop] = top
        sims[start:stop] = np.take_along_axis(block, top, axis=1)
    return idx, sims


def _vote_accuracy(
    ref_labels: np.ndarray,
    true_labels: np.ndarray,
    top_idx: np.ndarray,
    top_sims: np.ndarray,
    k: int,
    num_classes: int,
    weighted: bool,
) -> float:
    top_labels = np.ascontiguousarray(ref_labels[top_idx])
    preds = _kernels.vote_block(top_labels, np.ascontiguousarray(top_sims), k, num_classes, weighted)
    return float((preds == true_labels).mean())


def _split_accuracy(bundle, s1, s2, config: KnnConfig, unit: np.ndarray) -> float:
    idx, sims = _rank_neighbors(unit[s2], unit[s1], config.k)
    return _vote_accuracy(
        bundle.labels[s1], bundle.labels[s2], idx, sims,
        config.k, bundle.num_classes, config.weighted_vote,
    )


def knn_score(bundle: EmbeddingBundle, config: KnnConfig | None = None) -> MetricScore:
    """Held-out cosine k-NN accuracy of the bundle's features."""
    config = config or KnnConfig()
    if bundle.n < 2:
        raise ValueError("k-NN score needs at least 2 samples")
    start = time.perf_counter()
    unit = _unit_rows(bundle.features)

    if config.mode == MODE_SINGLE:
        s1, s2 = split_train_eval(bundle, config.fraction, config.seed, config.stratified)
        value = _split_accuracy(bundle, s1, s2, config, unit)
    else:
        folds = stratified_kfold(bundle.labels, 3, config.seed)
        accs = []
        for f, eval_idx in enumerate(folds):
            ref_idx = np.sort(np.concatenate([folds[g] for g in range(3) if g != f]))
            accs.append(_split_accuracy(bundle, ref_idx, eval_idx, config, unit))
        value = float(np.mean(accs))

    return MetricScore(
        metric="knn",
        value=value,
        wall_time_s=time.perf_counter() - start,
        hyperparameters={
            "k": config.k,
            "fraction": config.fraction,
            "mode": config.mode,
            "stratified": config.stratified,
            "weighted_vote": config.weighted_vote,
            "seed": config.seed,
        },
    )


def knn_sweep(
    bundle: EmbeddingBundle, k_values: list[int], config: KnnConfig | None = None
) -> list[tuple[int, float]]:
    """Score one fixed split under several k values.

    The neighbor ranking is computed once for max(k_values) and each k
    re-votes on its prefix, so the sweep isolates the effect of k.
    """
    config = config or KnnConfig()
    if not k_values:
        return []
    if any(k < 1 for k in k_values):
        raise ValueError("k values must be at least 1")
    unit = _unit_rows(bundle.features)
    s1, s2 = split_train_eval(bundle, config.fraction, config.seed, config.stratified)
    idx, sims = _rank_neighbors(unit[s2], unit[s1], max(k_values))
    out = []
    for k in k_values:
        acc = _vote_accuracy(
            bundle.labels[s1], bundle.labels[s2], idx, sims,
            k, bundle.num_classes, config.weighted_vote,
        )
        out.append((k, acc))
    return out


def _knn_metric(bundle, seed: int = 0, k: int = 200, fraction: float = 0.8,
                mode: str = MODE_SINGLE, stratified: bool = True,
                weighted_vote: bool = False) -> float:
    config = KnnConfig(k=k, fraction=fraction, seed=seed, mode=mode,
                       stratified=stratified, weighted_vote=weighted_vote)
    return knn_score(bundle, config).value


register_metric(
    "knn",
    _knn_metric,
    defaults={"k": 200, "fraction": 0.8, "mode": MODE_SINGLE,
              "stratified": True, "weighted_vote": False},
)
