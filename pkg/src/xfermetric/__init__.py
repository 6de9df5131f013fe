"""Transferability metrics, domain distances, and correlation evaluation
for pre-extracted embedding bundles."""

from . import distances, knn, metrics  # noqa: F401  (registry side effects)
from .bundle import (
    BundleFormatError,
    EmbeddingBundle,
    read_bundle,
    split_train_eval,
    stratified_kfold,
    write_bundle,
)
from .distances import compute_distance, mean_dist
from .evaluation import (
    CorrelationReport,
    PerfTable,
    ScoreTable,
    TransferRecord,
    evaluate,
    kendall_tau,
    pearson_rho,
    rel_at_1,
    rtp,
    rtp_metric,
    tg,
    weighted_kendall_tau,
)
from .knn import KnnConfig, knn_score, knn_sweep
from .metrics import MetricScore, compute_metric, metric_ids, run_metrics

__version__ = "0.1.0"

__all__ = [
    "BundleFormatError",
    "CorrelationReport",
    "EmbeddingBundle",
    "KnnConfig",
    "MetricScore",
    "PerfTable",
    "ScoreTable",
    "TransferRecord",
    "compute_distance",
    "compute_metric",
    "evaluate",
    "kendall_tau",
    "knn_score",
    "knn_sweep",
    "mean_dist",
    "metric_ids",
    "pearson_rho",
    "read_bundle",
    "rel_at_1",
    "rtp",
    "rtp_metric",
    "run_metrics",
    "split_train_eval",
    "stratified_kfold",
    "tg",
    "weighted_kendall_tau",
    "write_bundle",
]
