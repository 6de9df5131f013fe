"""Transferability metric implementations behind a uniform registry."""

from . import label_based  # noqa: F401  (registration side effects, order = registry order)
from . import feature_based  # noqa: F401
from .feature_based import gbc, h_score, lfc, logme, parc, tmi, transrate
from .label_based import leep, nce, nleep, num_c
from .registry import (
    DISTANCE_REGISTRY,
    HIGHER_BETTER,
    LOWER_BETTER,
    METRIC_REGISTRY,
    BatchResult,
    DistanceScore,
    MetricDescriptor,
    MetricScore,
    compute_metric,
    distance_ids,
    metric_ids,
    orientation_of,
    register_distance,
    register_metric,
    run_metrics,
)

__all__ = [
    "BatchResult",
    "DISTANCE_REGISTRY",
    "DistanceScore",
    "HIGHER_BETTER",
    "LOWER_BETTER",
    "METRIC_REGISTRY",
    "MetricDescriptor",
    "MetricScore",
    "compute_metric",
    "distance_ids",
    "gbc",
    "h_score",
    "leep",
    "lfc",
    "logme",
    "metric_ids",
    "nce",
    "nleep",
    "num_c",
    "orientation_of",
    "parc",
    "register_distance",
    "register_metric",
    "run_metrics",
    "tmi",
    "transrate",
]
