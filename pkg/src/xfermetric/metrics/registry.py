"""Uniform registry for transferability metrics and domain distances.

Single-bundle transferability metrics live in METRIC_REGISTRY and are
all higher-better; bundle-pair domain distances live in
DISTANCE_REGISTRY and are all lower-better.  The evaluation harness
uses :func:`orientation_of` to negate lower-better score columns before
correlating them with performance.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

log = logging.getLogger(__name__)

HIGHER_BETTER = "higher-better"
LOWER_BETTER = "lower-better"


@dataclass(frozen=True)
class MetricDescriptor:
    id: str
    fn: Callable
    orientation: str
    requires_predictions: bool = False
    defaults: dict = field(default_factory=dict)
    asymmetric: bool = False  # pair metrics only: value depends on argument order


@dataclass(frozen=True)
class MetricScore:
    metric: str
    value: float
    wall_time_s: float
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.value == self.value and abs(self.value) != float("inf")):
            raise ValueError(f"metric {self.metric} produced a non-finite value")
        if self.wall_time_s < 0:
            raise ValueError("wall time must be nonnegative")


@dataclass(frozen=True)
class DistanceScore:
    metric: str
    value: float
    wall_time_s: float
    asymmetric: bool = False
    hyperparameters: dict = field(default_factory=dict)


METRIC_REGISTRY: dict[str, MetricDescriptor] = {}
DISTANCE_REGISTRY: dict[str, MetricDescriptor] = {}


def register_metric(
    metric_id: str,
    fn: Callable,
    requires_predictions: bool = False,
    defaults: dict | None = None,
) -> None:
    if metric_id in METRIC_REGISTRY or metric_id in DISTANCE_REGISTRY:
        raise ValueError(f"duplicate metric id: {metric_id}")
    METRIC_REGISTRY[metric_id] = MetricDescriptor(
        id=metric_id,
        fn=fn,
        orientation=HIGHER_BETTER,
        requires_predictions=requires_predictions,
        defaults=dict(defaults or {}),
    )


def register_distance(
    metric_id: str,
    fn: Callable,
    defaults: dict | None = None,
    asymmetric: bool = False,
) -> None:
    if metric_id in METRIC_REGISTRY or metric_id in DISTANCE_REGISTRY:
        raise ValueError(f"duplicate metric id: {metric_id}")
    DISTANCE_REGISTRY[metric_id] = MetricDescriptor(
        id=metric_id,
        fn=fn,
        orientation=LOWER_BETTER,
        defaults=dict(defaults or {}),
        asymmetric=asymmetric,
    )


def metric_ids() -> list[str]:
    """Registered transferability metric ids, in registration order."""
    return list(METRIC_REGISTRY)


def distance_ids() -> list[str]:
    return list(DISTANCE_REGISTRY)


def orientation_of(metric_id: str) -> str:
    """Declared orientation; unknown (external) score columns default to higher-better."""
    if metric_id in METRIC_REGISTRY:
        return METRIC_REGISTRY[metric_id].orientation
    if metric_id in DISTANCE_REGISTRY:
        return DISTANCE_REGISTRY[metric_id].orientation
    return HIGHER_BETTER


@dataclass
class BatchResult:
    scores: list[MetricScore]
    failures: dict[str, str]


def compute_metric(bundle, metric_id: str, seed: int = 0, **overrides) -> MetricScore:
    """Run one registered metric on a bundle, timing the call."""
    if metric_id not in METRIC_REGISTRY:
        raise KeyError(f"unknown metric: {metric_id}")
    desc = METRIC_REGISTRY[metric_id]
    if desc.requires_predictions and bundle.predictions is None:
        raise ValueError(f"metric {metric_id} requires source predictions")
    params = dict(desc.defaults)
    params.update(overrides)
    start = time.perf_counter()
    value = desc.fn(bundle, seed=seed, **params)
    elapsed = time.perf_counter() - start
    return MetricScore(metric=metric_id, value=float(value), wall_time_s=elapsed,
                       hyperparameters=params)


def run_metrics(
    bundle,
    ids: list[str],
    overrides: dict[str, dict] | None = None,
    seed: int = 0,
    threads: int = 1,
) -> BatchResult:
    """Evaluate several metrics on one bundle; per-metric failures are
    recorded instead of aborting the batch.  Scores come back in request
    order."""
    unknown = [i for i in ids if i not in METRIC_REGISTRY]
    if unknown:
        raise KeyError(f"unknown metric: {unknown[0]}")
    overrides = overrides or {}

    def one(metric_id):
        return compute_metric(bundle, metric_id, seed=seed, **overrides.get(metric_id, {}))

    results: list[MetricScore | None] = [None] * len(ids)
    failures: dict[str, str] = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(one, metric_id) for metric_id in ids]
            for i, fut in enumerate(futures):
                try:
                    results[i] = fut.result()
                except Exception as exc:
                    failures[ids[i]] = str(exc)
    else:
        for i, metric_id in enumerate(ids):
            try:
                results[i] = one(metric_id)
            except Exception as exc:
                failures[metric_id] = str(exc)
    if failures:
        log.warning("metric failures: %s", failures)
    return BatchResult(scores=[r for r in results if r is not None], failures=failures)
