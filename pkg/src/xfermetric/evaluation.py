"""Correlating metric scores with measured transfer performance.

Performance tables carry perf(P) (the fine-tuned model's measured
performance) and perf(RI) (the same architecture trained from random
initialization).  The relative transfer performance
RTP = (perf(P) - perf(RI)) / perf(P) is the net gain from transfer;
TG = 1 - RTP is the transfer gap.

``evaluate`` correlates orientation-adjusted score columns against
either perf(P) (absolute target) or RTP (relative target) under one of
four measures: weighted Kendall's tau, Kendall's tau-b, Pearson's rho,
or Rel@1.  Lower-better columns (all domain distances) are negated
before correlating, so one code path serves both orientations.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import kendalltau

from .metrics.registry import orientation_of

TARGET_ABSOLUTE = "absolute"
TARGET_RELATIVE = "relative"
MEASURES = ("tauw", "tau", "pearson", "rel1")


@dataclass(frozen=True)
class TransferRecord:
    candidate: str
    perf_p: float
    perf_ri: float
    est_p: float | None = None
    est_ri: float | None = None


def rtp(record: TransferRecord) -> float:
    """Relative transfer performance: (perf(P) - perf(RI)) / perf(P)."""
    if record.perf_p <= 0:
        raise ValueError(f"perf_p must be positive for RTP (candidate {record.candidate})")
    return (record.perf_p - record.perf_ri) / record.perf_p


def tg(record: TransferRecord) -> float:
    """Transfer gap: the complement 1 - RTP."""
    return 1.0 - rtp(record)


def rtp_metric(record: TransferRecord, lower_better: bool = False) -> float:
    """RTP computed from metric estimates: (est(P) - est(RI)) / est(P).

    Lower-better metric scores are negated before applying the formula;
    a nonpositive denominator after orientation adjustment invalidates
    the ratio's meaning and raises.
    """
    if record.est_p is None or record.est_ri is None:
        raise ValueError(f"candidate {record.candidate} is missing est_p/est_ri")
    est_p, est_ri = record.est_p, record.est_ri
    if lower_better:
        est_p, est_ri = -est_p, -est_ri
    if est_p == 0:
        raise ValueError(f"est_p of candidate {record.candidate} is zero")
    if est_p < 0:
        raise ValueError(
            f"negative est_p denominator for candidate {record.candidate}; RTP undefined"
        )
    return (est_p - est_ri) / est_p


def _descending_average_ranks(values: np.ndarray) -> np.ndarray:
    """0-based ranks by descending value; tied values share their mean rank."""
    order = np.argsort(-values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    sorted_vals = values[order]
    while i < values.size:
        j = i
        while j < values.size and sorted_vals[j] == sorted_vals[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + j - 1)
        i = j
    return ranks


def weighted_kendall_tau(scores, perfs, symmetrize: bool = False) -> float:
    """Kendall correlation with hyperbolic weights on performance ranks.

    Pair (i, j) carries weight 1/(r_i + 1) + 1/(r_j + 1) where r is the
    0-based descending performance rank (ties averaged), so correctly
    ordering the top performers counts most.  Tied pairs in either list
    contribute zero to the numerator but keep their weight in the
    denominator.  ``symmetrize`` averages with the variant whose ranks
    come from the score list instead.
    """
    s = np.asarray(scores, dtype=np.float64)
    p = np.asarray(perfs, dtype=np.float64)
    if s.shape != p.shape:
        raise ValueError("score and performance lists must have equal length")
    if s.size < 2:
        raise ValueError("need at least 2 candidates")
    if symmetrize:
        return 0.5 * (weighted_kendall_tau(s, p) + weighted_kendall_tau(p, s))

    weights = 1.0 / (_descending_average_ranks(p) + 1.0)
    num = 0.0
    den = 0.0
    for i in range(s.size):
        for j in range(i + 1, s.size):
            w = weights[i] + weights[j]
            num += w * np.sign(s[i] - s[j]) * np.sign(p[i] - p[j])
            den += w
    return float(num / den)


def kendall_tau(scores, perfs) -> float:
    """Tie-corrected Kendall's tau-b."""
    s = np.asarray(scores, dtype=np.float64)
    p = np.asarray(perfs, dtype=np.float64)
    if s.shape != p.shape:
        raise ValueError("score and performance lists must have equal length")
    if s.size < 2:
        raise ValueError("need at least 2 candidates")
    value = kendalltau(s, p).statistic
    if math.isnan(value):
        raise ValueError("kendall tau undefined (a list is entirely tied)")
    return float(value)


def pearson_rho(scores, perfs) -> float:
    """Product-moment correlation."""
    s = np.asarray(scores, dtype=np.float64)
    p = np.asarray(perfs, dtype=np.float64)
    if s.shape != p.shape:
        raise ValueError("score and performance lists must have equal length")
    if s.size < 2:
        raise ValueError("need at least 2 candidates")
    if s.std() == 0 or p.std() == 0:
        raise ValueError("pearson correlation undefined for a constant list")
    return float(np.corrcoef(s, p)[0, 1])


def rel_at_1(scores, perfs, optimistic: bool = True) -> float:
    """Performance of the top-scored candidate relative to the best
    achievable performance.  Score ties resolve to the higher-performing
    candidate by default (optimistic); set ``optimistic=False`` for the
    pessimistic variant."""
    s = np.asarray(scores, dtype=np.float64)
    p = np.asarray(perfs, dtype=np.float64)
    if s.shape != p.shape or s.size < 1:
        raise ValueError("need aligned non-empty score/performance lists")
    best = p.max()
    if best <= 0:
        raise ValueError("best performance must be positive")
    top = np.flatnonzero(s == s.max())
    pick = p[top].max() if optimistic else p[top].min()
    return float(pick / best)


_MEASURE_FNS = {
    "tauw": weighted_kendall_tau,
    "tau": kendall_tau,
    "pearson": pearson_rho,
    "rel1": rel_at_1,
}


@dataclass(frozen=True)
class MetricCorrelation:
    metric: str
    value: float
    n_effective: int


@dataclass(frozen=True)
class CorrelationReport:
    target: str
    measure: str
    n_candidates: int
    results: tuple[MetricCorrelation, ...]

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "measure": self.measure,
            "n_candidates": self.n_candidates,
            "results": [
                {"metric": r.metric, "value": r.value, "n_effective": r.n_effective}
                for r in self.results
            ],
        }


@dataclass
class ScoreTable:
    """metric id -> {candidate id -> score}; missing entries simply absent."""

    columns: dict[str, dict[str, float]] = field(default_factory=dict)

    def add(self, candidate: str, metric: str, value: float) -> None:
        self.columns.setdefault(metric, {})[candidate] = value

    def candidates(self) -> set[str]:
        out: set[str] = set()
        for col in self.columns.values():
            out.update(col)
        return out


@dataclass
class PerfTable:
    records: dict[str, TransferRecord] = field(default_factory=dict)

    def add(self, record: TransferRecord) -> None:
        self.records[record.candidate] = record


def evaluate(
    scores: ScoreTable,
    perfs: PerfTable,
    target: str = TARGET_ABSOLUTE,
    measure: str = "tauw",
    invert_lower_better: bool = True,
    orientations: dict[str, str] | None = None,
) -> CorrelationReport:
    """Correlate every score column with performance.

    ``target`` picks perf(P) (absolute) or RTP (relative) as the
    performance axis.  Lower-better columns are negated first unless
    ``invert_lower_better`` is disabled; ``orientations`` overrides the
    registry lookup per metric id.  Candidates missing a given metric
    drop out of that metric's correlation only, and the per-metric
    effective count is reported.
    """
    if target not in (TARGET_ABSOLUTE, TARGET_RELATIVE):
        raise ValueError(f"unknown prediction target: {target}")
    if measure not in _MEASURE_FNS:
        raise ValueError(f"unknown measure: {measure}")
    orientations = orientations or {}

    unknown = scores.candidates() - set(perfs.records)
    if unknown:
        raise ValueError(f"candidates missing from the performance table: {sorted(unknown)}")
    candidates = sorted(scores.candidates())
    if len(candidates) < 2:
        raise ValueError("need at least 2 aligned candidates")

    perf_axis = {}
    for cand in candidates:
        record = perfs.records[cand]
        perf_axis[cand] = record.perf_p if target == TARGET_ABSOLUTE else rtp(record)

    results = []
    fn = _MEASURE_FNS[measure]
    for metric in sorted(scores.columns):
        col = scores.columns[metric]
        aligned = [c for c in candidates if c in col]
        if len(aligned) < 2:
            raise ValueError(f"metric {metric} has fewer than 2 scored candidates")
        vals = np.array([col[c] for c in aligned])
        orientation = orientations.get(metric, orientation_of(metric))
        if invert_lower_better and orientation == "lower-better":
            vals = -vals
        perf_vals = np.array([perf_axis[c] for c in aligned])
        results.append(
            MetricCorrelation(metric=metric, value=fn(vals, perf_vals), n_effective=len(aligned))
        )
    return CorrelationReport(
        target=target,
        measure=measure,
        n_candidates=len(candidates),
        results=tuple(results),
    )


def load_perf_csv(path: str) -> PerfTable:
    """Read `candidate,perf_p,perf_ri[,est_p,est_ri]` rows."""
    table = PerfTable()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"candidate", "perf_p", "perf_ri"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"performance CSV must have columns {sorted(required)}")
        for row in reader:
            table.add(
                TransferRecord(
                    candidate=row["candidate"],
                    perf_p=float(row["perf_p"]),
                    perf_ri=float(row["perf_ri"]),
                    est_p=float(row["est_p"]) if row.get("est_p") else None,
                    est_ri=float(row["est_ri"]) if row.get("est_ri") else None,
                )
            )
    return table


def load_scores_csv(path: str) -> ScoreTable:
    """Read `candidate,metric,value` rows."""
    table = ScoreTable()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"candidate", "metric", "value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"score CSV must have columns {sorted(required)}")
        for row in reader:
            table.add(row["candidate"], row["metric"], float(row["value"]))
    return table


def report_to_json(report: CorrelationReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"
