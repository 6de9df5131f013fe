"""Command-line front end.

Subcommands: ``score`` (transferability metrics on one bundle),
``distance`` (domain distances between bundles), ``rtp`` (derive
RTP/TG from a performance table), ``evaluate`` (correlate scores with
performance), ``sweep-k`` (k-NN robustness sweep), ``bench`` (per-metric
runtime report), ``report`` (render a correlation report as SVG).

Runs are deterministic by default: every subcommand uses the fixed seed
20240 unless --seed is given, and rerunning with identical arguments
reproduces byte-identical CSV/JSON output.  ``XFERMETRIC_THREADS`` caps
metric-level parallelism (0 or unset picks a sensible automatic value).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import distances as dist_mod
from . import evaluation, reporting
from .bundle import read_bundle
from .evaluation import TransferRecord, rtp, rtp_metric, tg
from .knn import MODE_CV3, MODE_SINGLE, KnnConfig, knn_sweep
from .metrics.registry import DISTANCE_REGISTRY, METRIC_REGISTRY, run_metrics

DEFAULT_SEED = 20240


def thread_count() -> int:
    raw = os.environ.get("XFERMETRIC_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value <= 0:
        return min(os.cpu_count() or 1, 8)
    return value


def _parse_set_overrides(pairs: list[str]) -> dict[str, dict]:
    """--set metric.param=value entries into nested override dicts."""
    out: dict[str, dict] = {}
    for pair in pairs:
        try:
            key, raw = pair.split("=", 1)
            metric, param = key.split(".", 1)
        except ValueError:
            raise ValueError(f"bad --set entry (want metric.param=value): {pair!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        out.setdefault(metric, {})[param] = value
    return out


def _expand_metric_ids(raw: str, registry: dict) -> list[str]:
    if raw == "all":
        return list(registry)
    ids = [part.strip() for part in raw.split(",") if part.strip()]
    for metric_id in ids:
        if metric_id not in registry:
            raise ValueError(f"unknown metric: {metric_id}")
    return ids


def _knn_overrides(args) -> dict:
    overrides = {}
    if args.k is not None:
        overrides["k"] = args.k
    if args.split_fraction is not None:
        overrides["fraction"] = args.split_fraction
    if args.cv3:
        overrides["mode"] = MODE_CV3
    if args.no_stratify:
        overrides["stratified"] = False
    if args.weighted_vote:
        overrides["weighted_vote"] = True
    return overrides


def _add_knn_flags(parser) -> None:
    parser.add_argument("--k", type=int, default=None, help="neighbor count (default 200)")
    parser.add_argument("--split-fraction", type=float, default=None,
                        help="reference fraction of the split (default 0.8)")
    parser.add_argument("--cv3", action="store_true",
                        help="use stratified 3-fold cross-validation instead of a single split")
    parser.add_argument("--no-stratify", action="store_true",
                        help="disable stratified splitting")
    parser.add_argument("--weighted-vote", action="store_true",
                        help="similarity-weighted vote instead of plain majority")


def cmd_score(args) -> int:
    bundle = read_bundle(args.bundle)
    ids = _expand_metric_ids(args.metrics, METRIC_REGISTRY)
    overrides = _parse_set_overrides(args.set or [])
    knn_over = _knn_overrides(args)
    if knn_over:
        overrides.setdefault("knn", {}).update(knn_over)
    threads = 1 if args.bench else thread_count()
    batch = run_metrics(bundle, ids, overrides=overrides, seed=args.seed, threads=threads)

    for metric_id, message in batch.failures.items():
        print(f"warning: metric {metric_id} failed: {message}", file=sys.stderr)
    if not batch.scores:
        print("error: all metrics failed", file=sys.stderr)
        return 1

    model = args.model or bundle.provenance.get("model", "unknown")
    # wall times populate only under --bench so that default reruns are
    # byte-identical
    rows = [
        {
            "model": model,
            "bundle": bundle.name,
            "metric": s.metric,
            "value": s.value,
            "wall_time_s": s.wall_time_s if args.bench else 0.0,
        }
        for s in batch.scores
    ]
    text = reporting.scores_json(rows) if args.format == "json" else reporting.scores_csv(rows)
    reporting.atomic_write_text(args.out, text)
    if batch.failures and args.strict:
        return 1
    return 0


def cmd_distance(args) -> int:
    source = read_bundle(args.source)
    targets = [read_bundle(path) for path in args.target]
    ids = _expand_metric_ids(args.metrics, DISTANCE_REGISTRY)
    if args.mean and len(targets) < 2:
        print("error: mean-dist needs >= 2 candidates", file=sys.stderr)
        return 1

    rows = []
    per_metric: dict[str, list[float]] = {m: [] for m in ids}
    for target in targets:
        for metric_id in ids:
            score = dist_mod.compute_distance(source, target, metric_id, seed=args.seed)
            per_metric[metric_id].append(score.value)
            rows.append(
                {
                    "source": source.name,
                    "target": target.name,
                    "metric": metric_id,
                    "value": score.value,
                    "wall_time_s": score.wall_time_s if args.bench else 0.0,
                }
            )
    if args.mean:
        combined = dist_mod.mean_dist(per_metric)
        for target, value in zip(targets, combined):
            rows.append(
                {
                    "source": source.name,
                    "target": target.name,
                    "metric": "mean-dist",
                    "value": value,
                    "wall_time_s": 0.0,
                }
            )
    reporting.atomic_write_text(args.out, reporting.distances_csv(rows))
    return 0


def cmd_rtp(args) -> int:
    perf = evaluation.load_perf_csv(args.perf)
    rows = []
    for candidate in sorted(perf.records):
        record = perf.records[candidate]
        row = {
            "candidate": candidate,
            "perf_p": record.perf_p,
            "perf_ri": record.perf_ri,
            "rtp": rtp(record),
            "tg": tg(record),
        }
        if record.est_p is not None and record.est_ri is not None:
            try:
                row["rtp_p"] = rtp_metric(record, lower_better=args.est_lower_better)
            except ValueError as exc:
                print(f"warning: {exc}", file=sys.stderr)
                row["rtp_p"] = None
        rows.append(row)
    reporting.atomic_write_text(args.out, reporting.rtp_csv(rows))
    return 0


def cmd_evaluate(args) -> int:
    scores = evaluation.load_scores_csv(args.scores)
    perf = evaluation.load_perf_csv(args.perf)
    orientations = {m: "lower-better" for m in (args.lower_better or [])}
    report = evaluation.evaluate(
        scores,
        perf,
        target=args.target,
        measure=args.measure,
        invert_lower_better=not args.no_invert,
        orientations=orientations,
    )
    reporting.atomic_write_text(args.out, evaluation.report_to_json(report))
    if args.svg:
        items = [(r.metric, r.value) for r in report.results]
        title = f"{args.measure} vs {args.target} transfer performance"
        reporting.atomic_write_text(args.svg, reporting.svg_bar_chart(items, title))
    return 0


def cmd_sweep_k(args) -> int:
    bundle = read_bundle(args.bundle)
    k_values = [int(part) for part in args.k_values.split(",") if part.strip()]
    config = KnnConfig(
        k=max(k_values),
        fraction=args.split_fraction if args.split_fraction is not None else 0.8,
        seed=args.seed,
        mode=MODE_SINGLE,
        stratified=not args.no_stratify,
        weighted_vote=args.weighted_vote,
    )
    points = knn_sweep(bundle, k_values, config)
    reporting.atomic_write_text(args.out, reporting.sweep_csv(points))
    if args.svg:
        reporting.atomic_write_text(
            args.svg,
            reporting.svg_line_chart(
                [(float(k), v) for k, v in points], title="k-NN score vs k"
            ),
        )
    return 0


def cmd_bench(args) -> int:
    bundle = read_bundle(args.bundle)
    ids = _expand_metric_ids(args.metrics, METRIC_REGISTRY)
    batch = run_metrics(bundle, ids, seed=args.seed, threads=1)
    for metric_id, message in batch.failures.items():
        print(f"warning: metric {metric_id} failed: {message}", file=sys.stderr)
    rows = [
        {
            "model": bundle.provenance.get("model", "unknown"),
            "bundle": bundle.name,
            "metric": s.metric,
            "value": s.value,
            "wall_time_s": s.wall_time_s,
        }
        for s in sorted(batch.scores, key=lambda s: s.wall_time_s)
    ]
    reporting.atomic_write_text(args.out, reporting.scores_csv(rows))
    for row in rows:
        print(f"{row['metric']:>12}  {row['wall_time_s']:10.4f} s")
    if args.compare_kernels:
        _compare_kernels(args.seed)
    return 0


def _compare_kernels(seed: int) -> None:
    """Time the compiled vs pure-python k-NN selection/vote kernels."""
    import time

    from . import _nnkernels_py
    from .knn import KERNEL_IMPL, _kernels

    rng = np.random.default_rng(seed)
    sims = rng.standard_normal((512, 8000))
    labels = rng.integers(0, 10, size=8000).astype(np.int64)
    for name, impl in (("active: " + KERNEL_IMPL, _kernels), ("python", _nnkernels_py)):
        start = time.perf_counter()
        top = impl.top_k_block(sims, 200)
        impl.vote_block(np.ascontiguousarray(labels[top]),
                        np.take_along_axis(sims, top, axis=1), 200, 10, False)
        print(f"kernel {name:>18}: {time.perf_counter() - start:8.4f} s")


def cmd_report(args) -> int:
    with open(args.input, encoding="utf-8") as fh:
        data = json.load(fh)
    items = [(r["metric"], r["value"]) for r in data["results"]]
    title = f"{data['measure']} vs {data['target']} transfer performance"
    reporting.atomic_write_text(args.svg, reporting.svg_bar_chart(items, title))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xfermetric",
        description="Transferability metrics, domain distances, and correlation reports "
        "over embedding bundles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="compute transferability metrics on a bundle")
    p.add_argument("--bundle", required=True, help="bundle directory")
    p.add_argument("--metrics", default="all", help="comma-separated metric ids or 'all'")
    p.add_argument("--model", default=None, help="model id for the output rows")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default="scores.csv", help="output file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--set", action="append", metavar="METRIC.PARAM=VALUE",
                   help="hyperparameter override, repeatable")
    p.add_argument("--bench", action="store_true",
                   help="populate the wall_time_s column (serial run; reruns then differ)")
    p.add_argument("--strict", action="store_true",
                   help="exit nonzero if any requested metric failed")
    _add_knn_flags(p)
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("distance", help="compute domain distances between bundles")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True, action="append",
                   help="target bundle directory, repeatable")
    p.add_argument("--metrics", default="all")
    p.add_argument("--mean", action="store_true",
                   help="also emit mean-dist across >= 2 targets")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default="distances.csv")
    p.add_argument("--bench", action="store_true",
                   help="populate the wall_time_s column (reruns then differ)")
    p.set_defaults(fn=cmd_distance)

    p = sub.add_parser("rtp", help="derive RTP and TG from a performance table")
    p.add_argument("--perf", required=True, help="CSV: candidate,perf_p,perf_ri[,est_p,est_ri]")
    p.add_argument("--est-lower-better", action="store_true",
                   help="treat est columns as lower-better when deriving the estimate ratio")
    p.add_argument("--out", default="rtp.csv")
    p.set_defaults(fn=cmd_rtp)

    p = sub.add_parser("evaluate", help="correlate metric scores with performance")
    p.add_argument("--scores", required=True, help="CSV: candidate,metric,value")
    p.add_argument("--perf", required=True, help="CSV: candidate,perf_p,perf_ri")
    p.add_argument("--target", choices=("absolute", "relative"), default="absolute")
    p.add_argument("--measure", choices=("tauw", "tau", "pearson", "rel1"), default="tauw")
    p.add_argument("--no-invert", action="store_true",
                   help="do not negate lower-better score columns")
    p.add_argument("--lower-better", action="append", metavar="METRIC",
                   help="mark an external score column as lower-better, repeatable")
    p.add_argument("--out", default="report.json")
    p.add_argument("--svg", default=None, help="also render a bar chart")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("sweep-k", help="k-NN score across several k values on one split")
    p.add_argument("--bundle", required=True)
    p.add_argument("--k-values", default="25,50,100,200,400")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default="sweep.csv")
    p.add_argument("--svg", default=None)
    p.add_argument("--split-fraction", type=float, default=None)
    p.add_argument("--no-stratify", action="store_true")
    p.add_argument("--weighted-vote", action="store_true")
    p.set_defaults(fn=cmd_sweep_k)

    p = sub.add_parser("bench", help="per-metric runtime report on one bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--metrics", default="all")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default="bench.csv")
    p.add_argument("--compare-kernels", action="store_true",
                   help="also time the compiled vs pure-python k-NN kernels")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("report", help="render a correlation report JSON as an SVG bar chart")
    p.add_argument("--input", required=True, help="report JSON from 'evaluate'")
    p.add_argument("--svg", required=True)
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
