import json
import subprocess
import sys

import numpy as np
import pytest

from xfermetric.bundle import write_bundle
from xfermetric.cli import main

from conftest import make_bundle


@pytest.fixture
def bundle_dir(tmp_path):
    b = make_bundle(n=120, d=8, num_classes=3, separation=2.5, seed=0,
                    with_predictions=True, name="demo")
    path = tmp_path / "demo"
    write_bundle(b, str(path))
    return str(path)


@pytest.fixture
def second_bundle_dir(tmp_path):
    b = make_bundle(n=90, d=8, num_classes=3, separation=0.5, seed=1, name="other")
    path = tmp_path / "other"
    write_bundle(b, str(path))
    return str(path)


def read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


class TestScore:
    def test_knn_score_row(self, bundle_dir, tmp_path):
        out = tmp_path / "scores.csv"
        status = main(["score", "--bundle", bundle_dir, "--metrics", "knn",
                       "--k", "200", "--seed", "7", "--out", str(out)])
        assert status == 0
        lines = read(out).strip().splitlines()
        assert lines[0] == "model,bundle,metric,value,wall_time_s"
        assert len(lines) == 2 and ",knn," in lines[1]

    def test_unknown_metric_nonzero_exit(self, bundle_dir, tmp_path, capsys):
        status = main(["score", "--bundle", bundle_dir, "--metrics", "nope",
                       "--out", str(tmp_path / "x.csv")])
        assert status == 1
        assert "unknown metric: nope" in capsys.readouterr().err

    def test_all_metrics_wall_time(self, bundle_dir, tmp_path):
        out = tmp_path / "scores.csv"
        status = main(["score", "--bundle", bundle_dir, "--metrics", "all",
                       "--bench", "--out", str(out)])
        assert status == 0
        rows = read(out).strip().splitlines()[1:]
        assert len(rows) == 12
        assert all(float(r.rsplit(",", 1)[1]) >= 0 for r in rows)

    def test_partial_failure_warns_but_succeeds(self, second_bundle_dir, tmp_path, capsys):
        # bundle has no predictions: leep fails, numc succeeds
        out = tmp_path / "s.csv"
        status = main(["score", "--bundle", second_bundle_dir,
                       "--metrics", "numc,leep", "--out", str(out)])
        assert status == 0
        assert "leep" in capsys.readouterr().err
        assert main(["score", "--bundle", second_bundle_dir, "--metrics",
                     "numc,leep", "--strict", "--out", str(out)]) == 1

    def test_json_format(self, bundle_dir, tmp_path):
        out = tmp_path / "scores.json"
        assert main(["score", "--bundle", bundle_dir, "--metrics", "numc",
                     "--format", "json", "--out", str(out)]) == 0
        rows = json.loads(read(out))
        assert rows[0]["metric"] == "numc"
        assert rows[0]["value"] == pytest.approx(1 / 3)

    def test_idempotent_bytes(self, bundle_dir, tmp_path):
        out = tmp_path / "scores.csv"
        args = ["score", "--bundle", bundle_dir, "--metrics", "knn,numc,gbc",
                "--seed", "3", "--out", str(out)]
        assert main(args) == 0
        first = read(out)
        assert main(args) == 0
        assert read(out) == first  # byte-identical without --bench


class TestDistance:
    def test_identity_fid_zero(self, bundle_dir, tmp_path):
        out = tmp_path / "d.csv"
        assert main(["distance", "--source", bundle_dir, "--target", bundle_dir,
                     "--metrics", "fid", "--out", str(out)]) == 0
        row = read(out).strip().splitlines()[1]
        assert float(row.split(",")[3]) == pytest.approx(0.0, abs=1e-6)

    def test_mean_needs_two_targets(self, bundle_dir, tmp_path, capsys):
        status = main(["distance", "--source", bundle_dir, "--target", bundle_dir,
                       "--mean", "--out", str(tmp_path / "d.csv")])
        assert status == 1
        assert "mean-dist needs >= 2 candidates" in capsys.readouterr().err

    def test_multi_target_rows(self, bundle_dir, second_bundle_dir, tmp_path):
        out = tmp_path / "d.csv"
        args = ["distance", "--source", bundle_dir,
                "--target", bundle_dir, "--target", second_bundle_dir,
                "--metrics", "fid,emd", "--mean", "--out", str(out)]
        assert main(args) == 0
        rows = read(out).strip().splitlines()[1:]
        # 2 targets x 2 metrics + 2 mean-dist rows
        assert len(rows) == 6
        assert sum(",mean-dist," in r for r in rows) == 2
        first = read(out)
        assert main(args) == 0
        assert read(out) == first  # byte-identical rerun


class TestRtp:
    def test_derives_rtp_and_tg(self, tmp_path):
        perf = tmp_path / "perf.csv"
        perf.write_text("candidate,perf_p,perf_ri\na,0.8,0.6\nb,0.9,0.0\n")
        out = tmp_path / "rtp.csv"
        assert main(["rtp", "--perf", str(perf), "--out", str(out)]) == 0
        lines = read(out).strip().splitlines()
        assert lines[0] == "candidate,perf_p,perf_ri,rtp,tg"
        a = lines[1].split(",")
        assert float(a[3]) == pytest.approx(0.25) and float(a[4]) == pytest.approx(0.75)

    def test_est_columns(self, tmp_path):
        perf = tmp_path / "perf.csv"
        perf.write_text(
            "candidate,perf_p,perf_ri,est_p,est_ri\na,0.8,0.6,2.0,1.0\nb,0.9,0.1,4.0,1.0\n"
        )
        out = tmp_path / "rtp.csv"
        assert main(["rtp", "--perf", str(perf), "--out", str(out)]) == 0
        lines = read(out).strip().splitlines()
        assert lines[0].endswith(",rtp_p")
        assert float(lines[1].split(",")[5]) == pytest.approx(0.5)


class TestEvaluateCmd:
    def write_tables(self, tmp_path):
        perf = tmp_path / "perf.csv"
        perf.write_text(
            "candidate,perf_p,perf_ri\nc0,0.5,0.1\nc1,0.9,0.2\nc2,0.7,0.3\nc3,0.6,0.2\n"
        )
        scores = tmp_path / "scores.csv"
        rows = ["candidate,metric,value"]
        for i, p in enumerate([0.5, 0.9, 0.7, 0.6]):
            rows.append(f"c{i},perfect,{p}")
        scores.write_text("\n".join(rows) + "\n")
        return str(scores), str(perf)

    def test_perfect_metric(self, tmp_path):
        scores, perf = self.write_tables(tmp_path)
        out = tmp_path / "report.json"
        svg = tmp_path / "report.svg"
        assert main(["evaluate", "--scores", scores, "--perf", perf,
                     "--target", "absolute", "--measure", "tauw",
                     "--out", str(out), "--svg", str(svg)]) == 0
        report = json.loads(read(out))
        assert report["results"][0]["value"] == 1.0
        assert report["n_candidates"] == 4
        assert read(svg).startswith("<svg")

    def test_rel1_range(self, tmp_path):
        scores, perf = self.write_tables(tmp_path)
        out = tmp_path / "r.json"
        assert main(["evaluate", "--scores", scores, "--perf", perf,
                     "--measure", "rel1", "--out", str(out)]) == 0
        value = json.loads(read(out))["results"][0]["value"]
        assert 0 < value <= 1

    def test_four_measures(self, tmp_path):
        scores, perf = self.write_tables(tmp_path)
        for measure in ("tauw", "tau", "pearson", "rel1"):
            out = tmp_path / f"{measure}.json"
            assert main(["evaluate", "--scores", scores, "--perf", perf,
                         "--measure", measure, "--out", str(out)]) == 0
            assert json.loads(read(out))["results"][0]["value"] == pytest.approx(1.0)

    def test_idempotent_bytes(self, tmp_path):
        scores, perf = self.write_tables(tmp_path)
        out = tmp_path / "report.json"
        args = ["evaluate", "--scores", scores, "--perf", perf, "--out", str(out)]
        assert main(args) == 0
        first = read(out)
        assert main(args) == 0
        assert read(out) == first


class TestSweepK:
    def test_separable_all_ones(self, tmp_path):
        b = make_bundle(n=120, d=6, num_classes=3, separation=8.0, seed=2, name="sep")
        path = tmp_path / "sep"
        write_bundle(b, str(path))
        out = tmp_path / "sweep.csv"
        svg = tmp_path / "sweep.svg"
        assert main(["sweep-k", "--bundle", str(path), "--k-values", "1,5,25",
                     "--out", str(out), "--svg", str(svg)]) == 0
        lines = read(out).strip().splitlines()
        assert lines[0] == "k,score"
        assert [float(r.split(",")[1]) for r in lines[1:]] == [1.0, 1.0, 1.0]
        assert "<svg" in read(svg)

    def test_deterministic_rerun(self, bundle_dir, tmp_path):
        out = tmp_path / "sweep.csv"
        args = ["sweep-k", "--bundle", bundle_dir, "--k-values", "1,3,9",
                "--seed", "11", "--out", str(out)]
        assert main(args) == 0
        first = read(out)
        assert main(args) == 0
        assert read(out) == first


class TestBenchAndReport:
    def test_bench_writes_sorted_times(self, bundle_dir, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        assert main(["bench", "--bundle", bundle_dir, "--out", str(out)]) == 0
        rows = read(out).strip().splitlines()[1:]
        times = [float(r.rsplit(",", 1)[1]) for r in rows]
        assert times == sorted(times)
        assert len(rows) == 12

    def test_report_from_json(self, tmp_path):
        data = {
            "target": "absolute",
            "measure": "tauw",
            "n_candidates": 3,
            "results": [
                {"metric": "knn", "value": 0.9, "n_effective": 3},
                {"metric": "fid", "value": -0.4, "n_effective": 3},
            ],
        }
        src = tmp_path / "r.json"
        src.write_text(json.dumps(data))
        svg = tmp_path / "r.svg"
        assert main(["report", "--input", str(src), "--svg", str(svg)]) == 0
        content = read(svg)
        assert "knn" in content and "fid" in content


def test_help_exits_zero_for_all_subcommands():
    for cmd in ("score", "distance", "rtp", "evaluate", "sweep-k", "bench", "report"):
        proc = subprocess.run(
            [sys.executable, "-m", "xfermetric.cli", cmd, "--help"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, cmd
        assert "--" in proc.stdout


def test_entry_point_installed():
    proc = subprocess.run(["xfermetric", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
