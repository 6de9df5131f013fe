import os
import warnings

import numpy as np
import pytest
from PIL import Image

import xfermetric as xm
from bundle_extractor import INIT_RANDOM, ExtractionSpec, extract
from bundle_extractor.cli import main as cli_main

MODEL = "resnet18"


@pytest.fixture(scope="module")
def image_folder(tmp_path_factory):
    """Four synthetic images in two class folders."""
    root = tmp_path_factory.mktemp("images")
    rng = np.random.default_rng(0)
    for cls in ("plane", "ship"):
        os.makedirs(root / cls)
        for i in range(2):
            pixels = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
            Image.fromarray(pixels).save(root / cls / f"{i}.png")
    return str(root)


@pytest.fixture(scope="module")
def bundle_dir(image_folder, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("bundles") / "synthetic4")
    spec = ExtractionSpec(
        model=MODEL, dataset=image_folder, output=out,
        init=INIT_RANDOM, seed=11, batch_size=2,
    )
    assert extract(spec) == out
    return out


class TestCrossComponentRoundTrip:
    def test_primary_reads_with_zero_warnings(self, bundle_dir):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            bundle = xm.read_bundle(bundle_dir)
        assert not caught
        assert bundle.n == 4
        assert bundle.num_classes == 2
        assert bundle.d == 512  # resnet18 penultimate width
        assert bundle.num_source_classes == 1000
        assert bundle.class_names == ("plane", "ship")
        assert list(bundle.labels) == [0, 0, 1, 1]

    def test_feature_bytes_survive_primary_roundtrip(self, bundle_dir, tmp_path):
        bundle = xm.read_bundle(bundle_dir)
        rewritten = tmp_path / "rewritten"
        xm.write_bundle(bundle, str(rewritten))
        original = open(os.path.join(bundle_dir, "features.bin"), "rb").read()
        roundtrip = open(rewritten / "features.bin", "rb").read()
        assert original == roundtrip
        back = xm.read_bundle(str(rewritten))
        assert back.features.tobytes() == bundle.features.tobytes()

    def test_prediction_rows_sum_to_one(self, bundle_dir):
        bundle = xm.read_bundle(bundle_dir)
        sums = bundle.predictions.sum(axis=1, dtype=np.float64)
        np.testing.assert_allclose(sums, 1.0, atol=1e-4)

    def test_primary_metrics_consume_the_bundle(self, bundle_dir):
        bundle = xm.read_bundle(bundle_dir)
        batch = xm.run_metrics(bundle, ["numc", "leep", "nce"], seed=0)
        assert not batch.failures
        assert batch.scores[0].value == pytest.approx(0.5)


class TestDeterminism:
    def test_random_init_reextraction_bit_identical(self, image_folder, tmp_path):
        outs = []
        for run in range(2):
            out = str(tmp_path / f"run{run}")
            spec = ExtractionSpec(
                model=MODEL, dataset=image_folder, output=out,
                init=INIT_RANDOM, seed=42, batch_size=3,
            )
            extract(spec)
            outs.append(out)
        for fname in ("features.bin", "labels.bin", "predictions.bin"):
            a = open(os.path.join(outs[0], fname), "rb").read()
            b = open(os.path.join(outs[1], fname), "rb").read()
            assert a == b, fname

    def test_different_seed_changes_features(self, image_folder, tmp_path):
        feats = []
        for seed in (1, 2):
            out = str(tmp_path / f"seed{seed}")
            extract(ExtractionSpec(model=MODEL, dataset=image_folder, output=out,
                                   init=INIT_RANDOM, seed=seed))
            feats.append(open(os.path.join(out, "features.bin"), "rb").read())
        assert feats[0] != feats[1]


class TestSpecHandling:
    def test_provenance_recorded(self, bundle_dir):
        bundle = xm.read_bundle(bundle_dir)
        assert bundle.provenance["model"] == MODEL
        assert bundle.provenance["init"] == INIT_RANDOM
        assert bundle.provenance["seed"] == 11
        assert "layer" in bundle.provenance

    def test_no_predictions_flag(self, image_folder, tmp_path):
        out = str(tmp_path / "nopred")
        extract(ExtractionSpec(model=MODEL, dataset=image_folder, output=out,
                               init=INIT_RANDOM, seed=0, with_predictions=False))
        bundle = xm.read_bundle(out)
        assert bundle.predictions is None

    def test_bad_init_mode(self, image_folder, tmp_path):
        with pytest.raises(ValueError, match="init mode"):
            extract(ExtractionSpec(model=MODEL, dataset=image_folder,
                                   output=str(tmp_path / "x"), init="fine-tuned"))

    def test_empty_dataset(self, tmp_path):
        empty = tmp_path / "empty" / "cls"
        os.makedirs(empty)
        Image.fromarray(np.zeros((8, 8, 3), dtype=np.uint8)).save(empty / "a.png")
        os.remove(empty / "a.png")
        with pytest.raises((ValueError, FileNotFoundError)):
            extract(ExtractionSpec(model=MODEL, dataset=str(tmp_path / "empty"),
                                   output=str(tmp_path / "out"), init=INIT_RANDOM))


def test_cli_end_to_end(image_folder, tmp_path, capsys):
    out = str(tmp_path / "cli-bundle")
    status = cli_main([
        "--model", MODEL, "--dataset", image_folder, "--out", out,
        "--init", INIT_RANDOM, "--seed", "3", "--batch-size", "2",
    ])
    assert status == 0
    assert capsys.readouterr().out.strip() == out
    bundle = xm.read_bundle(out)
    assert bundle.n == 4
