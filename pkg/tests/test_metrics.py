import math

import numpy as np
import pytest

from xfermetric.bundle import EmbeddingBundle
from xfermetric.metrics import (
    gbc,
    h_score,
    leep,
    lfc,
    logme,
    metric_ids,
    nce,
    nleep,
    num_c,
    parc,
    run_metrics,
    tmi,
    transrate,
)

from conftest import make_bundle


def bundle_from(feats, labels, num_classes, predictions=None, class_subset=False):
    return EmbeddingBundle(
        name="t",
        features=np.asarray(feats, dtype=np.float32),
        labels=np.asarray(labels, dtype=np.int64),
        num_classes=num_classes,
        predictions=None if predictions is None else np.asarray(predictions, dtype=np.float32),
        class_subset=class_subset,
    )


def random_rotation(rng, d):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return q


class TestNumC:
    def test_values(self):
        assert num_c(make_bundle(num_classes=3)) == pytest.approx(1 / 3)
        b10 = make_bundle(n=40, num_classes=10, seed=1)
        assert num_c(b10) == pytest.approx(0.1)

    def test_single_class(self):
        assert num_c(make_bundle(n=10, num_classes=1)) == pytest.approx(1.0)

    def test_many_classes(self):
        b = make_bundle(n=1200, num_classes=555, seed=2)
        assert num_c(b) == pytest.approx(1 / 555)


def nce_oracle(z, y):
    """Direct enumeration of the empirical joint."""
    n = len(y)
    value = 0.0
    for zv in set(z):
        pz = sum(1 for a in z if a == zv) / n
        ys = [y[i] for i in range(n) if z[i] == zv]
        for yv in set(ys):
            cond = ys.count(yv) / len(ys)
            value += pz * cond * math.log(cond)
    return value


class TestNce:
    def test_deterministic_mapping_is_zero(self):
        # pseudo-label argmax determines the target label exactly
        preds = np.array([[0.9, 0.1], [0.9, 0.1], [0.1, 0.9]])
        b = bundle_from(np.ones((3, 2)), [0, 0, 1], 2, preds)
        assert nce(b) == pytest.approx(0.0, abs=1e-12)

    def test_single_pseudo_label_balanced(self):
        preds = np.tile([1.0, 0.0], (4, 1))
        b = bundle_from(np.ones((4, 2)), [0, 1, 0, 1], 2, preds)
        assert nce(b) == pytest.approx(-math.log(2), rel=1e-12)

    def test_enumerated_example(self):
        # pairs (z, y) = (0,0), (0,1), (1,1), (1,1)
        preds = np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=float)
        b = bundle_from(np.ones((4, 2)), [0, 1, 1, 1], 2, preds)
        assert nce(b) == pytest.approx(-0.5 * math.log(2), rel=1e-12)

    def test_matches_oracle_random(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n, num_z, c = 30, 4, 3
            z = rng.integers(0, num_z, n)
            y = rng.integers(0, c, n)
            y[:c] = np.arange(c)
            preds = np.eye(num_z)[z]
            b = bundle_from(rng.standard_normal((n, 2)), y, c, preds)
            assert nce(b) == pytest.approx(nce_oracle(list(z), list(y)), abs=1e-12)

    def test_requires_predictions(self):
        with pytest.raises(ValueError, match="predictions"):
            nce(make_bundle())


def leep_oracle(theta, y, c):
    """Brute-force double sum over the empirical joint."""
    n, num_z = theta.shape
    joint = np.zeros((c, num_z))
    for i in range(n):
        for z in range(num_z):
            joint[y[i], z] += theta[i, z] / n
    pz = joint.sum(axis=0)
    total = 0.0
    for i in range(n):
        lik = 0.0
        for z in range(num_z):
            if pz[z] > 0:
                lik += joint[y[i], z] / pz[z] * theta[i, z]
        total += math.log(lik)
    return total / n


class TestLeep:
    def test_one_hot_bijection_is_zero(self):
        preds = np.eye(3)
        b = bundle_from(np.ones((3, 2)), [0, 1, 2], 3, preds)
        assert leep(b) == pytest.approx(0.0, abs=1e-12)

    def test_uniform_predictions_balanced(self):
        # dyadic Z keeps 1/Z exact in the float32 prediction storage
        c, num_z = 4, 8
        preds = np.full((16, num_z), 1.0 / num_z)
        labels = np.repeat(np.arange(c), 4)
        b = bundle_from(np.ones((16, 2)), labels, c, preds)
        assert leep(b) == pytest.approx(-math.log(c), rel=1e-9)

    def test_matches_oracle_random(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            theta = rng.dirichlet(np.ones(2), size=3)
            y = np.array([0, 1, 1])
            b = bundle_from(rng.standard_normal((3, 2)), y, 2, theta)
            stored = b.predictions.astype(np.float64)
            assert leep(b) == pytest.approx(leep_oracle(stored, y, 2), abs=1e-12)

    def test_leep_nonpositive(self):
        rng = np.random.default_rng(2)
        for seed in range(5):
            b = make_bundle(n=60, seed=seed, with_predictions=True)
            assert leep(b) <= 1e-12
            assert nce(b) <= 1e-12


class TestNleep:
    def test_separated_clusters_near_zero(self):
        rng = np.random.default_rng(3)
        n = 80
        labels = np.repeat([0, 1], n // 2)
        feats = rng.standard_normal((n, 4)) * 0.01
        feats[labels == 1] += 30.0
        b = bundle_from(feats, labels, 2)
        assert abs(nleep(b, seed=0)) < 1e-3

    def test_chance_level_labels(self):
        values = []
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            labels = np.repeat(np.arange(3), 200)
            feats = rng.standard_normal((600, 6))
            b = bundle_from(feats, labels, 3)
            values.append(nleep(b, seed=seed))
        assert np.mean(values) == pytest.approx(-math.log(3), abs=0.05)

    def test_deterministic(self):
        b = make_bundle(n=60, seed=4)
        assert nleep(b, seed=9) == nleep(b, seed=9)


class TestHScore:
    def test_identical_features(self):
        b = bundle_from(np.ones((8, 3)), [0, 1] * 4, 2)
        assert h_score(b) == pytest.approx(0.0, abs=1e-9)

    def test_one_hot_two_classes(self):
        labels = np.array([0, 1] * 10)
        feats = np.eye(2)[labels]
        b = bundle_from(feats, labels, 2)
        assert h_score(b, eps=1e-8) == pytest.approx(1.0, abs=1e-6)

    def test_closed_form_2x2_oracle(self):
        rng = np.random.default_rng(5)
        labels = np.array([0, 1] * 12)
        feats = rng.standard_normal((24, 2))
        b = bundle_from(feats, labels, 2)
        x = b.features.astype(np.float64)
        x -= x.mean(axis=0)
        cov = x.T @ x / 24
        ridge = 1e-4 * np.trace(cov) / 2
        xbar = np.zeros_like(x)
        for c in (0, 1):
            xbar[labels == c] = x[labels == c].mean(axis=0)
        cov_b = (xbar - xbar.mean(axis=0)).T @ (xbar - xbar.mean(axis=0)) / 24
        oracle = np.trace(np.linalg.inv(cov + ridge * np.eye(2)) @ cov_b)
        assert h_score(b) == pytest.approx(oracle, rel=1e-10)

    def test_sample_order_invariance(self):
        b = make_bundle(n=50, separation=2.0, seed=6)
        perm = np.random.default_rng(0).permutation(50)
        b2 = bundle_from(b.features[perm], b.labels[perm], b.num_classes)
        assert h_score(b) == pytest.approx(h_score(b2), rel=1e-10)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(7)
        b = make_bundle(n=60, d=6, separation=2.0, seed=7)
        rot = random_rotation(rng, 6)
        b2 = bundle_from(b.features @ rot, b.labels, b.num_classes)
        assert h_score(b2) == pytest.approx(h_score(b), rel=1e-6)


def dense_evidence(feats, y, alpha, beta):
    n, d = feats.shape
    a = alpha * np.eye(d) + beta * feats.T @ feats
    m = beta * np.linalg.solve(a, feats.T @ y)
    _, logdet = np.linalg.slogdet(a)
    return 0.5 * (
        d * np.log(alpha)
        + n * np.log(beta)
        - n * np.log(2 * np.pi)
        - logdet
        - beta * ((y - feats @ m) ** 2).sum()
        - alpha * (m @ m)
    )


class TestLogme:
    def test_fixed_point_beats_grid_oracle(self):
        # informative labels keep the per-class optima interior to the grid
        rng = np.random.default_rng(8)
        n, d = 50, 8
        labels = rng.integers(0, 2, n)
        labels[:2] = [0, 1]
        centers = rng.standard_normal((2, d))
        feats = rng.standard_normal((n, d)) + 1.5 * centers[labels]
        b = bundle_from(feats, labels, 2)
        value = logme(b)

        x = b.features.astype(np.float64)
        x -= x.mean(axis=0)
        grid = np.logspace(-1, 3, 60)
        per_class = []
        for c in (0, 1):
            y = (labels == c).astype(float)
            per_class.append(max(dense_evidence(x, y, a, bb) for a in grid for bb in grid) / n)
        oracle = float(np.mean(per_class))
        assert value >= oracle - 1e-9  # the fixed point cannot lose to the grid
        assert abs(value - oracle) <= 1e-3 * abs(oracle)

    def test_predictable_beats_permuted(self):
        rng = np.random.default_rng(9)
        labels = np.repeat(np.arange(3), 20)
        feats = np.eye(3)[labels] + 0.05 * rng.standard_normal((60, 3))
        good = bundle_from(feats, labels, 3)
        shuffled = bundle_from(feats, rng.permutation(labels), 3)
        assert logme(good) > logme(shuffled)

    def test_duplication_invariance(self):
        # Exact invariance of the per-sample evidence holds where the
        # per-class optima are degenerate (uninformative labels); with
        # informative labels the d-dependent evidence terms decay only as
        # O(d log(n)/n), so the property is asymptotic there.
        rng = np.random.default_rng(0)
        feats = rng.standard_normal((50, 8))
        labels = rng.integers(0, 3, 50)
        labels[:3] = np.arange(3)
        b = bundle_from(feats, labels, 3)
        b2 = bundle_from(np.vstack([feats, feats]), np.tile(labels, 2), 3)
        assert logme(b2) == pytest.approx(logme(b), abs=1e-6)

        centers = rng.standard_normal((3, 8))
        feats_i = feats + 2.0 * centers[labels]
        bi = bundle_from(feats_i, labels, 3)
        bi2 = bundle_from(np.vstack([feats_i, feats_i]), np.tile(labels, 2), 3)
        assert logme(bi2) == pytest.approx(logme(bi), abs=0.1)


class TestGbc:
    def test_identical_classes(self):
        rng = np.random.default_rng(11)
        feats = rng.standard_normal((40, 3))
        b = bundle_from(np.vstack([feats, feats]), [0] * 40 + [1] * 40, 2)
        assert gbc(b) == pytest.approx(-1.0, abs=1e-9)

    def test_one_dimensional_closed_form(self):
        # two 1-D classes with sample mean 0 and 2, both unit sample variance
        a = np.array([-1.0, 1.0] * 8)
        bvals = a + 2.0
        feats = np.concatenate([a, bvals])[:, None]
        labels = np.array([0] * 16 + [1] * 16)
        b = bundle_from(feats, labels, 2)
        # D_B = mu^2 / 8 = 0.5 for equal unit variances
        assert gbc(b, eps=0.0 + 1e-12) == pytest.approx(-math.exp(-0.5), rel=1e-6)

    def test_far_apart_classes(self):
        a = np.array([-1.0, 1.0] * 8)
        feats = np.concatenate([a, a + 10.0])[:, None]
        b = bundle_from(feats, [0] * 16 + [1] * 16, 2)
        value = gbc(b)
        assert -1e-4 < value < 0

    def test_separation_monotonicity(self):
        a = np.array([-1.0, 1.0] * 8)
        prev = None
        for gap in (0.5, 1.0, 2.0, 4.0, 8.0):
            feats = np.concatenate([a, a + gap])[:, None]
            value = gbc(bundle_from(feats, [0] * 16 + [1] * 16, 2))
            if prev is not None:
                assert value >= prev
            prev = value

    def test_range(self):
        for seed in range(5):
            b = make_bundle(n=60, num_classes=4, separation=1.0, seed=seed)
            value = gbc(b)
            assert -4 * 3 / 2 <= value < 0

    def test_needs_two_classes(self):
        with pytest.raises(ValueError):
            gbc(make_bundle(n=10, num_classes=1))


class TestTransrate:
    def test_single_class_zero(self):
        b = make_bundle(n=20, num_classes=1, seed=12)
        assert transrate(b) == pytest.approx(0.0, abs=1e-9)

    def test_zero_features(self):
        b = bundle_from(np.zeros((10, 3)), [0, 1] * 5, 2)
        assert transrate(b) == pytest.approx(0.0, abs=1e-12)

    def test_matches_slogdet_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            feats = rng.standard_normal((6, 2))
            labels = np.array([0, 0, 0, 1, 1, 1])
            b = bundle_from(feats, labels, 2)
            eps = 1e-4
            z = b.features.astype(np.float64) - b.features.astype(np.float64).mean(axis=0)
            d = 2

            def rate(rows, count):
                _, logdet = np.linalg.slogdet(np.eye(d) + (d / (count * eps**2)) * rows.T @ rows)
                return 0.5 * logdet

            oracle = rate(z, 6) - 0.5 * rate(z[:3], 3) - 0.5 * rate(z[3:], 3)
            assert transrate(b) == pytest.approx(oracle, abs=1e-10)

    def test_nonnegative(self):
        for seed in range(10):
            b = make_bundle(n=40, num_classes=3, separation=0.3, seed=seed)
            assert transrate(b) >= 0.0

    def test_rotation_invariance(self):
        rng = np.random.default_rng(14)
        b = make_bundle(n=50, d=5, separation=1.0, seed=15)
        rot = random_rotation(rng, 5)
        b2 = bundle_from(b.features @ rot, b.labels, b.num_classes)
        assert transrate(b2) == pytest.approx(transrate(b), rel=1e-6)


class TestParc:
    def test_block_structure_perfect(self):
        labels = np.repeat(np.arange(3), 4)
        feats = np.eye(3)[labels]
        b = bundle_from(feats, labels, 3)
        assert parc(b) == pytest.approx(1.0)

    def test_permuted_labels_near_zero(self):
        for seed in range(20):
            rng = np.random.default_rng(200 + seed)
            labels = rng.permutation(np.repeat(np.arange(10), 20))
            feats = rng.standard_normal((200, 16))
            b = bundle_from(feats, labels, 10)
            assert abs(parc(b, seed=seed)) < 0.1

    def test_global_shift_invariance(self):
        b = make_bundle(n=40, separation=1.5, seed=16)
        shifted = bundle_from(b.features + 7.5, b.labels, b.num_classes)
        assert parc(shifted, seed=0) == pytest.approx(parc(b, seed=0), abs=1e-12)

    def test_degenerate_features(self):
        b = bundle_from(np.ones((6, 3)), [0, 1] * 3, 2)
        with pytest.raises(ValueError, match="degenerate features"):
            parc(b)


class TestTmi:
    def test_scaling_increases_value(self):
        b = make_bundle(n=60, separation=1.0, seed=17)
        scaled = bundle_from(b.features * 3.0, b.labels, b.num_classes)
        assert tmi(scaled) > tmi(b)

    def test_collapsed_classes_floor(self):
        labels = np.array([0, 0, 1, 1])
        feats = np.eye(2)[labels] * 5  # within-class constant
        b = bundle_from(feats, labels, 2)
        eps = 1e-4
        d = 2
        assert tmi(b, eps=eps) == pytest.approx((d / 2) * math.log(eps), rel=1e-10)

    def test_two_class_oracle(self):
        a = np.array([0.0, 1.0, 2.0])          # class 0, variance 2/3
        c = np.array([10.0, 14.0])              # class 1, variance 4
        feats = np.concatenate([a, c])[:, None]
        b = bundle_from(feats, [0, 0, 0, 1, 1], 2)
        eps = 1e-4
        oracle = (3 / 5) * 0.5 * math.log(np.var(a) + eps) + (2 / 5) * 0.5 * math.log(np.var(c) + eps)
        assert tmi(b, eps=eps) == pytest.approx(oracle, rel=1e-10)


class TestLfc:
    def test_features_equal_one_hot(self):
        labels = np.repeat(np.arange(3), 5)
        feats = np.eye(3)[labels]
        b = bundle_from(feats, labels, 3)
        assert lfc(b) == pytest.approx(1.0, rel=1e-12)

    def test_permuted_labels_near_zero(self):
        for seed in range(20):
            rng = np.random.default_rng(300 + seed)
            labels = rng.permutation(np.repeat(np.arange(10), 20))
            feats = rng.standard_normal((200, 16))
            b = bundle_from(feats, labels, 10)
            assert abs(lfc(b, seed=seed)) < 0.1

    def test_rotation_invariance(self):
        rng = np.random.default_rng(18)
        b = make_bundle(n=40, d=6, separation=1.0, seed=19)
        rot = random_rotation(rng, 6)
        b2 = bundle_from(b.features @ rot, b.labels, b.num_classes)
        assert lfc(b2, seed=0) == pytest.approx(lfc(b, seed=0), rel=1e-9)

    def test_single_class_degenerate(self):
        b = make_bundle(n=10, num_classes=1, seed=20)
        with pytest.raises(ValueError, match="kernel"):
            lfc(b)


class TestRunMetrics:
    def test_request_order_and_values(self, blob_bundle):
        batch = run_metrics(blob_bundle, ["numc", "gbc", "leep"], seed=3)
        assert [s.metric for s in batch.scores] == ["numc", "gbc", "leep"]
        assert batch.scores[0].value == pytest.approx(1 / 3)
        assert not batch.failures

    def test_missing_predictions_recorded_not_fatal(self):
        b = make_bundle(n=30, seed=21, with_predictions=False)
        batch = run_metrics(b, ["numc", "leep"], seed=0)
        assert [s.metric for s in batch.scores] == ["numc"]
        assert "leep" in batch.failures

    def test_unknown_metric(self, blob_bundle):
        with pytest.raises(KeyError, match="nope"):
            run_metrics(blob_bundle, ["nope"])

    def test_all_metrics_with_wall_time(self, blob_bundle):
        batch = run_metrics(blob_bundle, metric_ids(), seed=0)
        assert not batch.failures
        assert all(s.wall_time_s >= 0 for s in batch.scores)

    def test_determinism(self, blob_bundle):
        a = run_metrics(blob_bundle, metric_ids(), seed=5)
        b = run_metrics(blob_bundle, metric_ids(), seed=5)
        assert [s.value for s in a.scores] == [s.value for s in b.scores]

    def test_threaded_matches_serial(self, blob_bundle):
        serial = run_metrics(blob_bundle, metric_ids(), seed=5, threads=1)
        threaded = run_metrics(blob_bundle, metric_ids(), seed=5, threads=4)
        assert [s.value for s in serial.scores] == [s.value for s in threaded.scores]
