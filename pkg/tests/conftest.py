import numpy as np
import pytest

from xfermetric.bundle import EmbeddingBundle


def make_bundle(
    n=120,
    d=8,
    num_classes=3,
    separation=0.0,
    seed=0,
    with_predictions=False,
    num_source_classes=5,
    name="synthetic",
):
    """Gaussian blobs with controllable class separation.

    separation=0 gives label-independent features; larger values pull
    the class clusters apart.  Predictions, when requested, are a
    softmax of a random linear map of the features, so they carry class
    information exactly when the features do.
    """
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, num_classes, size=n)
    # guarantee every class appears
    labels[:num_classes] = np.arange(num_classes)
    centers = rng.standard_normal((num_classes, d))
    feats = rng.standard_normal((n, d)) + separation * centers[labels]
    predictions = None
    if with_predictions:
        logits = feats @ rng.standard_normal((d, num_source_classes))
        logits -= logits.max(axis=1, keepdims=True)
        soft = np.exp(logits)
        predictions = (soft / soft.sum(axis=1, keepdims=True)).astype(np.float32)
    return EmbeddingBundle(
        name=name,
        features=feats.astype(np.float32),
        labels=labels.astype(np.int64),
        num_classes=num_classes,
        predictions=predictions,
    )


@pytest.fixture
def blob_bundle():
    return make_bundle(separation=3.0, seed=7, with_predictions=True)


@pytest.fixture
def noise_bundle():
    return make_bundle(separation=0.0, seed=11, with_predictions=True)
