"""Run an image-folder dataset through a torchvision model and dump an
embedding bundle.

The bundle directory layout is the fixed interchange format consumed by
the scoring library: ``manifest.json`` plus little-endian binary files
(features n x d float32, labels n uint32, optional predictions n x Z
float32).  Features are the input to the model's final linear head
(global-pooled penultimate activations); predictions are the softmax of
that head, written whenever the head is retained.

Extraction is deterministic: the evaluation transform is fixed (resize
256, center-crop 224, normalize), data order follows the sorted folder
layout, and random-init weights are seeded, so re-running an identical
spec reproduces byte-identical files.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn
from torchvision import datasets, models, transforms

INIT_PRETRAINED = "pretrained"
INIT_RANDOM = "random-init"

EVAL_TRANSFORM = transforms.Compose(
    [
        transforms.Resize(256),
        transforms.CenterCrop(224),
        transforms.ToTensor(),
        transforms.Normalize(
            mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]
        ),
    ]
)


@dataclass(frozen=True)
class ExtractionSpec:
    model: str                      # torchvision model name, e.g. "resnet18"
    dataset: str                    # ImageFolder root
    output: str                     # bundle directory to create
    split: str = "train"            # recorded in provenance only
    init: str = INIT_PRETRAINED     # "pretrained" | "random-init"
    seed: int = 0                   # seeds random-init weights
    batch_size: int = 32
    checkpoint: str | None = None   # local state_dict for pretrained use
    with_predictions: bool = True
    name: str | None = None         # bundle name; defaults to dataset basename

    def bundle_name(self) -> str:
        return self.name or os.path.basename(os.path.normpath(self.dataset))


def load_model(spec: ExtractionSpec) -> nn.Module:
    if spec.init not in (INIT_PRETRAINED, INIT_RANDOM):
        raise ValueError(f"unknown init mode: {spec.init}")
    if spec.init == INIT_RANDOM:
        torch.manual_seed(spec.seed)
        model = models.get_model(spec.model, weights=None)
    elif spec.checkpoint:
        model = models.get_model(spec.model, weights=None)
        state = torch.load(spec.checkpoint, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    else:
        weights = models.get_model_weights(spec.model).DEFAULT
        model = models.get_model(spec.model, weights=weights)
    model.eval()
    return model


def _find_head(model: nn.Module) -> nn.Linear:
    """Last linear layer in module order: the source classification head."""
    head = None
    for module in model.modules():
        if isinstance(module, nn.Linear):
            head = module
    if head is None:
        raise ValueError("model has no linear classification head")
    return head


def extract(spec: ExtractionSpec) -> str:
    """Write the bundle directory and return its path."""
    model = load_model(spec)
    head = _find_head(model)

    dataset = datasets.ImageFolder(spec.dataset, transform=EVAL_TRANSFORM)
    if len(dataset) == 0:
        raise ValueError(f"no images under {spec.dataset}")
    loader = torch.utils.data.DataLoader(
        dataset, batch_size=spec.batch_size, shuffle=False, num_workers=0
    )

    captured: list[torch.Tensor] = []
    hook = head.register_forward_pre_hook(
        lambda module, inputs: captured.append(inputs[0].detach())
    )

    feature_blocks: list[np.ndarray] = []
    prediction_blocks: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    feature_dim = None
    try:
        with torch.no_grad():
            for images, targets in loader:
                captured.clear()
                logits = model(images)
                feats = captured[-1]
                if feats.ndim > 2:
                    feats = torch.flatten(feats, 1)
                if feature_dim is None:
                    feature_dim = feats.shape[1]
                elif feats.shape[1] != feature_dim:
                    raise RuntimeError(
                        f"feature dimension drifted between batches: "
                        f"{feature_dim} then {feats.shape[1]}"
                    )
                feature_blocks.append(feats.to(torch.float32).numpy())
                if spec.with_predictions:
                    soft = torch.softmax(logits.to(torch.float64), dim=1)
                    prediction_blocks.append(soft.to(torch.float32).numpy())
                labels.append(targets.numpy())
    finally:
        hook.remove()

    features = np.concatenate(feature_blocks)
    label_arr = np.concatenate(labels).astype(np.uint32)
    predictions = np.concatenate(prediction_blocks) if prediction_blocks else None

    _write_bundle_dir(
        spec,
        features=features,
        labels=label_arr,
        predictions=predictions,
        class_names=dataset.classes,
    )
    return spec.output


def _write_bundle_dir(spec, features, labels, predictions, class_names) -> None:
    os.makedirs(spec.output, exist_ok=True)
    n, d = features.shape
    files = {"features": "features.bin", "labels": "labels.bin"}
    if predictions is not None:
        files["predictions"] = "predictions.bin"
    manifest = {
        "name": spec.bundle_name(),
        "n": int(n),
        "d": int(d),
        "num_classes": len(class_names),
        "num_source_classes": 0 if predictions is None else int(predictions.shape[1]),
        "dtype": "f32",
        "byte_order": "little",
        "files": files,
        "provenance": {
            "model": spec.model,
            "layer": "input of the final linear head (flattened)",
            "init": spec.init,
            "seed": spec.seed,
            "dataset": os.path.abspath(spec.dataset),
            "split": spec.split,
            "transform": "resize 256, center-crop 224, normalize",
        },
    }
    features.astype("<f4", copy=False).tofile(os.path.join(spec.output, files["features"]))
    labels.astype("<u4", copy=False).tofile(os.path.join(spec.output, files["labels"]))
    if predictions is not None:
        predictions.astype("<f4", copy=False).tofile(
            os.path.join(spec.output, files["predictions"])
        )
    with open(os.path.join(spec.output, "class_names.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(class_names) + "\n")
    with open(os.path.join(spec.output, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
