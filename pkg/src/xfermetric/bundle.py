"""On-disk embedding-bundle format and in-memory containers.

A bundle directory holds one dataset split as seen through one feature
extractor: ``manifest.json``, ``features.bin`` (n x d float32, row
major, little endian), ``labels.bin`` (n uint32, little endian), an
optional ``predictions.bin`` (n x Z float32 row-stochastic softmax of
the extractor's source classifier), and an optional ``class_names.txt``
(one name per line).  The binary layout is pinned so that bundles are
bit-exact interchangeable with out-of-process extractors.

Bundles are immutable after load and safe to share across concurrent
metric computations.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

PREDICTION_ROW_SUM_TOL = 1e-4

MANIFEST_NAME = "manifest.json"
_REQUIRED_MANIFEST_KEYS = (
    "name",
    "n",
    "d",
    "num_classes",
    "num_source_classes",
    "dtype",
    "byte_order",
    "files",
)


class BundleFormatError(ValueError):
    """Raised when a bundle directory or in-memory bundle is invalid."""


@dataclass(frozen=True)
class EmbeddingBundle:
    """A named dataset of feature vectors with class labels.

    ``features`` is (n, d) float32, ``labels`` is (n,) integer in
    ``[0, num_classes)``, ``predictions`` is an optional (n, Z)
    row-stochastic float32 matrix.  ``class_subset`` flags slices in
    which some class indices legitimately have zero samples.
    """

    name: str
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    predictions: np.ndarray | None = None
    class_names: tuple[str, ...] | None = None
    class_subset: bool = False
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def num_source_classes(self) -> int:
        return 0 if self.predictions is None else self.predictions.shape[1]

    def validate(self) -> None:
        """Check every bundle invariant; raise BundleFormatError on the first violation."""
        if self.features.ndim != 2:
            raise BundleFormatError("features must be a 2-d matrix")
        n, d = self.features.shape
        if n < 1 or d < 1:
            raise BundleFormatError("bundle must contain at least one sample and one feature")
        if self.features.dtype != np.float32:
            raise BundleFormatError(f"features must be float32, got {self.features.dtype}")
        if not np.all(np.isfinite(self.features)):
            raise BundleFormatError("non-finite feature values")
        if self.labels.shape != (n,):
            raise BundleFormatError("labels must be a vector with one entry per sample")
        if self.num_classes < 1:
            raise BundleFormatError("num_classes must be positive")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise BundleFormatError("label out of range")
        if not self.class_subset:
            present = np.bincount(self.labels.astype(np.int64), minlength=self.num_classes)
            if np.any(present == 0):
                missing = int(np.flatnonzero(present == 0)[0])
                raise BundleFormatError(
                    f"class {missing} has no samples (set class_subset for class-subset slices)"
                )
        if self.predictions is not None:
            if self.predictions.ndim != 2 or self.predictions.shape[0] != n:
                raise BundleFormatError("predictions must have one row per sample")
            if self.predictions.dtype != np.float32:
                raise BundleFormatError("predictions must be float32")
            if not np.all(np.isfinite(self.predictions)):
                raise BundleFormatError("non-finite prediction values")
            if np.any(self.predictions < 0):
                raise BundleFormatError("negative prediction entry")
            sums = self.predictions.sum(axis=1, dtype=np.float64)
            off = np.abs(sums - 1.0)
            if np.any(off > PREDICTION_ROW_SUM_TOL):
                bad = int(np.argmax(off))
                raise BundleFormatError(
                    f"prediction row {bad} sums to {sums[bad]:.6f}, not 1 within {PREDICTION_ROW_SUM_TOL}"
                )
        if self.class_names is not None and len(self.class_names) != self.num_classes:
            raise BundleFormatError("class_names must have one entry per class")


def _expected_bytes(manifest: dict) -> dict[str, int]:
    n, d, z = manifest["n"], manifest["d"], manifest["num_source_classes"]
    sizes = {"features": n * d * 4, "labels": n * 4}
    if manifest["files"].get("predictions"):
        sizes["predictions"] = n * z * 4
    return sizes


def read_manifest(path: str) -> dict:
    manifest_path = os.path.join(path, MANIFEST_NAME)
    if not os.path.isfile(manifest_path):
        raise BundleFormatError(f"missing file: {manifest_path}")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    for key in _REQUIRED_MANIFEST_KEYS:
        if key not in manifest:
            raise BundleFormatError(f"manifest missing required key: {key}")
    if manifest["dtype"] != "f32":
        raise BundleFormatError(f"unsupported dtype tag: {manifest['dtype']!r}")
    if manifest["byte_order"] != "little":
        raise BundleFormatError(f"unsupported byte-order tag: {manifest['byte_order']!r}")
    return manifest


def read_bundle(path: str) -> EmbeddingBundle:
    """Load and validate a bundle directory.

    Raises BundleFormatError on missing files, manifest/file size
    mismatches, or any violated bundle invariant.
    """
    manifest = read_manifest(path)
    n, d = manifest["n"], manifest["d"]
    z = manifest["num_source_classes"]

    data = {}
    for part, nbytes in _expected_bytes(manifest).items():
        fname = manifest["files"].get(part)
        if not fname:
            raise BundleFormatError(f"manifest declares no file for {part}")
        fpath = os.path.join(path, fname)
        if not os.path.isfile(fpath):
            raise BundleFormatError(f"missing file: {fpath}")
        actual = os.path.getsize(fpath)
        if actual != nbytes:
            raise BundleFormatError(
                f"{part} file is {actual} bytes, manifest implies {nbytes}"
            )
        data[part] = fpath

    features = np.fromfile(data["features"], dtype="<f4").reshape(n, d)
    labels = np.fromfile(data["labels"], dtype="<u4").astype(np.int64)
    predictions = None
    if "predictions" in data:
        predictions = np.fromfile(data["predictions"], dtype="<f4").reshape(n, z)

    class_names = None
    names_path = os.path.join(path, "class_names.txt")
    if os.path.isfile(names_path):
        with open(names_path, encoding="utf-8") as fh:
            class_names = tuple(line.rstrip("\n") for line in fh)

    bundle = EmbeddingBundle(
        name=manifest["name"],
        features=features,
        labels=labels,
        num_classes=manifest["num_classes"],
        predictions=predictions,
        class_names=class_names,
        class_subset=bool(manifest.get("class_subset", False)),
        provenance=dict(manifest.get("provenance", {})),
    )
    bundle.validate()
    return bundle


def write_bundle(bundle: EmbeddingBundle, path: str) -> None:
    """Write a validated bundle so that read_bundle reproduces it bit-exactly."""
    bundle.validate()
    os.makedirs(path, exist_ok=True)
    files = {"features": "features.bin", "labels": "labels.bin"}
    if bundle.predictions is not None:
        files["predictions"] = "predictions.bin"

    manifest = {
        "name": bundle.name,
        "n": bundle.n,
        "d": bundle.d,
        "num_classes": bundle.num_classes,
        "num_source_classes": bundle.num_source_classes,
        "dtype": "f32",
        "byte_order": "little",
        "files": files,
    }
    if bundle.class_subset:
        manifest["class_subset"] = True
    if bundle.provenance:
        manifest["provenance"] = bundle.provenance

    bundle.features.astype("<f4", copy=False).tofile(os.path.join(path, files["features"]))
    bundle.labels.astype("<u4").tofile(os.path.join(path, files["labels"]))
    if bundle.predictions is not None:
        bundle.predictions.astype("<f4", copy=False).tofile(os.path.join(path, files["predictions"]))
    if bundle.class_names is not None:
        with open(os.path.join(path, "class_names.txt"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(bundle.class_names) + "\n")
    with open(os.path.join(path, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _stratified_counts(class_sizes: np.ndarray, fraction: float, total: int) -> np.ndarray:
    """Per-class S1 sizes by largest remainder, each non-empty class kept >= 1."""
    exact = fraction * class_sizes
    counts = np.floor(exact).astype(np.int64)
    remainders = exact - counts
    deficit = total - int(counts.sum())
    if deficit > 0:
        # favour the classes that lost the most to flooring; ties to lower ids
        order = np.lexsort((np.arange(class_sizes.size), -remainders))
        for c in order:
            if deficit == 0:
                break
            if counts[c] < class_sizes[c]:
                counts[c] += 1
                deficit -= 1
    # every class with samples keeps at least one in the reference side
    for c in np.flatnonzero((class_sizes > 0) & (counts == 0)):
        counts[c] = 1
        donors = np.flatnonzero(counts >= 2)
        if donors.size:
            donor = donors[np.argmax(counts[donors])]
            counts[donor] -= 1
    return counts


def split_train_eval(
    bundle: EmbeddingBundle,
    fraction: float = 0.8,
    seed: int = 0,
    stratified: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic split of sample indices into (S1, S2).

    S1 gets round(fraction * n) indices; the split is exhaustive and
    disjoint.  Under ``stratified``, per-class proportions are kept
    within one sample and every non-empty class contributes at least
    one sample to S1 (a single-sample class goes entirely to S1).
    """
    n = bundle.n
    if n < 2:
        raise ValueError("split requires at least 2 samples")
    if not 0.0 < fraction < 1.0:
        raise ValueError("split fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    total = _round_half_up(fraction * n)

    if not stratified:
        perm = rng.permutation(n)
        return np.sort(perm[:total]), np.sort(perm[total:])

    class_sizes = np.bincount(bundle.labels.astype(np.int64), minlength=bundle.num_classes)
    counts = _stratified_counts(class_sizes, fraction, total)
    s1_parts, s2_parts = [], []
    for c in range(bundle.num_classes):
        idx = np.flatnonzero(bundle.labels == c)
        if idx.size == 0:
            continue
        idx = rng.permutation(idx)
        s1_parts.append(idx[: counts[c]])
        s2_parts.append(idx[counts[c] :])
    s1 = np.sort(np.concatenate(s1_parts))
    s2 = np.sort(np.concatenate(s2_parts)) if any(p.size for p in s2_parts) else np.array([], dtype=np.int64)
    return s1, s2


def stratified_kfold(labels: np.ndarray, n_folds: int, seed: int) -> list[np.ndarray]:
    """Seeded stratified partition into n_folds disjoint index arrays."""
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    folds: list[list[np.ndarray]] = [[] for _ in range(n_folds)]
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        for f in range(n_folds):
            folds[f].append(idx[f::n_folds])
    return [np.sort(np.concatenate(parts)) for parts in folds]
