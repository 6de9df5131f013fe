"""Pure-numpy neighbor selection and voting kernels.

Semantics are pinned to match the compiled extension bit for bit:

* neighbors are ordered by similarity descending, with rank ties at
  equal similarity broken by lower sample index;
* the majority vote breaks count ties by higher summed similarity of
  the tied classes, then by lower class index;
* the weighted vote scores classes by summed similarity directly, ties
  broken by lower class index.
"""

from __future__ import annotations

import numpy as np


def top_k_block(sims: np.ndarray, k: int) -> np.ndarray:
    """Per-row indices of the k best columns, ordered by (-similarity, index)."""
    q, m = sims.shape
    k = min(k, m)
    out = np.empty((q, k), dtype=np.int64)
    full_sort = k >= m
    for row in range(q):
        s = sims[row]
        if full_sort:
            sel = np.arange(m)
        else:
            part = np.argpartition(-s, k - 1)[:k]
            thresh = s[part].min()
            above = np.flatnonzero(s > thresh)
            ties = np.flatnonzero(s == thresh)
            sel = np.concatenate([above, ties[: k - above.size]])
        order = np.lexsort((sel, -s[sel]))
        out[row] = sel[order]
    return out


def vote_block(
    top_labels: np.ndarray,
    top_sims: np.ndarray,
    k: int,
    num_classes: int,
    weighted: bool = False,
) -> np.ndarray:
    """Predicted class per row from the first k ranked neighbors."""
    q = top_labels.shape[0]
    k = min(k, top_labels.shape[1])
    preds = np.empty(q, dtype=np.int64)
    for row in range(q):
        labels = top_labels[row, :k]
        sims = top_sims[row, :k]
        sums = np.bincount(labels, weights=sims, minlength=num_classes)
        counts = np.bincount(labels, minlength=num_classes)
        if weighted:
            present = np.flatnonzero(counts > 0)
            cand = present[sums[present] == sums[present].max()]
        else:
            cand = np.flatnonzero(counts == counts.max())
            if cand.size > 1:
                cand = cand[sums[cand] == sums[cand].max()]
        preds[row] = cand.min()
    return preds
