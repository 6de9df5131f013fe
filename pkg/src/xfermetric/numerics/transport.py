"""Exact optimal transport between two weighted point sets.

Cluster counts in this codebase are class counts (at most ~1000), so
the transportation problem is solved exactly as a linear program via
HiGHS rather than with an entropic approximation.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

WEIGHT_SUM_TOL = 1e-9
MARGINAL_TOL = 1e-8


def ot_exact(w_a: np.ndarray, w_b: np.ndarray, cost: np.ndarray) -> float:
    """Minimum-cost transport value between distributions w_a and w_b.

    Both weight vectors must be nonnegative and sum to 1 within
    WEIGHT_SUM_TOL; ``cost`` is the (len(w_a), len(w_b)) ground-cost
    matrix with finite nonnegative entries.  The optimal plan's
    marginals are verified against the inputs before the value is
    returned.
    """
    w_a = np.asarray(w_a, dtype=np.float64)
    w_b = np.asarray(w_b, dtype=np.float64)
    cost = np.asarray(cost, dtype=np.float64)
    if cost.shape != (w_a.size, w_b.size):
        raise ValueError("cost matrix shape does not match the weight vectors")
    if np.any(w_a < 0) or np.any(w_b < 0):
        raise ValueError("weights must be nonnegative")
    for name, w in (("first", w_a), ("second", w_b)):
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"{name} weight vector sums to {w.sum()!r}, not 1")
    if not np.all(np.isfinite(cost)) or np.any(cost < 0):
        raise ValueError("costs must be finite and nonnegative")

    w_a = w_a / w_a.sum()
    w_b = w_b / w_b.sum()
    na, nb = w_a.size, w_b.size

    # marginal equality constraints; the last row is redundant and dropped
    rows = []
    for i in range(na):
        r = np.zeros(na * nb)
        r[i * nb : (i + 1) * nb] = 1.0
        rows.append(r)
    for j in range(nb - 1):
        r = np.zeros(na * nb)
        r[j::nb] = 1.0
        rows.append(r)
    a_eq = np.vstack(rows)
    b_eq = np.concatenate([w_a, w_b[:-1]])

    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    plan = res.x.reshape(na, nb)
    if (
        np.abs(plan.sum(axis=1) - w_a).max() > MARGINAL_TOL
        or np.abs(plan.sum(axis=0) - w_b).max() > MARGINAL_TOL
    ):
        raise RuntimeError("transport plan marginals drifted beyond tolerance")
    return float((plan * cost).sum())
