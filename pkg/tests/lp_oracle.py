"""Independent brute-force LP oracle: exhaustive vertex enumeration.

Deliberately shares nothing with the simplex implementation.  Every
basic solution (column subset of size m) is solved directly; the best
feasible one is the optimum of ``min c@x s.t. A x = b, x >= 0``.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np


def brute_force_lp(A: np.ndarray, b: np.ndarray, c: np.ndarray, tol: float = 1e-9):
    """Return (status, best_value) with status in {"optimal", "infeasible"}.

    Assumes the problem is not unbounded (true for l1-style objectives).
    """
    m, n = A.shape
    best = np.inf
    found = False
    for cols in combinations(range(n), m):
        B = A[:, cols]
        try:
            x = np.linalg.solve(B, b)
        except np.linalg.LinAlgError:
            continue
        if not np.isfinite(x).all():
            continue
        if (x < -tol).any():
            continue
        if np.abs(B @ x - b).max() > 1e-7:
            continue
        found = True
        val = float(c[list(cols)] @ x)
        if val < best:
            best = val
    if not found:
        return "infeasible", None
    return "optimal", best


def brute_force_min_l1_nullspace(
    D: np.ndarray, fixed: list[tuple[int, float]], target: float
):
    """Oracle for min ||x||_1 s.t. D x = 0, sum coeff*x_idx = target, via the
    split polytope's vertices."""
    N, L = D.shape
    row = np.zeros(L)
    for idx, coeff in fixed:
        row[idx] += coeff
    M = np.vstack([D, row])
    A = np.hstack([M, -M])
    b = np.zeros(N + 1)
    b[-1] = target
    return brute_force_lp(A, b, np.ones(2 * L))
