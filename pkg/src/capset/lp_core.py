"""Dense equality-constrained LP solver used by every capacity computation.

All capacity values and Basis Pursuit solves reduce to linear programs of
the form ``min c@x  s.t.  A x = b``, with nonnegative (or shifted / free)
variables.  The solver is a two-phase revised simplex with an explicit
basis inverse, Dantzig pricing by default and an automatic switch to
Bland's rule after a stall, which guarantees termination on the heavily
degenerate null-space problems this package generates.

The pivoting kernel is written in a numba-compatible numpy subset and is
JIT-compiled when numba is importable; otherwise the same function runs
as plain numpy.  Both paths follow identical pivot rules, so results are
deterministic for a given build configuration.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LpProblem",
    "LpSolution",
    "LpStatus",
    "NumericalFailure",
    "DEFAULT_FEAS_TOL",
    "DEFAULT_OPT_TOL",
    "solve_lp",
    "min_l1_nullspace",
    "basis_pursuit",
]

DEFAULT_FEAS_TOL = 1e-9
DEFAULT_OPT_TOL = 1e-9

# kernel exit codes
_OPTIMAL = 0
_INFEASIBLE = 1
_UNBOUNDED = 2
_ITER_CAP = 3
_SINGULAR = 4
_PERTURB_FAIL = 5


class NumericalFailure(RuntimeError):
    """Pivoting degenerated beyond the iteration cap or the basis went bad."""


class LpStatus(enum.Enum):
    Optimal = "optimal"
    Infeasible = "infeasible"
    Unbounded = "unbounded"


@dataclass(frozen=True)
class LpProblem:
    """``min objective @ x  s.t.  constraint_matrix @ x = rhs, x >= lb``.

    ``variable_lower_bounds`` entries are finite reals or ``-inf`` (free).
    """

    objective: np.ndarray
    constraint_matrix: np.ndarray
    rhs: np.ndarray
    variable_lower_bounds: np.ndarray | None = None

    def __post_init__(self) -> None:
        c = np.asarray(self.objective, dtype=float).ravel()
        A = np.atleast_2d(np.asarray(self.constraint_matrix, dtype=float))
        b = np.asarray(self.rhs, dtype=float).ravel()
        lb = self.variable_lower_bounds
        lb = np.zeros(c.size) if lb is None else np.asarray(lb, dtype=float).ravel()
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "constraint_matrix", A)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "variable_lower_bounds", lb)
        m, n = A.shape
        if c.size != n:
            raise ValueError(f"objective length {c.size} != column count {n}")
        if b.size != m:
            raise ValueError(f"rhs length {b.size} != row count {m}")
        if lb.size != n:
            raise ValueError(f"lower-bound length {lb.size} != column count {n}")
        if not (np.isfinite(A).all() and np.isfinite(b).all() and np.isfinite(c).all()):
            raise ValueError("constraint matrix, rhs and objective must be finite")
        if np.isnan(lb).any() or (lb == np.inf).any():
            raise ValueError("lower bounds must be finite or -inf")

    @property
    def n_rows(self) -> int:
        return self.constraint_matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.constraint_matrix.shape[1]


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    optimizer: np.ndarray | None = None
    objective_value: float | None = None
    iterations: int = 0

    def __post_init__(self) -> None:
        if self.status is LpStatus.Optimal:
            if self.optimizer is None or self.objective_value is None:
                raise ValueError("Optimal solution requires optimizer and value")
        elif self.optimizer is not None or self.objective_value is not None:
            raise ValueError("non-Optimal solution must not carry an optimizer")


def _simplex_kernel(At, b, c, feas_tol, opt_tol, max_iter, stall_limit,
                    refactor_every, perturb):
    """Two-phase revised simplex on ``min c@x, A x = b, x >= 0``.

    ``At`` is the transposed constraint matrix (columns stored as rows so
    every column access is contiguous).  Returns
    ``(status, x, objective, iterations)``; ``x`` is meaningful only for
    status 0.  Artificial columns are kept implicit: basis entries ``>= n``
    stand for unit columns and are barred from re-entering once they leave.
    """
    n = At.shape[0]
    m = At.shape[1]

    A2 = At  # rows of At are the columns of A
    b = b.copy()
    # orient rows so the artificial start b >= 0 is feasible
    flip = np.ones(m)
    for i in range(m):
        if b[i] < 0.0:
            flip[i] = -1.0
            b[i] = -b[i]
    A2 = A2 * flip  # broadcast over columns of At == rows of A

    # graded deterministic perturbation of the rhs removes the degenerate
    # plateaus these null-space problems are full of; the final basis is
    # re-solved against the exact rhs, so no perturbation leaks into the
    # result (reduced costs never depend on the rhs at all)
    b_exact = b.copy()
    if perturb > 0.0:
        bscale = 1.0
        for i in range(m):
            if abs(b[i]) > bscale:
                bscale = abs(b[i])
        for i in range(m):
            h = np.sin((i + 1) * 12.9898) * 43758.5453
            b[i] += perturb * bscale * (0.5 + (h - np.floor(h)))

    basis = np.empty(m, dtype=np.int64)
    for i in range(m):
        basis[i] = n + i
    Binv = np.eye(m)
    xB = b.copy()

    in_basis = np.zeros(n, dtype=np.bool_)
    x = np.zeros(n)
    iters = 0

    for phase in range(1, 3):
        bland = False
        stall = 0
        last_obj = 1e300  # finite sentinel: keeps the stall test NaN-free
        refac = 0
        while True:
            if iters >= max_iter:
                return _ITER_CAP, x, 0.0, iters

            # dual prices for the current phase objective
            y = np.zeros(m)
            for i in range(m):
                bi = basis[i]
                cb = 0.0
                if phase == 1:
                    if bi >= n:
                        cb = 1.0
                else:
                    if bi < n:
                        cb = c[bi]
                if cb != 0.0:
                    for t in range(m):
                        y[t] += cb * Binv[i, t]

            r = np.dot(A2, y)  # r[j] = y @ a_j
            # entering column among real variables only
            tol_in = opt_tol if phase == 2 else max(opt_tol, feas_tol)
            j_in = -1
            if bland:
                for j in range(n):
                    if in_basis[j]:
                        continue
                    rc = (c[j] - r[j]) if phase == 2 else (0.0 - r[j])
                    if rc < -tol_in:
                        j_in = j
                        break
            else:
                best = -tol_in
                for j in range(n):
                    if in_basis[j]:
                        continue
                    rc = (c[j] - r[j]) if phase == 2 else (0.0 - r[j])
                    if rc < best:
                        best = rc
                        j_in = j
            if j_in < 0:
                break  # phase optimal

            d = np.dot(Binv, A2[j_in])

            # ratio test; small negative basic values read as 0 (drift guard)
            lv = -1
            if bland:
                best_ratio = np.inf
                best_var = np.int64(1 << 60)
                for i in range(m):
                    if d[i] > feas_tol:
                        xi = xB[i]
                        if xi < 0.0:
                            xi = 0.0
                        ratio = xi / d[i]
                        if ratio < best_ratio - 1e-12 or (
                            ratio <= best_ratio + 1e-12 and basis[i] < best_var
                        ):
                            if ratio < best_ratio:
                                best_ratio = ratio
                            lv = i
                            best_var = basis[i]
                ratio_min = best_ratio
            else:
                ratio_min = np.inf
                for i in range(m):
                    if d[i] > feas_tol:
                        xi = xB[i]
                        if xi < 0.0:
                            xi = 0.0
                        ratio = xi / d[i]
                        if ratio < ratio_min:
                            ratio_min = ratio
                # among near-ties prefer the largest pivot element
                best_piv = 0.0
                thr = ratio_min + 1e-9 * (1.0 + abs(ratio_min))
                for i in range(m):
                    if d[i] > feas_tol:
                        xi = xB[i]
                        if xi < 0.0:
                            xi = 0.0
                        if xi / d[i] <= thr and d[i] > best_piv:
                            best_piv = d[i]
                            lv = i
            if lv < 0:
                if phase == 1:
                    # phase-1 objective is bounded below; treat as numerical
                    return _SINGULAR, x, 0.0, iters
                return _UNBOUNDED, x, 0.0, iters

            # pivot: basis[lv] <- j_in, update Binv and xB
            if basis[lv] < n:
                in_basis[basis[lv]] = False
            in_basis[j_in] = True
            basis[lv] = j_in
            piv = d[lv]
            inv_piv = 1.0 / piv
            for t in range(m):
                Binv[lv, t] *= inv_piv
            xlv = xB[lv] * inv_piv
            xB[lv] = xlv
            for i in range(m):
                if i != lv:
                    di = d[i]
                    if di != 0.0:
                        for t in range(m):
                            Binv[i, t] -= di * Binv[lv, t]
                        xB[i] -= di * xlv
                        if xB[i] < 0.0 and xB[i] > -feas_tol:
                            xB[i] = 0.0
            iters += 1
            refac += 1

            if refac >= refactor_every:
                st = _refactor(A2, b, basis, Binv, xB, n, m)
                if st != 0:
                    return _SINGULAR, x, 0.0, iters
                refac = 0

            # stall detection drives the Dantzig -> Bland switch
            if not bland:
                obj = 0.0
                for i in range(m):
                    bi = basis[i]
                    if phase == 1:
                        if bi >= n:
                            obj += xB[i]
                    else:
                        if bi < n:
                            obj += c[bi] * xB[i]
                if obj < last_obj - 1e-12 * (1.0 + abs(last_obj)):
                    last_obj = obj
                    stall = 0
                else:
                    stall += 1
                    if stall >= stall_limit:
                        bland = True

        if phase == 1:
            st = _refactor(A2, b, basis, Binv, xB, n, m)
            if st != 0:
                return _SINGULAR, x, 0.0, iters
            p1 = 0.0
            for i in range(m):
                if basis[i] >= n:
                    p1 += xB[i]
            bscale = 1.0
            for i in range(m):
                if abs(b[i]) > bscale:
                    bscale = abs(b[i])
            # perturbation can leave O(m * perturb) mass on artificials of
            # redundant-but-consistent rows; anything well above that means
            # genuinely contradictory constraints
            if p1 > (1e4 * feas_tol + 4.0 * m * perturb) * bscale:
                return _INFEASIBLE, x, 0.0, iters
            # drive residual artificials out of the basis where possible,
            # preferring the largest pivot for stability
            for i in range(m):
                if basis[i] >= n:
                    found = -1
                    best_v = 1e-7
                    for j in range(n):
                        if in_basis[j]:
                            continue
                        v = 0.0
                        for t in range(m):
                            v += Binv[i, t] * A2[j, t]
                        if abs(v) > best_v:
                            best_v = abs(v)
                            found = j
                    if found >= 0:
                        d = np.dot(Binv, A2[found])
                        in_basis[found] = True
                        basis[i] = found
                        piv = d[i]
                        inv_piv = 1.0 / piv
                        for t in range(m):
                            Binv[i, t] *= inv_piv
                        xlv = xB[i] * inv_piv
                        xB[i] = xlv
                        for i2 in range(m):
                            if i2 != i:
                                di = d[i2]
                                if di != 0.0:
                                    for t in range(m):
                                        Binv[i2, t] -= di * Binv[i, t]
                                    xB[i2] -= di * xlv
                    # else: Binv[i] @ a_j == 0 for every real column, so no
                    # later pivot can touch this row; the artificial stays
                    # pinned at 0 for a redundant constraint.

    # resolve the optimal basis against the exact rhs; perturbation can
    # leave degenerate basics a hair negative, which a short dual-simplex
    # cleanup removes while keeping the reduced costs nonnegative
    st = _refactor(A2, b_exact, basis, Binv, xB, n, m)
    if st != 0:
        return _SINGULAR, x, 0.0, iters
    cleanup = 0
    refac = 0
    while True:
        r_row = -1
        worst = -feas_tol
        for i in range(m):
            if xB[i] < worst:
                worst = xB[i]
                r_row = i
        if r_row < 0:
            break
        if cleanup >= 200:
            return _PERTURB_FAIL, x, 0.0, iters
        # current dual prices and reduced-cost inner products
        y = np.zeros(m)
        for i in range(m):
            bi = basis[i]
            if bi < n and c[bi] != 0.0:
                cb = c[bi]
                for t in range(m):
                    y[t] += cb * Binv[i, t]
        rdot = np.dot(A2, y)
        w = np.dot(A2, Binv[r_row])  # w[j] = a_j @ Binv[r_row]
        best_j = -1
        best_ratio = np.inf
        for j in range(n):
            if in_basis[j]:
                continue
            wj = w[j]
            if wj < -1e-11:
                ratio = (c[j] - rdot[j]) / (-wj)
                if ratio < best_ratio:
                    best_ratio = ratio
                    best_j = j
        if best_j < 0:
            return _PERTURB_FAIL, x, 0.0, iters
        d = np.dot(Binv, A2[best_j])
        if basis[r_row] < n:
            in_basis[basis[r_row]] = False
        in_basis[best_j] = True
        basis[r_row] = best_j
        piv = d[r_row]
        inv_piv = 1.0 / piv
        for t in range(m):
            Binv[r_row, t] *= inv_piv
        xlv = xB[r_row] * inv_piv
        xB[r_row] = xlv
        for i in range(m):
            if i != r_row:
                di = d[i]
                if di != 0.0:
                    for t in range(m):
                        Binv[i, t] -= di * Binv[r_row, t]
                    xB[i] -= di * xlv
        cleanup += 1
        refac += 1
        if refac >= 50:
            st = _refactor(A2, b_exact, basis, Binv, xB, n, m)
            if st != 0:
                return _SINGULAR, x, 0.0, iters
            refac = 0
    if cleanup > 0:
        st = _refactor(A2, b_exact, basis, Binv, xB, n, m)
        if st != 0:
            return _SINGULAR, x, 0.0, iters

    obj = 0.0
    feas = True
    for i in range(m):
        if xB[i] < -feas_tol:
            feas = False
        bi = basis[i]
        if bi < n:
            if xB[i] < 0.0:
                xB[i] = 0.0
            x[bi] = xB[i]
            obj += c[bi] * xB[i]
        else:
            if abs(xB[i]) > feas_tol:
                feas = False
    if not feas:
        # optimal for the perturbed rhs but not restorable for the exact
        # one: the caller re-runs without perturbation
        return _PERTURB_FAIL, x, 0.0, iters
    return _OPTIMAL, x, obj, iters


def _refactor_kernel(A2, b, basis, Binv, xB, n, m):
    """Recompute Binv and xB from scratch for the current basis."""
    B = np.empty((m, m))
    for i in range(m):
        bi = basis[i]
        if bi < n:
            for t in range(m):
                B[t, i] = A2[bi, t]
        else:
            for t in range(m):
                B[t, i] = 0.0
            B[bi - n, i] = 1.0
    # near-singular bases surface as inf/nan entries and are reported;
    # exactly singular ones raise LinAlgError, mapped by the caller
    Bi = np.linalg.inv(B)
    for i in range(m):
        ok = True
        for t in range(m):
            v = Bi[i, t]
            if not np.isfinite(v):
                ok = False
                break
        if not ok:
            return 1
        for t in range(m):
            Binv[i, t] = Bi[i, t]
    nx = np.dot(Bi, b)
    for i in range(m):
        if not np.isfinite(nx[i]):
            return 1
        xB[i] = nx[i]
    return 0


_refactor = _refactor_kernel
try:  # pragma: no cover - exercised implicitly by every solve
    import numba

    _refactor = numba.njit(cache=True, fastmath=False)(_refactor_kernel)
    _kernel_jit = numba.njit(cache=True, fastmath=False)(_simplex_kernel)
except ImportError:  # pragma: no cover
    numba = None
    _kernel_jit = _simplex_kernel


_PERTURB_EPS = 1e-7


def _run_kernel(A, b, c, feas_tol, opt_tol, max_iter, stall_limit=2000, refactor_every=100):
    At = np.ascontiguousarray(A.T)
    b = np.ascontiguousarray(b, dtype=float)
    c = np.ascontiguousarray(c, dtype=float)
    try:
        out = _kernel_jit(At, b, c, feas_tol, opt_tol, max_iter, stall_limit,
                          refactor_every, _PERTURB_EPS)
        if out[0] in (_SINGULAR, _PERTURB_FAIL):
            # deterministic fallbacks: exact rhs first, then an early
            # anti-cycling switch with a tight refactorization schedule
            out = _kernel_jit(At, b, c, feas_tol, opt_tol, max_iter,
                              stall_limit, refactor_every, 0.0)
        if out[0] in (_SINGULAR, _PERTURB_FAIL):
            out = _kernel_jit(At, b, c, feas_tol, opt_tol, max_iter, 500, 30, 0.0)
        return out
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"singular basis: {exc}") from exc


def solve_lp(
    problem: LpProblem,
    feas_tol: float = DEFAULT_FEAS_TOL,
    opt_tol: float = DEFAULT_OPT_TOL,
    max_iter: int | None = None,
) -> LpSolution:
    """Solve an equality-constrained LP to a simplex vertex.

    Finite lower bounds are handled by shifting, ``-inf`` bounds by an
    internal positive/negative split.  Raises :class:`NumericalFailure`
    when the pivot count exceeds the cap (default ``50 * (m + n)``) or the
    basis cannot be kept numerically sound.
    """
    if feas_tol <= 0 or opt_tol <= 0:
        raise ValueError("tolerances must be positive")
    A = problem.constraint_matrix
    c = problem.objective
    b = problem.rhs
    lb = problem.variable_lower_bounds
    m, n = A.shape

    free = ~np.isfinite(lb)
    shift = np.where(free, 0.0, lb)
    b_int = b - A @ shift
    if free.any():
        A_int = np.hstack([A, -A[:, free]])
        c_int = np.concatenate([c, -c[free]])
    else:
        A_int = A
        c_int = c
    n_int = A_int.shape[1]
    if max_iter is None:
        max_iter = 50 * (m + n_int)

    status, z, obj, iters = _run_kernel(A_int, b_int, c_int, feas_tol, opt_tol, max_iter)
    if status == _ITER_CAP:
        raise NumericalFailure(f"iteration cap {max_iter} reached ({m}x{n} LP)")
    if status in (_SINGULAR, _PERTURB_FAIL):
        raise NumericalFailure("basis factorization failed")
    if status == _INFEASIBLE:
        return LpSolution(LpStatus.Infeasible, iterations=int(iters))
    if status == _UNBOUNDED:
        return LpSolution(LpStatus.Unbounded, iterations=int(iters))

    x = z[:n].copy()
    if free.any():
        x[free] -= z[n:]
    x += shift
    return LpSolution(
        LpStatus.Optimal,
        optimizer=x,
        objective_value=float(c @ x),
        iterations=int(iters),
    )


def _solve_l1_split(D: np.ndarray, extra_rows: np.ndarray, extra_rhs: np.ndarray,
                    rhs_top: np.ndarray, feas_tol: float, opt_tol: float) -> LpSolution:
    """min ||x||_1 s.t. D x = rhs_top and extra_rows @ x = extra_rhs.

    Positive/negative split: x = u - v with u, v >= 0 and objective
    sum(u) + sum(v); a simplex vertex never carries u_i and v_i together,
    so u_i * v_i = 0 holds structurally at the optimum.
    """
    D = np.asarray(D, dtype=float)
    N, L = D.shape
    M = np.vstack([D, extra_rows]) if extra_rows.size else D
    b = np.concatenate([rhs_top, extra_rhs])
    A = np.hstack([M, -M])
    c = np.ones(2 * L)
    m, n = A.shape
    status, z, obj, iters = _run_kernel(A, b, c, feas_tol, opt_tol, 50 * (m + n))
    if status == _ITER_CAP:
        raise NumericalFailure(f"iteration cap reached on {m}x{n} l1 problem")
    if status in (_SINGULAR, _PERTURB_FAIL):
        raise NumericalFailure("basis factorization failed on l1 problem")
    if status == _INFEASIBLE:
        return LpSolution(LpStatus.Infeasible, iterations=int(iters))
    if status == _UNBOUNDED:  # cannot happen: objective >= 0
        raise NumericalFailure("l1 problem reported unbounded")
    x = z[:L] - z[L:]
    return LpSolution(
        LpStatus.Optimal,
        optimizer=x,
        objective_value=float(obj),
        iterations=int(iters),
    )


def min_l1_nullspace(
    D: np.ndarray,
    fixed: list[tuple[int, float]],
    target: float,
    feas_tol: float = DEFAULT_FEAS_TOL,
    opt_tol: float = DEFAULT_OPT_TOL,
) -> LpSolution:
    """min ||x||_1 s.t. D x = 0 and sum(coeff * x[idx] for idx, coeff in fixed) = target.

    Indices are 0-based.  Infeasible is an expected outcome: it signals
    that the fixed linear functional vanishes on the null space of D.
    """
    if not fixed:
        raise ValueError("fixed must be non-empty")
    if target == 0:
        raise ValueError("target must be nonzero")
    D = np.asarray(D, dtype=float)
    N, L = D.shape
    row = np.zeros((1, L))
    for idx, coeff in fixed:
        if not 0 <= idx < L:
            raise IndexError(f"fixed index {idx} outside [0, {L})")
        row[0, idx] += coeff
    return _solve_l1_split(
        D, row, np.array([float(target)]), np.zeros(N), feas_tol, opt_tol
    )


def basis_pursuit(
    D: np.ndarray,
    s: np.ndarray,
    feas_tol: float = DEFAULT_FEAS_TOL,
    opt_tol: float = DEFAULT_OPT_TOL,
) -> LpSolution:
    """min ||a||_1 s.t. D a = s (the l1 recovery program).

    Infeasible when s lies outside the column span of a rank-deficient D.
    """
    D = np.asarray(D, dtype=float)
    s = np.asarray(s, dtype=float).ravel()
    N, L = D.shape
    if s.size != N:
        raise ValueError(f"signal length {s.size} != row count {N}")
    if not np.isfinite(s).all():
        raise ValueError("signal must be finite")
    return _solve_l1_split(D, np.empty((0, L)), np.empty(0), s, feas_tol, opt_tol)
