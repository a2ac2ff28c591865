"""Capacity sets of a dictionary: the per-atom vector q and per-pair matrix Q.

``q[k]`` is the largest k-th coordinate any unit-l1-norm null vector of D
can have; ``Q[i, j]`` the largest value of ``max(d_i + d_j, d_i - d_j)``
under the same constraint.  Both come from families of independent
l1-minimization LPs: a coordinate functional is fixed to 1 and the
minimal l1 norm inverted.  An infeasible LP means the functional
vanishes on the null space and the capacity is 0.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lp_core import DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL, LpStatus, NumericalFailure, min_l1_nullspace
from .dictionary import Dictionary

__all__ = [
    "CapacityVector",
    "CapacityMatrix",
    "RatioStats",
    "EmptyDomain",
    "capacity_vector",
    "capacity_matrix",
    "ratio_stats",
    "save_capacity_vector",
    "load_capacity_vector",
    "save_capacity_matrix",
    "load_capacity_matrix",
]


class EmptyDomain(ValueError):
    """No index pair with positive capacity sum exists."""


@dataclass(frozen=True)
class CapacityVector:
    """Capacity per atom with population mean and variance."""

    q: np.ndarray
    E_q: float
    var_q: float

    @classmethod
    def from_values(cls, q: np.ndarray) -> "CapacityVector":
        q = np.asarray(q, dtype=float)
        return cls(q=q, E_q=float(q.mean()), var_q=float(q.var()))

    def __len__(self) -> int:
        return self.q.size


@dataclass(frozen=True)
class CapacityMatrix:
    """Upper-triangular pair capacities with mean/variance over the
    L(L-1)/2 entries above the diagonal."""

    Q: np.ndarray
    E_Q: float
    var_Q: float

    @classmethod
    def from_values(cls, Q: np.ndarray) -> "CapacityMatrix":
        Q = np.asarray(Q, dtype=float)
        vals = Q[np.triu_indices(Q.shape[0], k=1)]
        return cls(Q=Q, E_Q=float(vals.mean()), var_Q=float(vals.var()))

    @property
    def n_atoms(self) -> int:
        return self.Q.shape[0]

    def value(self, i: int, j: int) -> float:
        if i == j:
            raise IndexError("pair capacity needs two distinct indices")
        return float(self.Q[min(i, j), max(i, j)])

    def pair_values(self) -> np.ndarray:
        return self.Q[np.triu_indices(self.Q.shape[0], k=1)]


@dataclass(frozen=True)
class RatioStats:
    """Statistics of R = Q_ij / (q_i + q_j) over pairs with positive
    denominator; the spread is carried both as variance and as standard
    deviation."""

    mean_R: float
    var_R: float
    std_R: float
    count: int


def _q_entry(D: np.ndarray, k: int, feas_tol: float, opt_tol: float) -> float:
    sol = min_l1_nullspace(D, [(k, 1.0)], 1.0, feas_tol=feas_tol, opt_tol=opt_tol)
    if sol.status is LpStatus.Optimal:
        return 1.0 / sol.objective_value
    return 0.0


def _q_chunk(args) -> list[float]:
    D, ks, feas_tol, opt_tol = args
    out = []
    for k in ks:
        try:
            out.append(_q_entry(D, int(k), feas_tol, opt_tol))
        except NumericalFailure as exc:
            raise NumericalFailure(f"capacity index {k}: {exc}") from exc
    return out


def _pair_entry(D: np.ndarray, i: int, j: int, feas_tol: float, opt_tol: float) -> float:
    best = np.inf
    for sign in (1.0, -1.0):
        sol = min_l1_nullspace(
            D, [(i, 1.0), (j, sign)], 1.0, feas_tol=feas_tol, opt_tol=opt_tol
        )
        if sol.status is LpStatus.Optimal:
            best = min(best, sol.objective_value)
    return 1.0 / best if np.isfinite(best) else 0.0


def _pair_chunk(args) -> list[float]:
    D, pairs, feas_tol, opt_tol = args
    out = []
    for i, j in pairs:
        try:
            out.append(_pair_entry(D, int(i), int(j), feas_tol, opt_tol))
        except NumericalFailure as exc:
            raise NumericalFailure(f"capacity pair ({i},{j}): {exc}") from exc
    return out


def _run_chunks(worker, chunks, jobs: int):
    if jobs <= 1 or len(chunks) <= 1:
        return [worker(ch) for ch in chunks]
    # results keyed by submission order, independent of completion order
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, chunks))


def default_jobs() -> int:
    return max(1, os.cpu_count() or 1)


def capacity_vector(
    D: Dictionary,
    feas_tol: float = DEFAULT_FEAS_TOL,
    opt_tol: float = DEFAULT_OPT_TOL,
    jobs: int = 1,
) -> CapacityVector:
    """One LP per atom: fix that coordinate to 1 on the null space and
    invert the minimal l1 norm."""
    m = D.matrix
    L = D.n_atoms
    ks = np.arange(L)
    n_chunks = min(max(jobs * 4, 1), L) if jobs > 1 else 1
    chunks = [
        (m, sub, feas_tol, opt_tol) for sub in np.array_split(ks, n_chunks)
    ]
    parts = _run_chunks(_q_chunk, chunks, jobs)
    q = np.array([v for part in parts for v in part])
    return CapacityVector.from_values(q)


def capacity_matrix(
    D: Dictionary,
    feas_tol: float = DEFAULT_FEAS_TOL,
    opt_tol: float = DEFAULT_OPT_TOL,
    jobs: int = 1,
    progress=None,
) -> CapacityMatrix:
    """Two LPs per pair (the +/- coordinate combinations); entries are
    assembled by pair index regardless of worker scheduling.

    ``progress``: optional callable invoked as ``progress(done, total)``
    after each chunk.
    """
    m = D.matrix
    L = D.n_atoms
    iu = np.triu_indices(L, k=1)
    pairs = np.column_stack(iu)
    n_chunks = min(max(jobs * 8, 1), len(pairs)) if jobs > 1 else max(
        1, len(pairs) // 512
    )
    chunk_list = np.array_split(pairs, n_chunks)
    vals: list[float] = []
    if jobs <= 1:
        done = 0
        for sub in chunk_list:
            vals.extend(_pair_chunk((m, sub, feas_tol, opt_tol)))
            done += len(sub)
            if progress is not None:
                progress(done, len(pairs))
    else:
        chunks = [(m, sub, feas_tol, opt_tol) for sub in chunk_list]
        done = 0
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for sub, part in zip(chunk_list, pool.map(_pair_chunk, chunks)):
                vals.extend(part)
                done += len(sub)
                if progress is not None:
                    progress(done, len(pairs))
    Q = np.zeros((L, L))
    Q[iu] = np.array(vals)
    return CapacityMatrix.from_values(Q)


def ratio_stats(cv: CapacityVector, cm: CapacityMatrix) -> RatioStats:
    """Mean and spread of Q_ij / (q_i + q_j) over valid pairs."""
    q = cv.q
    L = q.size
    iu = np.triu_indices(L, k=1)
    denom = q[iu[0]] + q[iu[1]]
    keep = denom > 0
    if not keep.any():
        raise EmptyDomain("no pair with q_i + q_j > 0")
    R = cm.Q[iu][keep] / denom[keep]
    return RatioStats(
        mean_R=float(R.mean()),
        var_R=float(R.var()),
        std_R=float(R.std()),
        count=int(R.size),
    )


def save_capacity_vector(cv: CapacityVector, path, label: str = "") -> None:
    """CSV rows ``k,q_k`` with 1-based k, plus a header echoing the label."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# capset-q v1 L={len(cv)} label={label}\n")
        fh.write("k,q_k\n")
        for k, v in enumerate(cv.q, start=1):
            fh.write(f"{k},{v:.17g}\n")


def load_capacity_vector(path) -> CapacityVector:
    q = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("k,"):
                continue
            _, v = line.strip().split(",")
            q.append(float(v))
    return CapacityVector.from_values(np.array(q))


def save_capacity_matrix(cm: CapacityMatrix, path, label: str = "") -> None:
    """CSV rows ``i,j,Q_ij`` (1-based, i < j) with a label header."""
    L = cm.n_atoms
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# capset-Q v1 L={L} label={label}\n")
        fh.write("i,j,Q_ij\n")
        for i in range(L):
            for j in range(i + 1, L):
                fh.write(f"{i + 1},{j + 1},{cm.Q[i, j]:.17g}\n")


def load_capacity_matrix(path) -> CapacityMatrix:
    entries = []
    L = 0
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if header.startswith("# capset-Q v1"):
            for tok in header.split():
                if tok.startswith("L="):
                    L = int(tok[2:])
        for line in fh:
            if line.startswith("#") or line.startswith("i,"):
                continue
            i, j, v = line.strip().split(",")
            entries.append((int(i) - 1, int(j) - 1, float(v)))
    if L == 0:
        L = 1 + max(j for _, j, _ in entries)
    Q = np.zeros((L, L))
    for i, j, v in entries:
        Q[i, j] = v
    return CapacityMatrix.from_values(Q)


def validate_capacity_invariants(
    cv: CapacityVector,
    cm: CapacityMatrix | None = None,
    mu_k: np.ndarray | None = None,
    tol: float = 1e-8,
) -> list[str]:
    """Check the structural inequalities; returns human-readable violations.

    * 0 <= q_k < 1
    * q_k <= mu_k / (mu_k + 1) when a coherence profile is supplied
    * max(q_i, q_j) <= Q_ij <= q_i + q_j for every pair
    """
    issues: list[str] = []
    q = cv.q
    if (q < -tol).any() or (q >= 1.0 + tol).any():
        issues.append("q outside [0, 1)")
    if mu_k is not None:
        bound = mu_k / (mu_k + 1.0)
        bad = np.flatnonzero(q > bound + tol)
        for k in bad:
            issues.append(f"q[{k}]={q[k]:.6g} exceeds mu_k/(mu_k+1)={bound[k]:.6g}")
    if cm is not None:
        L = q.size
        iu = np.triu_indices(L, k=1)
        vals = cm.Q[iu]
        lo = np.maximum(q[iu[0]], q[iu[1]])
        hi = q[iu[0]] + q[iu[1]]
        bad = np.flatnonzero(vals < lo - tol)
        for t in bad[:20]:
            issues.append(
                f"Q[{iu[0][t]},{iu[1][t]}]={vals[t]:.6g} below max(q_i,q_j)={lo[t]:.6g}"
            )
        bad = np.flatnonzero(vals > hi + tol)
        for t in bad[:20]:
            issues.append(
                f"Q[{iu[0][t]},{iu[1][t]}]={vals[t]:.6g} above q_i+q_j={hi[t]:.6g}"
            )
    return issues
