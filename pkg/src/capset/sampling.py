"""Monte-Carlo estimators and small-instance oracles.

Covers the sampled pair-partition estimator over the capacity matrix,
the end-to-end empirical l1-recovery test, exhaustive sign-pattern
oracles for small supports, and the variance comparison between
without-replacement support sums and their with-replacement surrogates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import combinations, product

import numpy as np

from .bounds import EstimationFunction
from .capacity import CapacityMatrix, CapacityVector
from .dictionary import Dictionary
from .lp_core import LpStatus, NumericalFailure, basis_pursuit, min_l1_nullspace

__all__ = [
    "Support",
    "PairPartition",
    "TrialRecord",
    "VarianceReport",
    "OddSupport",
    "TooLarge",
    "CoefficientModel",
    "greedy_pair_partition",
    "optimal_pair_partition",
    "ef_comp_b",
    "ef_empirical",
    "recovered_support",
    "oracle_val_c_gamma",
    "oracle_sign_pattern_test",
    "variance_experiment",
]

ORACLE_SUPPORT_CAP = 16
RECOVERY_ATOL = 1e-6


class OddSupport(ValueError):
    """Pair partitions need an even number of indices."""


class TooLarge(ValueError):
    """Support exceeds the exhaustive-oracle cap."""


class CoefficientModel(enum.Enum):
    GaussianNonzeros = "gaussian"
    UnitSigns = "signs"


@dataclass(frozen=True)
class Support:
    """Sorted distinct 0-based atom indices."""

    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(set(idx)) != len(idx):
            raise ValueError("support indices must be distinct")
        if idx and idx[0] < 0:
            raise ValueError("support indices must be nonnegative")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)

    def as_array(self) -> np.ndarray:
        return np.array(self.indices, dtype=int)


@dataclass(frozen=True)
class PairPartition:
    """Disjoint pairs covering an even-sized support."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        flat = [i for p in self.pairs for i in p]
        if len(set(flat)) != len(flat):
            raise ValueError("pairs must be disjoint")
        norm = tuple(sorted((min(i, j), max(i, j)) for i, j in self.pairs))
        object.__setattr__(self, "pairs", norm)

    def total(self, cm: CapacityMatrix) -> float:
        return float(sum(cm.value(i, j) for i, j in self.pairs))


@dataclass(frozen=True)
class TrialRecord:
    support: Support
    statistic: float
    seed: int


@dataclass(frozen=True)
class VarianceReport:
    """Per-size empirical vs exact variances for the two capacity sums.

    ``vector_rows``: (ell, var_x_empirical, var_y_exact, stderr_var_x)
    for sums of capacity-vector entries over uniform supports;
    ``pair_rows``: same for random-pair-partition sums over the capacity
    matrix (even ell only).
    """

    vector_rows: list[tuple[int, float, float, float]]
    pair_rows: list[tuple[int, float, float, float]]
    n_samples: int
    seed: int

    def violations(self, sigma_slack: float = 3.0) -> list[str]:
        """Rows where the empirical variance exceeds the exact bound by
        more than ``sigma_slack`` estimated standard errors."""
        out = []
        for kind, rows in (("vector", self.vector_rows), ("pair", self.pair_rows)):
            for ell, vx, vy, se in rows:
                if vx > vy + sigma_slack * se:
                    out.append(
                        f"{kind} ell={ell}: var_x={vx:.6g} > var_y={vy:.6g} "
                        f"+ {sigma_slack}*se({se:.2g})"
                    )
        return out


def _trial_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Counter-based per-trial stream: independent of scheduling order."""
    return np.random.default_rng([master_seed, *path])


def _min_pair(cm: CapacityMatrix, active: list[int]) -> tuple[float, int, int]:
    best = np.inf
    bi = bj = -1
    for a in range(len(active)):
        for b in range(a + 1, len(active)):
            v = cm.value(active[a], active[b])
            if v < best:
                best = v
                bi, bj = active[a], active[b]
    return best, bi, bj


def _couple_candidates(cm: CapacityMatrix, active: list[int]):
    """Minimal-sum couples of disjoint pairs among the active indices.

    The globally minimal single pair (i*, j*) always admits an optimal
    couple with both its endpoints among the four chosen indices: either
    (i*, j*) is one of the two pairs, or i* and j* head the two pairs.
    Only those candidates are scanned.
    """
    _, istar, jstar = _min_pair(cm, active)
    rest = [t for t in active if t != istar and t != jstar]
    cands: list[tuple[float, tuple[int, int], tuple[int, int]]] = []
    # (i*, j*) plus the best disjoint pair
    if len(rest) >= 2:
        v2, a, b = _min_pair(cm, rest)
        cands.append((cm.value(istar, jstar) + v2, (istar, jstar), (a, b)))
    # i* and j* split across the two pairs
    for a in rest:
        for b in rest:
            if a == b:
                continue
            s = cm.value(istar, a) + cm.value(jstar, b)
            cands.append((s, (istar, a), (jstar, b)))
    return cands


def _normalize_couple(p0: tuple[int, int], p1: tuple[int, int]):
    p0 = (min(p0), max(p0))
    p1 = (min(p1), max(p1))
    return (p0, p1) if p0 <= p1 else (p1, p0)


def greedy_pair_partition(cm: CapacityMatrix, support: Support) -> PairPartition:
    """Second-order greedy partition: repeatedly extract the couple of two
    disjoint pairs with the least capacity sum; when two indices remain
    they form the final pair.  Ties resolve to the lexicographically
    smallest (i0, j0, i1, j1)."""
    k = len(support)
    if k % 2 != 0 or k < 2:
        raise OddSupport(f"support size must be even and >= 2, got {k}")
    active = list(support.indices)
    pairs: list[tuple[int, int]] = []
    while len(active) > 2:
        cands = _couple_candidates(cm, active)
        best = None
        best_key = None
        for s, p0, p1 in cands:
            q0, q1 = _normalize_couple(p0, p1)
            key = (q0[0], q0[1], q1[0], q1[1])
            if best is None or s < best - 1e-15 or (s <= best + 1e-15 and key < best_key):
                best = s if best is None or s < best else best
                best_key = key
                chosen = (q0, q1)
        pairs.extend(chosen)
        used = {i for p in chosen for i in p}
        active = [t for t in active if t not in used]
    if active:
        pairs.append((active[0], active[1]))
    return PairPartition(tuple(pairs))


def optimal_pair_partition(
    cm: CapacityMatrix, support: Support
) -> tuple[PairPartition, float]:
    """Exhaustive minimum over all perfect matchings (oracle; small sizes)."""
    k = len(support)
    if k % 2 != 0 or k < 2:
        raise OddSupport(f"support size must be even and >= 2, got {k}")
    if k > 12:
        raise TooLarge(f"exhaustive matching limited to 12 indices, got {k}")

    idx = list(support.indices)

    def rec(remaining: tuple[int, ...]):
        if not remaining:
            yield []
            return
        first = remaining[0]
        for t in range(1, len(remaining)):
            partner = remaining[t]
            rest = remaining[1:t] + remaining[t + 1:]
            for tail in rec(rest):
                yield [(first, partner)] + tail

    best = None
    best_sum = np.inf
    for matching in rec(tuple(idx)):
        s = sum(cm.value(i, j) for i, j in matching)
        if s < best_sum:
            best_sum = s
            best = matching
    return PairPartition(tuple(best)), float(best_sum)


def ef_comp_b(
    cm: CapacityMatrix,
    L: int,
    M: int,
    seed: int,
    ells: list[int] | None = None,
    audit: list[TrialRecord] | None = None,
) -> EstimationFunction:
    """Sampled pair-partition estimator: for each even size draw M uniform
    supports and count those whose greedy pairing sum stays below 1/2.
    Odd sizes copy the even predecessor and are flagged."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if ells is None:
        ells = list(range(1, L + 1))
    values: dict[int, float] = {}
    interp: set[int] = set()
    even_cache: dict[int, float] = {0: 1.0}
    for ell in sorted(ells):
        if ell % 2 == 1:
            prev = ell - 1
            if prev not in even_cache:
                even_cache[prev] = _comp_b_fraction(cm, L, prev, M, seed, audit)
            values[ell] = even_cache[prev]
            interp.add(ell)
        else:
            if ell not in even_cache:
                even_cache[ell] = _comp_b_fraction(cm, L, ell, M, seed, audit)
            values[ell] = even_cache[ell]
    return EstimationFunction(
        "EF-compB",
        values,
        meta={"M": M, "seed": seed},
        interpolated=frozenset(interp),
    )


def _comp_b_fraction(
    cm: CapacityMatrix,
    L: int,
    ell: int,
    M: int,
    seed: int,
    audit: list[TrialRecord] | None,
) -> float:
    if ell == 0:
        return 1.0
    hits = 0
    for t in range(M):
        rng = _trial_rng(seed, 1, ell, t)
        sup = Support(tuple(rng.choice(L, size=ell, replace=False)))
        total = greedy_pair_partition(cm, sup).total(cm)
        if total < 0.5:
            hits += 1
        if audit is not None:
            audit.append(TrialRecord(sup, total, seed))
    return hits / M


def recovered_support(optimizer: np.ndarray, atol: float = RECOVERY_ATOL) -> Support:
    return Support(tuple(int(i) for i in np.flatnonzero(np.abs(optimizer) > atol)))


def _draw_coefficients(
    rng: np.random.Generator, size: int, model: CoefficientModel
) -> np.ndarray:
    if model is CoefficientModel.UnitSigns:
        return rng.choice([-1.0, 1.0], size=size)
    coeffs = rng.standard_normal(size)
    for i in range(size):
        while abs(coeffs[i]) < 1e-6:
            coeffs[i] = rng.standard_normal()
    return coeffs


def ef_empirical(
    D: Dictionary,
    M: int,
    seed: int,
    coeff_model: CoefficientModel = CoefficientModel.GaussianNonzeros,
    ells: list[int] | None = None,
    audit: list[TrialRecord] | None = None,
) -> EstimationFunction:
    """Direct l1-recovery test: per size draw M random supports, build a
    signal from random coefficients, solve the recovery program and count
    exact support+coefficient matches.  Solver failures are excluded from
    the denominator and reported in ``meta``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    L = D.n_atoms
    if ells is None:
        ells = list(range(1, L + 1))
    values: dict[int, float] = {}
    failures: dict[int, int] = {}
    for ell in sorted(ells):
        succ = 0
        fail = 0
        for t in range(M):
            rng = _trial_rng(seed, 2, ell, t)
            sup = rng.choice(L, size=ell, replace=False)
            alpha = np.zeros(L)
            alpha[sup] = _draw_coefficients(rng, ell, coeff_model)
            s = D.matrix @ alpha
            try:
                sol = basis_pursuit(D.matrix, s)
            except NumericalFailure:
                fail += 1
                continue
            ok = (
                sol.status is LpStatus.Optimal
                and recovered_support(sol.optimizer).indices == tuple(sorted(sup))
                and np.max(np.abs(sol.optimizer - alpha)) <= RECOVERY_ATOL
            )
            if ok:
                succ += 1
            if audit is not None:
                audit.append(TrialRecord(Support(tuple(sup)), float(ok), seed))
        effective = M - fail
        values[ell] = succ / effective if effective > 0 else 0.0
        if fail:
            failures[ell] = fail
    return EstimationFunction(
        "EF-emp",
        values,
        meta={"M": M, "seed": seed, "coeff_model": coeff_model.value,
              "lp_failures": failures},
    )


def oracle_val_c_gamma(D: Dictionary, support: Support) -> float:
    """Largest l1 mass a unit-l1-norm null vector can carry on the support,
    via exhaustive sign patterns (one sign fixed by symmetry): the max over
    patterns s of 1 / min{||x||_1 : D x = 0, sum_k s_k x_k = 1}."""
    k = len(support)
    if k == 0:
        return 0.0
    if k > ORACLE_SUPPORT_CAP:
        raise TooLarge(f"|support|={k} exceeds oracle cap {ORACLE_SUPPORT_CAP}")
    idx = support.indices
    best = 0.0
    for signs in product((1.0, -1.0), repeat=k - 1):
        fixed = [(idx[0], 1.0)] + [(i, s) for i, s in zip(idx[1:], signs)]
        sol = min_l1_nullspace(D.matrix, fixed, 1.0)
        if sol.status is LpStatus.Optimal:
            best = max(best, 1.0 / sol.objective_value)
    return best


def oracle_sign_pattern_test(D: Dictionary, support: Support) -> bool:
    """Exhaustive decision of l1-reconstructibility for a small support:
    run the recovery program on every sign pattern of unit coefficients
    (half the patterns, by symmetry) and demand exact recovery each time."""
    k = len(support)
    if k == 0:
        return True
    if k > ORACLE_SUPPORT_CAP:
        raise TooLarge(f"|support|={k} exceeds oracle cap {ORACLE_SUPPORT_CAP}")
    idx = np.array(support.indices)
    L = D.n_atoms
    for signs in product((1.0, -1.0), repeat=k - 1):
        alpha = np.zeros(L)
        alpha[idx[0]] = 1.0
        alpha[idx[1:]] = signs
        s = D.matrix @ alpha
        sol = basis_pursuit(D.matrix, s)
        if sol.status is not LpStatus.Optimal:
            return False
        if recovered_support(sol.optimizer).indices != tuple(idx):
            return False
        if np.max(np.abs(sol.optimizer - alpha)) > RECOVERY_ATOL:
            return False
    return True


def _empirical_var_with_se(samples: np.ndarray) -> tuple[float, float]:
    """Population variance plus a moment-based standard error estimate."""
    n = samples.size
    v = float(samples.var())
    centered = samples - samples.mean()
    m4 = float(np.mean(centered**4))
    se = float(np.sqrt(max(m4 - v * v, 0.0) / n))
    return v, se


def variance_experiment(
    cv: CapacityVector,
    cm: CapacityMatrix,
    L: int,
    n_samples: int,
    seed: int,
    max_ell: int | None = None,
) -> VarianceReport:
    """Empirical variances of capacity sums over uniform random supports.

    Vector case: x = sum of q over an ell-subset, exact reference
    ell * var_q.  Pair case: x = pairing sum over a uniformly random
    partition of an even ell-subset, exact reference (ell/2) * var_Q.
    ``max_ell`` should be half the signal dimension (the default L // 4
    covers the two-block families where L = 2N).
    """
    if n_samples < 100:
        raise ValueError("need at least 100 samples")
    if max_ell is None:
        max_ell = L // 4
    vec_rows = []
    pair_rows = []
    for ell in range(1, max_ell + 1):
        rng = _trial_rng(seed, 3, ell)
        sums = np.empty(n_samples)
        for t in range(n_samples):
            sup = rng.choice(L, size=ell, replace=False)
            sums[t] = cv.q[sup].sum()
        vx, se = _empirical_var_with_se(sums)
        vec_rows.append((ell, vx, ell * cv.var_q, se))
        if ell % 2 == 0:
            rng = _trial_rng(seed, 4, ell)
            psums = np.empty(n_samples)
            for t in range(n_samples):
                sup = rng.choice(L, size=ell, replace=False)
                rng.shuffle(sup)
                total = 0.0
                for a in range(0, ell, 2):
                    i, j = sup[a], sup[a + 1]
                    total += cm.Q[min(i, j), max(i, j)]
                psums[t] = total
            vx, se = _empirical_var_with_se(psums)
            pair_rows.append((ell, vx, (ell / 2.0) * cm.var_Q, se))
    return VarianceReport(
        vector_rows=vec_rows,
        pair_rows=pair_rows,
        n_samples=n_samples,
        seed=seed,
    )


def save_variance_report(report: VarianceReport, path) -> None:
    """CSV rows ``ell,var_x,var_y,kind``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# capset-var v1 n_samples={report.n_samples} seed={report.seed}\n")
        fh.write("ell,var_x,var_y,kind\n")
        for ell, vx, vy, _ in report.vector_rows:
            fh.write(f"{ell},{vx:.17g},{vy:.17g},q\n")
        for ell, vx, vy, _ in report.pair_rows:
            fh.write(f"{ell},{vx:.17g},{vy:.17g},Q\n")
