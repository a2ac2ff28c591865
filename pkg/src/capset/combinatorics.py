"""Quantized combinatorial counting of recoverable supports.

The capacity vector is quantized to d levels (cluster maxima, so every
estimate stays worst-case sound); supports then group by how many
indices land in each cluster, and the fraction whose quantized capacity
sum stays below 1/2 is counted exactly with big-integer binomial
weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb

import numpy as np

from .bounds import EstimationFunction
from .capacity import CapacityVector

__all__ = [
    "QuantizationScheme",
    "InvalidParam",
    "quantize",
    "combinatorial_count",
    "ef_count",
]


class InvalidParam(ValueError):
    """Quantization parameter outside its admissible range."""


@dataclass(frozen=True)
class QuantizationScheme:
    """Partition of {0..L-1} into clusters with their capacity maxima.

    ``objective`` is the total quantization error
    sum_i (|cluster_i| * level_i - sum of q over cluster_i) >= 0.
    """

    clusters: list[np.ndarray]
    levels: list[float]
    objective: float

    @property
    def n_levels(self) -> int:
        return len(self.clusters)

    def cluster_sizes(self) -> list[int]:
        return [c.size for c in self.clusters]


def quantize(cv: CapacityVector, d: int) -> QuantizationScheme:
    """Exhaustive minimum-error quantization into d levels.

    Clusters are contiguous runs of the sorted capacities: a cluster's
    cost depends only on its max and sum, and exchanging any out-of-order
    pair of elements between clusters never decreases the error, so the
    optimum is attained on sorted runs.  All C(L-1, d-1) breakpoint
    placements are scanned; ties resolve to the lexicographically
    smallest breakpoint tuple.
    """
    L = len(cv)
    if not 1 <= d <= L:
        raise InvalidParam(f"need 1 <= d <= {L}, got {d}")
    order = np.argsort(cv.q, kind="stable")
    qs = cv.q[order]
    prefix = np.concatenate([[0.0], np.cumsum(qs)])

    def run_cost(a: int, b: int) -> float:
        # indices [a, b) of the sorted array; level is qs[b-1]
        return (b - a) * qs[b - 1] - (prefix[b] - prefix[a])

    best_cost = np.inf
    best_bp: tuple[int, ...] | None = None
    for bp in combinations(range(1, L), d - 1):
        edges = (0,) + bp + (L,)
        cost = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            cost += run_cost(a, b)
            if cost >= best_cost:
                break
        if cost < best_cost:
            best_cost = cost
            best_bp = bp
    edges = (0,) + best_bp + (L,)
    clusters = [np.sort(order[a:b]) for a, b in zip(edges[:-1], edges[1:])]
    levels = [float(qs[b - 1]) for b in edges[1:]]
    # exact per-run recomputation avoids prefix-sum dust in the report
    objective = sum(
        max((b - a) * qs[b - 1] - float(qs[a:b].sum()), 0.0)
        for a, b in zip(edges[:-1], edges[1:])
    )
    return QuantizationScheme(clusters=clusters, levels=levels, objective=float(objective))


def composition_weights(sizes: list[int], ell: int):
    """Yield (composition, weight) over all ways to split ell indices among
    clusters of the given sizes; weight = product of per-cluster binomials.
    """
    d = len(sizes)

    def rec(i: int, remaining: int, acc: list[int], w: int):
        if i == d - 1:
            if remaining <= sizes[i]:
                yield acc + [remaining], w * comb(sizes[i], remaining)
            return
        lo = max(0, remaining - sum(sizes[i + 1:]))
        hi = min(sizes[i], remaining)
        for p in range(lo, hi + 1):
            yield from rec(i + 1, remaining - p, acc + [p], w * comb(sizes[i], p))

    yield from rec(0, ell, [], 1)


def combinatorial_count(scheme: QuantizationScheme, ell: int) -> float:
    """Weighted fraction of ell-sized supports whose quantized capacity sum
    stays strictly below 1/2; exact big-integer arithmetic throughout.
    """
    sizes = scheme.cluster_sizes()
    L = sum(sizes)
    if not 1 <= ell <= L:
        raise InvalidParam(f"need 1 <= ell <= {L}, got {ell}")
    levels = scheme.levels
    total = comb(L, ell)
    passing = 0
    weight_check = 0
    for p, w in composition_weights(sizes, ell):
        weight_check += w
        s = 0.0
        for pi, lvl in zip(p, levels):
            s += pi * lvl
        if s < 0.5:
            passing += w
    if weight_check != total:
        raise AssertionError(
            f"binomial weights sum to {weight_check}, expected C({L},{ell})={total}"
        )
    return float(Fraction(passing, total))


def ef_count(cv: CapacityVector, d: int, L: int) -> EstimationFunction:
    """Quantize once, then count for every support size."""
    scheme = quantize(cv, d)
    values = {ell: combinatorial_count(scheme, ell) for ell in range(1, L + 1)}
    return EstimationFunction(
        "EF-count",
        values,
        meta={"d": d, "objective": scheme.objective},
    )
