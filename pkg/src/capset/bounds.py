"""Closed-form estimation functions built from coherence or capacity stats.

An estimation function maps a support size to a predicted probability
that l1 minimization recovers a uniformly drawn support of that size.
Step bounds come from coherence; smooth bounds from a one-sided tail
inequality applied to sums of capacity values (single atoms for the
vector form, disjoint pairs for the matrix form).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .capacity import CapacityMatrix, CapacityVector
from .dictionary import CoherenceProfile, grassmanian_mu

__all__ = [
    "EstimationFunction",
    "ef_classical",
    "ef_grassmanian",
    "ef_thm_a",
    "ef_thm_b",
    "relaxed_capacity_vector",
]


@dataclass(frozen=True)
class EstimationFunction:
    """Map from support size to predicted recovery probability in [0, 1].

    ``values[ell]`` is defined for 1 <= ell <= L.  ``interpolated`` flags
    the odd sizes whose value was copied from the even predecessor (the
    pair-based bounds are only defined on even sizes).
    """

    label: str
    values: dict[int, float]
    meta: dict = field(default_factory=dict)
    interpolated: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        for ell, v in self.values.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"value at {ell} outside [0,1]: {v}")

    def value(self, ell: int) -> float:
        return self.values[ell]

    def domain(self) -> list[int]:
        return sorted(self.values)

    def as_array(self) -> np.ndarray:
        return np.array([self.values[ell] for ell in self.domain()])

    def save_csv(self, path) -> None:
        """Rows ``ell,value`` under a label+params header."""
        params = " ".join(f"{k}={v}" for k, v in sorted(self.meta.items()))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# label={self.label} params={params}\n")
            fh.write("ell,value\n")
            for ell in self.domain():
                fh.write(f"{ell},{self.values[ell]:.17g}\n")


def ef_classical(mu: float, L: int) -> EstimationFunction:
    """Step bound from mutual coherence: certain recovery strictly below
    (1 + 1/mu) / 2, nothing guaranteed at or above."""
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"mu must be in (0, 1], got {mu}")
    threshold = 0.5 * (1.0 + 1.0 / mu)
    values = {ell: 1.0 if ell < threshold else 0.0 for ell in range(1, L + 1)}
    return EstimationFunction(
        "EF-CB", values, meta={"mu": mu, "threshold": threshold}
    )


def ef_grassmanian(N: int, L: int) -> EstimationFunction:
    """The coherence step bound evaluated at the ideal (smallest possible)
    coherence for the shape: the most optimistic coherence-based view."""
    ef = ef_classical(grassmanian_mu(N, L), L)
    return EstimationFunction("EF-GB", ef.values, meta=ef.meta)


def ef_thm_a(cv: CapacityVector, L: int) -> EstimationFunction:
    """Tail bound from capacity-vector statistics.

    For ell below 1/(2 E_q) the predicted probability is
    margin^2 / (ell var_q + margin^2) with margin = 1/2 - ell E_q; the
    bound is clipped to 0 beyond its validity region so the map stays
    total.  A zero-capacity vector means every support is recoverable.
    """
    E, V = cv.E_q, cv.var_q
    values: dict[int, float] = {}
    for ell in range(1, L + 1):
        if E == 0.0:
            values[ell] = 1.0
            continue
        margin = 0.5 - ell * E
        if margin <= 0.0:
            values[ell] = 0.0
        elif V == 0.0:
            values[ell] = 1.0
        else:
            values[ell] = margin * margin / (ell * V + margin * margin)
    return EstimationFunction(
        "EF-thmA", values, meta={"E_q": E, "var_q": V}
    )


def ef_thm_b(cm: CapacityMatrix, L: int) -> EstimationFunction:
    """Tail bound from capacity-matrix statistics, defined on even sizes.

    Same shape as :func:`ef_thm_a` with ell replaced by ell/2 and the
    pair statistics E_Q, var_Q; odd sizes take the even predecessor's
    value and are flagged as interpolated.
    """
    E, V = cm.E_Q, cm.var_Q
    values: dict[int, float] = {}
    interp: set[int] = set()

    def bound(half_ell: float) -> float:
        if E == 0.0:
            return 1.0
        margin = 0.5 - half_ell * E
        if margin <= 0.0:
            return 0.0
        if V == 0.0:
            return 1.0
        return margin * margin / (half_ell * V + margin * margin)

    for ell in range(1, L + 1):
        if ell % 2 == 0:
            values[ell] = bound(ell / 2.0)
        else:
            values[ell] = bound((ell - 1) / 2.0)
            interp.add(ell)
    return EstimationFunction(
        "EF-thmB",
        values,
        meta={"E_Q": E, "var_Q": V},
        interpolated=frozenset(interp),
    )


def relaxed_capacity_vector(profile: CoherenceProfile) -> CapacityVector:
    """LP-free surrogate capacity vector with entries mu_k / (mu_k + 1).

    Dominates the true capacity vector entrywise, so anything computed
    from it (tail bound, quantized count) is a weaker but valid bound.
    """
    mu_k = np.asarray(profile.mu_k, dtype=float)
    return CapacityVector.from_values(mu_k / (mu_k + 1.0))
