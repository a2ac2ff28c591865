"""Dictionary construction, persistence and coherence features.

The three generated families (random Gaussian, random with a spoiled
near-dependent column group, identity+DCT pair) plus the Gram-based
coherence profile: per-column maxima, the cumulative (Babel) function
and the ideal lower bound on coherence for a given shape.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dictionary",
    "CoherenceProfile",
    "InvalidShape",
    "FormatError",
    "gen_random",
    "gen_spoiled",
    "gen_dct_pair",
    "coherence_profile",
    "grassmanian_mu",
    "save_dictionary",
    "load_dictionary",
]

UNIT_NORM_TOL = 1e-12


class InvalidShape(ValueError):
    """Generated dictionaries need more columns than rows."""


class FormatError(ValueError):
    """Dictionary file is malformed or contains non-finite entries."""


@dataclass(frozen=True)
class Dictionary:
    """N x L matrix with unit-norm columns (atoms), L > N for generated ones."""

    matrix: np.ndarray
    label: str = ""
    seed: int | None = None

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2:
            raise InvalidShape("dictionary matrix must be 2-D")
        object.__setattr__(self, "matrix", m)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.matrix.shape[1]

    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.matrix, axis=0)

    def is_unit_norm(self, tol: float = UNIT_NORM_TOL) -> bool:
        return bool(np.max(np.abs(self.column_norms() - 1.0)) <= tol)


@dataclass(frozen=True)
class CoherenceProfile:
    """Gram-matrix summary: mu, per-column mu_k, Babel function values.

    ``babel[m]`` is the cumulative coherence for groups of m atoms;
    ``babel[0] == 0`` and ``babel[1] == mu``.
    """

    mu: float
    mu_k: np.ndarray
    babel: np.ndarray
    gram: np.ndarray


def gen_random(N: int, L: int, seed: int) -> Dictionary:
    """Columns drawn i.i.d. standard normal, each normalized to unit length."""
    if not L > N >= 1:
        raise InvalidShape(f"need L > N >= 1, got N={N}, L={L}")
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((N, L))
    m /= np.linalg.norm(m, axis=0)
    return Dictionary(m, label=f"random(N={N},L={L},seed={seed})", seed=seed)


def gen_spoiled(
    N: int,
    L: int,
    seed: int,
    n_spoiled: int = 3,
    n_combined: int = 12,
) -> Dictionary:
    """Random dictionary with ``n_spoiled`` columns rebuilt as random linear
    combinations of ``n_combined`` other columns, creating a near-dependent
    group with a non-uniform Gram matrix.
    """
    if n_spoiled < 0 or n_combined < 0 or n_spoiled + n_combined > L:
        raise InvalidShape(
            f"need n_spoiled + n_combined <= L, got {n_spoiled}+{n_combined} > {L}"
        )
    base = gen_random(N, L, seed)
    if n_spoiled == 0:
        return base
    m = base.matrix.copy()
    rng = np.random.default_rng(seed)
    rng.standard_normal((N, L))  # advance past the base draw
    picks = rng.choice(L, size=n_spoiled + n_combined, replace=False)
    targets = np.sort(picks[:n_spoiled])
    sources = np.sort(picks[n_spoiled:])
    for t in targets:
        col = m[:, sources] @ rng.standard_normal(n_combined)
        nrm = np.linalg.norm(col)
        while nrm < 1e-12:  # essentially impossible, but stay safe
            col = m[:, sources] @ rng.standard_normal(n_combined)
            nrm = np.linalg.norm(col)
        m[:, t] = col / nrm
    label = (
        f"spoiled(N={N},L={L},seed={seed},"
        f"targets={targets.tolist()},sources={sources.tolist()})"
    )
    return Dictionary(m, label=label, seed=seed)


def gen_dct_pair(N: int) -> Dictionary:
    """The orthonormal pair [I, C*]: identity plus the transposed orthonormal
    cosine-transform matrix, an N x 2N dictionary.
    """
    if N < 2:
        raise InvalidShape(f"need N >= 2, got {N}")
    k = np.arange(N)[:, None]
    n = np.arange(N)[None, :]
    C = np.cos(np.pi * (2 * n + 1) * k / (2 * N))
    C[0, :] *= np.sqrt(1.0 / N)
    C[1:, :] *= np.sqrt(2.0 / N)
    m = np.hstack([np.eye(N), C.T])
    # exact unit columns despite cos roundoff
    m /= np.linalg.norm(m, axis=0)
    return Dictionary(m, label=f"dct(N={N},L={2 * N})")


def coherence_profile(D: Dictionary, max_babel_m: int | None = None) -> CoherenceProfile:
    """Gram matrix G = D^T D with mu_k = max off-diagonal |G| per column,
    mu = max mu_k, and the cumulative coherence computed exactly by sorting
    each column's correlations and summing the top m.
    """
    L = D.n_atoms
    if max_babel_m is None:
        max_babel_m = L - 1
    if not 0 <= max_babel_m < L:
        raise ValueError(f"max_babel_m must be in [0, {L}), got {max_babel_m}")
    gram = D.matrix.T @ D.matrix
    absg = np.abs(gram).copy()
    np.fill_diagonal(absg, 0.0)
    mu_k = absg.max(axis=0)
    mu = float(mu_k.max())
    # column-wise descending sort; babel[m] = max over columns of top-m sum
    srt = np.sort(absg, axis=0)[::-1, :]
    babel = np.zeros(max_babel_m + 1)
    if max_babel_m >= 1:
        csum = np.cumsum(srt[:max_babel_m, :], axis=0)
        babel[1:] = csum.max(axis=1)
    return CoherenceProfile(mu=mu, mu_k=mu_k, babel=babel, gram=gram)


def babel_recovery_threshold(profile: CoherenceProfile) -> int:
    """Largest m with babel[m-1] + babel[m] < 1, or 0 when even m=1 fails."""
    best = 0
    for m in range(1, profile.babel.size):
        if profile.babel[m - 1] + profile.babel[m] < 1.0:
            best = m
        else:
            break
    return best


def grassmanian_mu(N: int, L: int) -> float:
    """Smallest coherence any N x L unit-norm dictionary can achieve."""
    if not L > N >= 1:
        raise InvalidShape(f"need L > N, got N={N}, L={L}")
    return float(np.sqrt((L - N) / (N * (L - 1.0))))


_HEADER_PREFIX = "# capset-dict v1 "


def save_dictionary(D: Dictionary, path) -> None:
    """CSV with a header line carrying shape and label; 17 significant
    digits per entry so a round trip is bitwise exact.
    """
    m = D.matrix
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{_HEADER_PREFIX}N={D.n_rows} L={D.n_atoms} label={D.label}\n")
        for row in m:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def load_dictionary(path, renormalize: bool = False) -> Dictionary:
    """Inverse of :func:`save_dictionary`.

    Non-finite entries or a bad header raise :class:`FormatError`; columns
    that are not unit norm (or a shape with L <= N) only warn, optionally
    renormalizing when ``renormalize`` is set.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith(_HEADER_PREFIX):
            raise FormatError(f"missing dictionary header in {path}")
        rest = header[len(_HEADER_PREFIX):]
        try:
            n_part, l_part, label_part = rest.split(" ", 2)
            N = int(n_part.removeprefix("N="))
            L = int(l_part.removeprefix("L="))
            label = label_part.removeprefix("label=")
        except (ValueError, AttributeError) as exc:
            raise FormatError(f"malformed header: {header!r}") from exc
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise FormatError(f"bad float on line {lineno}") from exc
    m = np.asarray(rows, dtype=float)
    if m.shape != (N, L):
        raise FormatError(f"expected {N}x{L} matrix, file holds {m.shape}")
    if not np.isfinite(m).all():
        raise FormatError("dictionary contains non-finite entries")
    if L <= N:
        warnings.warn(f"loaded dictionary has L={L} <= N={N}", stacklevel=2)
    norms = np.linalg.norm(m, axis=0)
    if np.max(np.abs(norms - 1.0)) > UNIT_NORM_TOL:
        if renormalize:
            if (norms == 0).any():
                raise FormatError("cannot renormalize a zero column")
            m = m / norms
            warnings.warn("columns renormalized to unit length", stacklevel=2)
        else:
            warnings.warn("loaded columns are not unit norm", stacklevel=2)
    return Dictionary(m, label=label)
