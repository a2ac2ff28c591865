"""Shared fixtures: small dictionaries plus cached heavy capacity runs.

The capacity computations behind the acceptance suite are expensive
(tens of thousands of LP solves), so they are computed once per session
and optionally cached on disk under ``tests/.capset_cache``.  The cache
key includes a hash of the LP solver source, the dictionary matrix and
the tolerances, so any solver change or input change invalidates it.
Set ``CAPSET_TEST_CACHE=0`` to force recomputation.
"""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

import numpy as np
import pytest

import capset.lp_core as lp_core
from capset.capacity import (
    CapacityMatrix,
    CapacityVector,
    capacity_matrix,
    capacity_vector,
    load_capacity_matrix,
    load_capacity_vector,
    save_capacity_matrix,
    save_capacity_vector,
)
from capset.dictionary import Dictionary, gen_dct_pair, gen_random

CACHE_DIR = Path(__file__).parent / ".capset_cache"
CACHE_ENABLED = os.environ.get("CAPSET_TEST_CACHE", "1") != "0"
JOBS = max(1, (os.cpu_count() or 1))

_SOLVER_HASH = hashlib.sha256(
    Path(lp_core.__file__).read_bytes()
).hexdigest()[:16]


def _cache_key(D: Dictionary) -> str:
    h = hashlib.sha256()
    h.update(_SOLVER_HASH.encode())
    h.update(str(D.matrix.shape).encode())
    h.update(D.matrix.tobytes())
    return h.hexdigest()[:24]


def capacities_for(D: Dictionary) -> tuple[CapacityVector, CapacityMatrix]:
    """Capacity vector and matrix, disk-cached keyed by solver + matrix."""
    key = _cache_key(D)
    qp = CACHE_DIR / f"{key}.q.csv"
    Qp = CACHE_DIR / f"{key}.Q.csv"
    if CACHE_ENABLED and qp.exists() and Qp.exists():
        return load_capacity_vector(qp), load_capacity_matrix(Qp)
    cv = capacity_vector(D, jobs=JOBS)
    cm = capacity_matrix(D, jobs=JOBS)
    if CACHE_ENABLED:
        CACHE_DIR.mkdir(exist_ok=True)
        save_capacity_vector(cv, qp, label=D.label)
        save_capacity_matrix(cm, Qp, label=D.label)
    return cv, cm


@pytest.fixture(scope="session")
def dct64():
    return gen_dct_pair(64)


@pytest.fixture(scope="session")
def dct64_capacities(dct64):
    return capacities_for(dct64)


@pytest.fixture(scope="session")
def small_random_dict():
    return gen_random(4, 8, seed=11)


@pytest.fixture(scope="session")
def small_random_capacities(small_random_dict):
    D = small_random_dict
    return capacity_vector(D), capacity_matrix(D)


@pytest.fixture(scope="session")
def dup_identity_dict():
    """[I_3 | I_3]: duplicated atoms, the canonical degenerate example."""
    m = np.hstack([np.eye(3), np.eye(3)])
    return Dictionary(m, label="dup-identity")
