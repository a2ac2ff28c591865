"""Capacity vector/matrix correctness: frozen degenerate cases, structural
inequalities, symmetry properties, serialization."""

import numpy as np
import pytest

from capset.capacity import (
    CapacityMatrix,
    CapacityVector,
    EmptyDomain,
    capacity_matrix,
    capacity_vector,
    load_capacity_matrix,
    load_capacity_vector,
    ratio_stats,
    save_capacity_matrix,
    save_capacity_vector,
    validate_capacity_invariants,
)
from capset.dictionary import Dictionary, coherence_profile, gen_random

INEQ_TOL = 1e-8


def test_duplicated_identity_q(dup_identity_dict):
    cv = capacity_vector(dup_identity_dict)
    np.testing.assert_allclose(cv.q, 0.5, atol=1e-9)
    assert cv.E_q == pytest.approx(0.5, abs=1e-9)
    assert cv.var_q == pytest.approx(0.0, abs=1e-12)


def test_square_invertible_q_is_zero():
    rng = np.random.default_rng(1)
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    cv = capacity_vector(Dictionary(Q, label="orthonormal"))
    np.testing.assert_allclose(cv.q, 0.0, atol=1e-12)


def test_duplicated_identity_Q_same_block(dup_identity_dict):
    cm = capacity_matrix(dup_identity_dict)
    # both indices in the first identity block: null vectors (w, -w) give
    # max(w_i + w_j) = 1/2 under 2||w||_1 = 1
    assert cm.value(0, 1) == pytest.approx(0.5, abs=1e-9)
    assert cm.value(1, 2) == pytest.approx(0.5, abs=1e-9)


def test_duplicated_identity_Q_duplicate_pair(dup_identity_dict):
    # duplicated atom pair (k, k+N): the minus branch reaches delta mass 1,
    # computed by brute force over the null-space parametrization (w, -w)
    cm = capacity_matrix(dup_identity_dict)
    assert cm.value(0, 3) == pytest.approx(1.0, abs=1e-9)
    assert cm.value(2, 5) == pytest.approx(1.0, abs=1e-9)


def test_stats_recomputable():
    rng = np.random.default_rng(0)
    q = rng.uniform(0.0, 0.4, 17)
    cv = CapacityVector.from_values(q)
    assert cv.E_q == pytest.approx(q.mean(), abs=1e-12)
    assert cv.var_q == pytest.approx(np.mean((q - q.mean()) ** 2), abs=1e-12)
    Qm = np.zeros((6, 6))
    iu = np.triu_indices(6, 1)
    Qm[iu] = rng.uniform(0.0, 0.5, iu[0].size)
    cm = CapacityMatrix.from_values(Qm)
    vals = Qm[iu]
    assert cm.E_Q == pytest.approx(vals.mean(), abs=1e-12)
    # population normalization 2/(L(L-1))
    assert cm.var_Q == pytest.approx(np.sum((vals - vals.mean()) ** 2) / vals.size, abs=1e-12)


def test_coherence_bound_on_q(small_random_dict, small_random_capacities):
    cv, _ = small_random_capacities
    prof = coherence_profile(small_random_dict)
    bound = prof.mu_k / (prof.mu_k + 1.0)
    assert (cv.q <= bound + INEQ_TOL).all()
    assert (cv.q <= prof.mu / (prof.mu + 1.0) + INEQ_TOL).all()


def test_pair_bounds_on_Q(small_random_capacities):
    cv, cm = small_random_capacities
    L = len(cv)
    for i in range(L):
        for j in range(i + 1, L):
            v = cm.value(i, j)
            assert v >= max(cv.q[i], cv.q[j]) - INEQ_TOL
            assert v <= cv.q[i] + cv.q[j] + INEQ_TOL


def test_validate_capacity_invariants_clean(small_random_dict, small_random_capacities):
    cv, cm = small_random_capacities
    prof = coherence_profile(small_random_dict)
    assert validate_capacity_invariants(cv, cm, prof.mu_k) == []


def test_validate_capacity_invariants_detects_fault(small_random_capacities):
    cv, cm = small_random_capacities
    bad = CapacityVector.from_values(cv.q * 0.25)  # breaks Q <= q_i + q_j
    issues = validate_capacity_invariants(bad, cm)
    assert issues


def test_permutation_equivariance():
    rng = np.random.default_rng(21)
    D = gen_random(3, 7, seed=77)
    perm = rng.permutation(7)
    Dp = Dictionary(D.matrix[:, perm], label="permuted")
    q = capacity_vector(D).q
    qp = capacity_vector(Dp).q
    np.testing.assert_allclose(qp, q[perm], atol=1e-9)
    Qm = capacity_matrix(D).Q
    Qp = capacity_matrix(Dp).Q
    for a in range(7):
        for b in range(a + 1, 7):
            i, j = perm[a], perm[b]
            np.testing.assert_allclose(
                Qp[a, b], Qm[min(i, j), max(i, j)], atol=1e-9
            )


def test_sign_invariance():
    D = gen_random(3, 6, seed=31)
    flipped = D.matrix.copy()
    flipped[:, 2] *= -1.0
    Df = Dictionary(flipped, label="flipped")
    np.testing.assert_allclose(
        capacity_vector(Df).q, capacity_vector(D).q, atol=1e-9
    )
    np.testing.assert_allclose(
        capacity_matrix(Df).Q, capacity_matrix(D).Q, atol=1e-9
    )


def test_parallel_jobs_match_serial():
    D = gen_random(4, 10, seed=55)
    cv1 = capacity_vector(D, jobs=1)
    cv2 = capacity_vector(D, jobs=2)
    assert np.array_equal(cv1.q, cv2.q)
    cm1 = capacity_matrix(D, jobs=1)
    cm2 = capacity_matrix(D, jobs=2)
    assert np.array_equal(cm1.Q, cm2.Q)


def test_ratio_stats_identity_case():
    q = np.array([0.2, 0.3, 0.1])
    cv = CapacityVector.from_values(q)
    Qm = np.zeros((3, 3))
    for i in range(3):
        for j in range(i + 1, 3):
            Qm[i, j] = q[i] + q[j]
    rs = ratio_stats(cv, CapacityMatrix.from_values(Qm))
    assert rs.mean_R == pytest.approx(1.0, abs=1e-12)
    assert rs.var_R == pytest.approx(0.0, abs=1e-12)
    assert rs.std_R == pytest.approx(0.0, abs=1e-12)
    assert rs.count == 3


def test_ratio_stats_empty_domain():
    cv = CapacityVector.from_values(np.zeros(3))
    cm = CapacityMatrix.from_values(np.zeros((3, 3)))
    with pytest.raises(EmptyDomain):
        ratio_stats(cv, cm)


def test_ratio_stats_small_random(small_random_capacities):
    cv, cm = small_random_capacities
    rs = ratio_stats(cv, cm)
    assert 0.0 < rs.mean_R <= 1.0 + INEQ_TOL
    assert rs.count == len(cv) * (len(cv) - 1) // 2
    assert rs.std_R == pytest.approx(np.sqrt(rs.var_R), abs=1e-12)


def test_capacity_csv_round_trip(tmp_path, small_random_capacities):
    cv, cm = small_random_capacities
    qp = tmp_path / "q.csv"
    Qp = tmp_path / "Q.csv"
    save_capacity_vector(cv, qp, label="test")
    save_capacity_matrix(cm, Qp, label="test")
    cv2 = load_capacity_vector(qp)
    cm2 = load_capacity_matrix(Qp)
    assert np.array_equal(cv.q, cv2.q)  # 17g is bitwise for float64
    assert np.array_equal(cm.Q, cm2.Q)
    assert cv2.E_q == cv.E_q and cm2.var_Q == cm.var_Q
    # 1-based indices on the wire
    assert qp.read_text().splitlines()[2].startswith("1,")
    assert Qp.read_text().splitlines()[2].startswith("1,2,")
