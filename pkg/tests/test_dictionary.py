"""Dictionary generators, coherence features, file round trips."""

import warnings

import numpy as np
import pytest

from capset.dictionary import (
    Dictionary,
    FormatError,
    InvalidShape,
    babel_recovery_threshold,
    coherence_profile,
    gen_dct_pair,
    gen_random,
    gen_spoiled,
    grassmanian_mu,
    load_dictionary,
    save_dictionary,
)


def test_gen_random_shape_and_norms():
    D = gen_random(128, 256, seed=1)
    assert D.matrix.shape == (128, 256)
    np.testing.assert_allclose(D.column_norms(), 1.0, atol=1e-12)


def test_gen_random_generic_rank():
    D = gen_random(2, 3, seed=5)
    assert np.linalg.matrix_rank(D.matrix) == 2


def test_gen_random_deterministic():
    a = gen_random(6, 12, seed=9)
    b = gen_random(6, 12, seed=9)
    assert np.array_equal(a.matrix, b.matrix)
    c = gen_random(6, 12, seed=10)
    assert not np.array_equal(a.matrix, c.matrix)


def test_gen_random_rejects_wide_shapes():
    with pytest.raises(InvalidShape):
        gen_random(4, 4, seed=0)
    with pytest.raises(InvalidShape):
        gen_random(5, 3, seed=0)


def test_gen_spoiled_zero_targets_is_gen_random():
    assert np.array_equal(
        gen_spoiled(8, 20, seed=3, n_spoiled=0).matrix,
        gen_random(8, 20, seed=3).matrix,
    )


def test_gen_spoiled_columns_lie_in_source_span():
    D = gen_spoiled(16, 40, seed=4, n_spoiled=3, n_combined=12)
    # indices recorded in the label for reproducibility
    assert "targets=" in D.label and "sources=" in D.label
    targets = eval(D.label.split("targets=")[1].split(",sources")[0])
    sources = eval(D.label.split("sources=")[1].rstrip(")"))
    assert len(targets) == 3 and len(sources) == 12
    assert not set(targets) & set(sources)
    S = D.matrix[:, sources]
    for t in targets:
        col = D.matrix[:, t]
        resid = col - S @ np.linalg.lstsq(S, col, rcond=None)[0]
        assert np.linalg.norm(resid) <= 1e-10
    np.testing.assert_allclose(D.column_norms(), 1.0, atol=1e-12)


def test_gen_spoiled_raises_when_overcommitted():
    with pytest.raises(InvalidShape):
        gen_spoiled(8, 10, seed=0, n_spoiled=3, n_combined=12)


def test_gen_spoiled_raises_coherence_on_average():
    # near-dependent columns push the worst Gram entry up on average
    spoiled = []
    plain = []
    for seed in range(20):
        spoiled.append(coherence_profile(gen_spoiled(16, 48, seed=seed), 1).mu)
        plain.append(coherence_profile(gen_random(16, 48, seed=seed), 1).mu)
    assert np.mean(spoiled) > np.mean(plain)


def test_dct_pair_shape_and_blocks():
    D = gen_dct_pair(128)
    assert D.matrix.shape == (128, 256)
    left = D.matrix[:, :128]
    right = D.matrix[:, 128:]
    np.testing.assert_allclose(left.T @ left, np.eye(128), atol=1e-10)
    np.testing.assert_allclose(right.T @ right, np.eye(128), atol=1e-10)
    np.testing.assert_allclose(D.column_norms(), 1.0, atol=1e-12)


def test_dct_pair_coherence_frozen():
    # oracle: direct scan of the Gram matrix; the largest cross-block
    # entry is sqrt(2/N) * cos(pi / (2N))
    D = gen_dct_pair(128)
    g = np.abs(D.matrix.T @ D.matrix)
    np.fill_diagonal(g, 0.0)
    scan = g.max()
    prof = coherence_profile(D, 1)
    assert prof.mu == pytest.approx(scan, abs=1e-14)
    assert prof.mu == pytest.approx(np.sqrt(2 / 128) * np.cos(np.pi / 256), abs=1e-10)
    assert prof.mu == pytest.approx(0.125, abs=1e-4)


def test_dct_pair_rejects_tiny():
    with pytest.raises(InvalidShape):
        gen_dct_pair(1)


def test_coherence_profile_duplicated_identity():
    D = Dictionary(np.hstack([np.eye(2), np.eye(2)]))
    prof = coherence_profile(D)
    assert prof.mu == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(prof.mu_k, 1.0, atol=1e-12)
    np.testing.assert_allclose(np.diag(prof.gram), 1.0, atol=1e-10)


def test_babel_function_properties():
    D = gen_random(8, 20, seed=2)
    prof = coherence_profile(D, max_babel_m=10)
    assert prof.babel[0] == 0.0
    assert prof.babel[1] == pytest.approx(prof.mu, abs=1e-14)
    assert (np.diff(prof.babel) >= -1e-14).all()
    for m in range(1, 11):
        assert prof.babel[m] <= m * prof.mu + 1e-12


def test_babel_recovery_threshold_bracketing():
    D = gen_random(8, 20, seed=6)
    prof = coherence_profile(D)
    m_star = babel_recovery_threshold(prof)
    assert m_star >= 1
    assert prof.babel[m_star - 1] + prof.babel[m_star] < 1.0
    if m_star + 1 < prof.babel.size:
        assert prof.babel[m_star] + prof.babel[m_star + 1] >= 1.0


def test_grassmanian_mu_frozen_values():
    assert grassmanian_mu(128, 256) == pytest.approx(np.sqrt(128 / (128 * 255)), abs=1e-15)
    assert grassmanian_mu(128, 256) == pytest.approx(0.062622, abs=1e-6)
    for N in (3, 9, 17):
        assert grassmanian_mu(N, N + 1) == pytest.approx(1 / N, abs=1e-15)
    # formula value for (2, 4): sqrt((4-2)/(2*3)) = sqrt(1/3)
    assert grassmanian_mu(2, 4) == pytest.approx(0.5773502691896257, abs=1e-15)
    with pytest.raises(InvalidShape):
        grassmanian_mu(4, 4)


def test_grassmanian_mu_is_a_lower_bound_statistically():
    for seed in range(10):
        D = gen_random(6, 18, seed=seed)
        assert coherence_profile(D, 1).mu >= grassmanian_mu(6, 18) - 1e-12


def test_save_load_round_trip(tmp_path):
    D = gen_random(5, 9, seed=13)
    path = tmp_path / "d.csv"
    save_dictionary(D, path)
    loaded = load_dictionary(path)
    assert np.array_equal(loaded.matrix, D.matrix)  # bitwise
    assert loaded.label == D.label


def test_load_rejects_nan(tmp_path):
    D = gen_random(3, 5, seed=0)
    path = tmp_path / "d.csv"
    save_dictionary(D, path)
    text = path.read_text().replace(f"{D.matrix[1, 1]:.17g}", "nan", 1)
    path.write_text(text)
    with pytest.raises(FormatError):
        load_dictionary(path)


def test_load_rejects_bad_header(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("1.0,2.0\n")
    with pytest.raises(FormatError):
        load_dictionary(path)


def test_load_wide_shape_warns(tmp_path):
    m = np.vstack([np.eye(2), np.zeros((1, 2))])  # 3x2, L < N
    m /= np.linalg.norm(m, axis=0)
    path = tmp_path / "d.csv"
    save_dictionary(Dictionary(m, label="tall"), path)
    with pytest.warns(UserWarning, match="L=2 <= N=3"):
        loaded = load_dictionary(path)
    assert loaded.matrix.shape == (3, 2)


def test_load_non_unit_norm_warns_and_renormalizes(tmp_path):
    m = 2.0 * np.eye(3)[:, :2]
    m = np.hstack([m, np.ones((3, 1))])
    path = tmp_path / "d.csv"
    save_dictionary(Dictionary(m, label="unnormalized"), path)
    with pytest.warns(UserWarning, match="not unit norm"):
        load_dictionary(path)
    with pytest.warns(UserWarning, match="renormalized"):
        fixed = load_dictionary(path, renormalize=True)
    np.testing.assert_allclose(fixed.column_norms(), 1.0, atol=1e-12)
