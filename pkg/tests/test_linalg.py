import logging

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings, strategies as st

from mlgkernel.errors import InvalidInputError, SingularMatrixError
from mlgkernel.linalg import (batch_logdet, bhattacharyya_ratio, bhattacharyya_ratio_many,
                              cholesky, spd_logdet, spd_logdet_and_inverse, sym_eig)

from oracles import gaussian_overlap_1d as overlap_1d
from oracles import gaussian_overlap_2d as overlap_2d
from oracles import random_spd


def test_frozen_scalar_overlap():
    # 4^(1/4) / sqrt(2.5) = sqrt(0.8)
    assert bhattacharyya_ratio([[4.0]], [[1.0]]) == pytest.approx(0.8944271909999159, abs=1e-14)
    assert overlap_1d(4.0, 1.0) == pytest.approx(0.8944271909999159, abs=1e-9)


def test_matches_quadrature_1d(rng):
    for _ in range(10):
        s1, s2 = rng.uniform(0.05, 5.0, size=2)
        assert abs(bhattacharyya_ratio([[s1]], [[s2]]) - overlap_1d(s1, s2)) <= 1e-6


def test_matches_quadrature_2d(rng):
    for _ in range(5):
        S1, S2 = random_spd(rng, 2, 0.3), random_spd(rng, 2, 0.3)
        assert abs(bhattacharyya_ratio(S1, S2) - overlap_2d(S1, S2)) <= 1e-6


def test_matches_determinant_formula(rng):
    # direct determinant evaluation of |(S1^-1/2 + S2^-1/2)^-1|^(1/2) / (|S1| |S2|)^(1/4)
    for p in (1, 3, 5):
        S1, S2 = random_spd(rng, p), random_spd(rng, p)
        mid = np.linalg.inv(0.5 * np.linalg.inv(S1) + 0.5 * np.linalg.inv(S2))
        direct = np.sqrt(np.linalg.det(mid)) / (np.linalg.det(S1) * np.linalg.det(S2)) ** 0.25
        assert bhattacharyya_ratio(S1, S2) == pytest.approx(direct, rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
def test_overlap_properties(p, seed, c):
    rng = np.random.default_rng(seed)
    S1, S2 = random_spd(rng, p, 0.1), random_spd(rng, p, 0.1)
    k = bhattacharyya_ratio(S1, S2)
    assert 0.0 < k <= 1.0 + 1e-12
    assert k == pytest.approx(bhattacharyya_ratio(S2, S1), rel=1e-12)
    assert bhattacharyya_ratio(S1, S1) == pytest.approx(1.0, abs=1e-12)
    # common rescaling cancels
    assert bhattacharyya_ratio(c * S1, c * S2) == pytest.approx(k, rel=1e-9)


def test_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        bhattacharyya_ratio(np.eye(2), np.eye(3))


def test_logdet_matches_lu(rng):
    for p in (1, 4, 9):
        S = random_spd(rng, p)
        lu, piv = la.lu_factor(S)
        assert spd_logdet(S) == pytest.approx(np.log(np.abs(np.diag(lu))).sum(), rel=1e-11)


def test_logdet_and_inverse(rng):
    S = random_spd(rng, 5)
    ld, inv = spd_logdet_and_inverse(S)
    np.testing.assert_allclose(inv @ S, np.eye(5), atol=1e-10)
    assert np.array_equal(inv, inv.T)
    assert ld == pytest.approx(np.linalg.slogdet(S)[1], rel=1e-12)


def test_batch_logdet_and_many(rng):
    stack = np.stack([random_spd(rng, 3) for _ in range(6)])
    ld = batch_logdet(stack)
    np.testing.assert_allclose(ld, [spd_logdet(S) for S in stack], rtol=1e-12)
    many = bhattacharyya_ratio_many(stack, ld, stack[2], ld[2])
    np.testing.assert_allclose(many, [bhattacharyya_ratio(S, stack[2]) for S in stack],
                               rtol=1e-12)


def test_cholesky_jitter_rescues_semidefinite(caplog):
    with caplog.at_level(logging.WARNING):
        c = cholesky(np.ones((2, 2)))
    assert "jitter" in caplog.text
    assert np.all(np.isfinite(c))


def test_cholesky_reports_pivot():
    S = np.diag([1.0, 2.0, -1.0])
    with pytest.raises(SingularMatrixError) as exc:
        cholesky(S)
    assert exc.value.pivot == 2


def test_sym_eig_order_and_threshold():
    K = np.diag([1.0, 4.0, 1e-12, 2.0])
    eig = sym_eig(K, tau=1e-8)
    np.testing.assert_array_equal(eig.values, [4.0, 2.0, 1.0])
    assert eig.rank == 3
    assert eig.min_eigenvalue == pytest.approx(1e-12)
    np.testing.assert_allclose(np.abs(eig.vectors.T @ eig.vectors), np.eye(3))


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(InvalidInputError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))
