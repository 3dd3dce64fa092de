"""
Tests for the dense linear algebra helpers and the whitening filter built on them.
"""

import os
import sys

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from ici_whitening.errors import (
    DimensionMismatchError,
    NotHermitianError,
    NotPositiveDefiniteError,
    SingularDiagonalError,
    ZeroMatrixError,
)
from ici_whitening.numerics import (
    cholesky,
    dominant_singular_triplet,
    invert_lower_triangular,
    is_hermitian,
    matrix_norms,
    spectral_norm,
)
from ici_whitening.whitening import whitening_filter


def random_pd(rng, n, floor=0.1):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a @ a.conj().T + floor * np.eye(n)


def matrix_with_singular_values(rng, sigmas, rows, cols):
    u, _ = np.linalg.qr(rng.standard_normal((rows, rows)) + 1j * rng.standard_normal((rows, rows)))
    v, _ = np.linalg.qr(rng.standard_normal((cols, cols)) + 1j * rng.standard_normal((cols, cols)))
    s = np.zeros((rows, cols))
    s[np.arange(len(sigmas)), np.arange(len(sigmas))] = sigmas
    return u @ s @ v.conj().T, v[:, 0]


class TestCholesky:
    """Cholesky factorization and its error cases."""

    def test_reconstructs_matrix(self):
        rng = np.random.default_rng(1)
        r = random_pd(rng, 4)
        lower = cholesky(r)
        assert np.allclose(np.triu(lower, 1), 0)
        assert np.allclose(lower @ lower.conj().T, r, atol=1e-12)

    def test_diagonal_is_positive_real(self):
        lower = cholesky(np.diag([4.0, 9.0]))
        assert np.allclose(lower, np.diag([2.0, 3.0]))

    def test_rejects_non_hermitian(self):
        with pytest.raises(NotHermitianError):
            cholesky(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_rejects_zero_matrix(self):
        with pytest.raises(NotPositiveDefiniteError):
            cholesky(np.zeros((3, 3)))

    def test_rejects_nearly_singular(self):
        v = np.array([1.0, 1.0j, -1.0])
        with pytest.raises(NotPositiveDefiniteError):
            cholesky(np.outer(v, v.conj()))

    def test_rejects_non_square(self):
        with pytest.raises(DimensionMismatchError):
            cholesky(np.ones((2, 3)))

    def test_hermitian_check_is_scale_free(self):
        rng = np.random.default_rng(2)
        r = random_pd(rng, 4) * 1e-13
        assert is_hermitian(r)
        assert cholesky(r).shape == (4, 4)


class TestTriangularInverse:

    def test_inverse(self):
        rng = np.random.default_rng(3)
        lower = cholesky(random_pd(rng, 5))
        inv = invert_lower_triangular(lower)
        assert np.allclose(inv @ lower, np.eye(5), atol=1e-10)
        assert np.allclose(np.triu(inv, 1), 0, atol=1e-12)

    def test_singular_diagonal(self):
        with pytest.raises(SingularDiagonalError):
            invert_lower_triangular(np.array([[1.0, 0.0], [1.0, 0.0]]))


class TestWhiteningExactness:
    """W R W^H must be the identity for random positive definite covariances."""

    @pytest.mark.timeout(5)
    def test_thousand_random_covariances(self):
        rng = np.random.default_rng(4)
        for trial in range(1000):
            n = (2, 4, 8)[trial % 3]
            r = random_pd(rng, n)
            w = whitening_filter(r)
            err = np.linalg.norm(w @ r @ w.conj().T - np.eye(n), "fro")
            assert err <= 1e-8 * n


class TestDominantSingularTriplet:

    def test_matches_svd(self):
        rng = np.random.default_rng(5)
        h, v1 = matrix_with_singular_values(rng, [5.0, 2.0, 1.0, 0.5], 4, 8)
        triplet = dominant_singular_triplet(h)
        assert triplet.sigma == pytest.approx(5.0, rel=1e-9)
        assert abs(np.vdot(v1, triplet.right)) == pytest.approx(1.0, abs=1e-6)
        assert np.linalg.norm(triplet.right) == pytest.approx(1.0)
        assert np.allclose(h @ triplet.right, triplet.sigma * triplet.left, atol=1e-9)

    def test_rank_one(self):
        a = np.array([1.0, 2.0j, -1.0, 0.5])
        b = np.array([1.0, 1.0j, 0.0, 2.0, -1.0, 0.0, 1.0, 1.0])
        triplet = dominant_singular_triplet(np.outer(a, b.conj()))
        assert triplet.sigma == pytest.approx(np.linalg.norm(a) * np.linalg.norm(b), rel=1e-10)
        assert abs(np.vdot(b / np.linalg.norm(b), triplet.right)) == pytest.approx(1.0, abs=1e-10)

    def test_start_vector_orthogonal_to_dominant_direction(self):
        # the all-ones start vector is in the null space of this matrix
        h = np.array([[1.0, -1.0], [2.0, -2.0]])
        triplet = dominant_singular_triplet(h)
        assert triplet.sigma == pytest.approx(np.sqrt(10.0), rel=1e-10)

    def test_zero_matrix(self):
        with pytest.raises(ZeroMatrixError):
            dominant_singular_triplet(np.zeros((2, 3)))


class TestNorms:

    def test_spectral_norm_of_zero(self):
        assert spectral_norm(np.zeros((3, 3))) == 0.0

    def test_matrix_norms(self):
        norms = matrix_norms(np.diag([3.0, 4.0]))
        assert norms["spectral"] == pytest.approx(4.0)
        assert norms["frobenius"] == pytest.approx(5.0)

    def test_spectral_bounded_by_frobenius(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        norms = matrix_norms(a)
        assert norms["spectral"] <= norms["frobenius"] + 1e-12
        assert norms["spectral"] == pytest.approx(np.linalg.norm(a, 2), rel=1e-9)
