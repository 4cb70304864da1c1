import numpy as np
import pytest

from iplr.linalg import apply_transpose_perm, mat, try_cholesky, vec
from oracles import transpose_perm_matrix


def test_vec_is_column_major():
    M = np.array([[1.0, 3.0], [2.0, 4.0]])
    assert np.array_equal(vec(M), [1.0, 2.0, 3.0, 4.0])


def test_mat_inverts_vec(rng):
    M = rng.standard_normal((5, 3))
    assert np.array_equal(mat(vec(M), 5, 3), M)


def test_mat_rejects_wrong_length():
    with pytest.raises(ValueError):
        mat(np.zeros(7), 2, 3)


def test_vec_of_triple_product_matches_kronecker(rng):
    # vec(A X B) = (B^T kron A) vec(X)
    for _ in range(5):
        A, X, B = (rng.standard_normal((3, 3)) for _ in range(3))
        lhs = vec(A @ X @ B)
        rhs = np.kron(B.T, A) @ vec(X)
        assert np.allclose(lhs, rhs, atol=1e-13)


def test_kronecker_mixed_product(rng):
    # (A kron B)(C kron D) = (A C) kron (B D), dense check at toy size
    A, C = rng.standard_normal((4, 3)), rng.standard_normal((3, 2))
    B, D = rng.standard_normal((2, 5)), rng.standard_normal((5, 6))
    assert np.allclose(np.kron(A, B) @ np.kron(C, D), np.kron(A @ C, B @ D),
                       atol=1e-12)


def test_gram_map_directional_derivative(rng):
    # d/dt (U + tV)(U + tV)^T at t=0 equals V U^T + U V^T
    U = rng.standard_normal((6, 2))
    V = rng.standard_normal((6, 2))
    h = 1e-6
    fd = ((U + h * V) @ (U + h * V).T - (U - h * V) @ (U - h * V).T) / (2 * h)
    assert np.allclose(fd, V @ U.T + U @ V.T, atol=1e-8)


class TestTransposePerm:
    def test_square_case_is_involution(self, rng):
        v = rng.standard_normal(9)
        twice = apply_transpose_perm(apply_transpose_perm(v, 3, 3), 3, 3)
        assert np.allclose(twice, v)

    def test_symmetric_content_fixed(self):
        v = vec(np.ones((3, 2)))
        assert np.array_equal(apply_transpose_perm(v, 3, 2), v)

    def test_matches_explicit_permutation(self, rng):
        v = rng.standard_normal(8)
        P = transpose_perm_matrix(4, 2)
        assert np.allclose(apply_transpose_perm(v, 4, 2), P @ v)

    def test_isometry_and_inverse(self, rng):
        v = rng.standard_normal(12)
        w = apply_transpose_perm(v, 4, 3)
        assert np.isclose(np.linalg.norm(w), np.linalg.norm(v))
        assert np.allclose(apply_transpose_perm(w, 3, 4), v)


class TestTryCholesky:
    def test_identity(self):
        L = try_cholesky(np.eye(3))
        assert np.allclose(L, np.eye(3))

    def test_indefinite_returns_none(self):
        assert try_cholesky(np.diag([1.0, -1.0])) is None

    def test_random_spd_reconstructs(self, rng):
        M = rng.standard_normal((50, 50))
        S = M @ M.T + np.eye(50)
        L = try_cholesky(S)
        assert L is not None
        assert np.linalg.norm(L @ L.T - S) < 1e-12 * np.linalg.norm(S)

    def test_nonfinite_is_hard_error(self):
        S = np.eye(3)
        S[0, 1] = np.nan
        with pytest.raises(ValueError):
            try_cholesky(S)
