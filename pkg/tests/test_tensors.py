import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capefact.tensors import (
    apply_Iuu,
    d_sym,
    is_symmetric3,
    multilinear3,
    outer3,
    sym_canonical_indices,
    sym_index_rank,
    sym_tensor_from_unique,
    symmetrize3,
    symmetrize_matrix,
    tensor_norm,
    top_k_eigs,
    unique_from_sym,
    vectorize,
)

from helpers import enumerate_canonical_triples, multilinear3_bruteforce

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


class TestOuter3:
    def test_unit_basis(self):
        t = outer3(E1, E1, E1)
        expected = np.zeros((2, 2, 2))
        expected[0, 0, 0] = 1.0
        assert np.array_equal(t, expected)

    def test_zero(self):
        z = np.zeros(3)
        assert np.array_equal(outer3(z, z, z), np.zeros((3, 3, 3)))

    def test_all_ones(self):
        one = np.ones(2)
        assert np.array_equal(outer3(one, one, one), np.ones((2, 2, 2)))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            outer3(np.ones(2), np.ones(3), np.ones(2))


class TestMultilinear3:
    def test_identity_map(self):
        rng = np.random.default_rng(0)
        t = rng.standard_normal((4, 4, 4))
        assert np.allclose(multilinear3(t, np.eye(4), np.eye(4), np.eye(4)), t)

    def test_rank_one(self):
        rng = np.random.default_rng(1)
        v = rng.standard_normal(3)
        w = rng.standard_normal((3, 2))
        t = 1.7 * outer3(v, v, v)
        projected = w.T @ v
        expected = 1.7 * outer3(projected, projected, projected)
        assert np.allclose(multilinear3(t, w, w, w), expected, atol=1e-12)

    def test_against_bruteforce(self):
        rng = np.random.default_rng(2)
        t = rng.standard_normal((2, 2, 2))
        mats = [rng.standard_normal((2, 2)) for _ in range(3)]
        got = multilinear3(t, *mats)
        want = multilinear3_bruteforce(t, *mats)
        assert np.allclose(got, want, atol=1e-12)

    def test_composition_associativity(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            t = rng.standard_normal((3, 3, 3))
            a = rng.standard_normal((3, 3))
            b = rng.standard_normal((3, 2))
            direct = multilinear3(t, a @ b, a @ b, a @ b)
            staged = multilinear3(multilinear3(t, a, a, a), b, b, b)
            assert np.allclose(direct, staged, rtol=1e-10, atol=1e-12)

    def test_shape_errors(self):
        with pytest.raises(ValueError):
            multilinear3(np.zeros((2, 2, 3)), np.eye(2), np.eye(2), np.eye(2))
        with pytest.raises(ValueError):
            multilinear3(np.zeros((2, 2, 2)), np.eye(3), np.eye(2), np.eye(2))


class TestApplyIuu:
    def test_eigenpair(self):
        t = 2.0 * outer3(E1, E1, E1)
        assert np.allclose(apply_Iuu(t, E1), [2.0, 0.0])

    def test_orthogonal_direction_annihilated(self):
        t = 2.0 * outer3(E1, E1, E1)
        assert np.allclose(apply_Iuu(t, E2), [0.0, 0.0])

    def test_mixed_direction(self):
        # sum_k lambda_k (u . v_k)^2 v_k with lambda = (2, 1), u at 45 degrees
        t = 2.0 * outer3(E1, E1, E1) + outer3(E2, E2, E2)
        u = (E1 + E2) / np.sqrt(2.0)
        assert np.allclose(apply_Iuu(t, u), [1.0, 0.5], atol=1e-15)

    def test_matches_multilinear(self):
        rng = np.random.default_rng(4)
        t = rng.standard_normal((5, 5, 5))
        u = rng.standard_normal(5)
        via_map = multilinear3(t, np.eye(5), u[:, None], u[:, None]).reshape(5)
        assert np.allclose(apply_Iuu(t, u), via_map, atol=1e-12)


class TestNormAndVectorize:
    def test_zero(self):
        assert tensor_norm(np.zeros((3, 3, 3))) == 0.0

    def test_unit_rank_one(self):
        x = np.random.default_rng(5).standard_normal(4)
        x /= np.linalg.norm(x)
        assert tensor_norm(outer3(x, x, x)) == pytest.approx(1.0, abs=1e-12)

    def test_all_ones(self):
        assert tensor_norm(np.ones((2, 2, 2))) == pytest.approx(np.sqrt(8.0))

    def test_vectorize_row_major(self):
        t = np.arange(8.0).reshape(2, 2, 2)
        assert np.array_equal(vectorize(t), np.arange(8.0))
        assert np.linalg.norm(vectorize(t)) == pytest.approx(tensor_norm(t))


class TestDSym:
    @pytest.mark.parametrize("dim,expected", [(2, 4), (3, 10), (1, 1)])
    def test_values(self, dim, expected):
        assert d_sym(dim) == expected

    def test_matches_enumeration(self):
        for dim in range(1, 11):
            assert d_sym(dim) == len(enumerate_canonical_triples(dim))

    def test_order_parameter(self):
        assert d_sym(4, order=2) == 10  # C(5, 2)


class TestSymIndexing:
    def test_canonical_order_colex(self):
        idx = sym_canonical_indices(2)
        assert idx.tolist() == [[0, 0, 0], [0, 0, 1], [0, 1, 1], [1, 1, 1]]

    def test_rank_bijection(self):
        for dim in (1, 2, 3, 5, 8):
            idx = sym_canonical_indices(dim)
            ranks = [sym_index_rank(*t) for t in idx]
            assert ranks == list(range(d_sym(dim)))

    def test_from_unique_placement(self):
        t = sym_tensor_from_unique(2, [1.0, 2.0, 3.0, 4.0])
        assert t[0, 0, 0] == 1.0
        assert t[0, 0, 1] == t[0, 1, 0] == t[1, 0, 0] == 2.0
        assert t[0, 1, 1] == t[1, 0, 1] == t[1, 1, 0] == 3.0
        assert t[1, 1, 1] == 4.0

    def test_single_entry(self):
        assert sym_tensor_from_unique(1, [5.0]).tolist() == [[[5.0]]]

    def test_exact_symmetry(self):
        b = np.random.default_rng(6).standard_normal(d_sym(4))
        assert is_symmetric3(sym_tensor_from_unique(4, b))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            sym_tensor_from_unique(3, np.zeros(9))

    @settings(max_examples=25, deadline=None)
    @given(dim=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
    def test_round_trip(self, dim, seed):
        b = np.random.default_rng(seed).standard_normal(d_sym(dim))
        assert np.array_equal(unique_from_sym(sym_tensor_from_unique(dim, b)), b)


class TestSymmetrize:
    def test_matrix(self):
        a = np.array([[1.0, 2.0], [0.0, 3.0]])
        sym = symmetrize_matrix(a)
        assert np.array_equal(sym, sym.T)
        assert sym[0, 1] == 1.0

    def test_tensor_exact(self):
        t = np.random.default_rng(7).standard_normal((3, 3, 3))
        sym = symmetrize3(t)
        assert is_symmetric3(sym)
        # averaging is idempotent on symmetric input (up to 6x/6 rounding)
        assert np.allclose(symmetrize3(sym), sym, rtol=0, atol=1e-15)

    def test_tensor_average_value(self):
        t = np.zeros((2, 2, 2))
        t[0, 1, 1] = 6.0
        sym = symmetrize3(t)
        assert sym[0, 1, 1] == sym[1, 0, 1] == sym[1, 1, 0] == 2.0


class TestTopKEigs:
    def test_identity(self):
        vals, vecs = top_k_eigs(np.eye(3), 2)
        assert np.allclose(vals, [1.0, 1.0])
        assert np.allclose(vecs.T @ vecs, np.eye(2), atol=1e-12)
        assert np.allclose(np.eye(3) @ vecs, vecs @ np.diag(vals), atol=1e-12)

    def test_diagonal_canonical_sign(self):
        vals, vecs = top_k_eigs(np.diag([3.0, 2.0, 1.0]), 2)
        assert np.allclose(vals, [3.0, 2.0])
        assert np.allclose(vecs[:, 0], [1.0, 0.0, 0.0])
        assert np.allclose(vecs[:, 1], [0.0, 1.0, 0.0])

    def test_eigen_residual(self):
        rng = np.random.default_rng(8)
        a = symmetrize_matrix(rng.standard_normal((5, 5)))
        vals, vecs = top_k_eigs(a, 5)
        assert np.linalg.norm(a @ vecs - vecs @ np.diag(vals)) < 1e-10
        assert np.linalg.norm(vecs.T @ vecs - np.eye(5)) < 1e-10
        assert np.all(np.diff(vals) <= 0)

    def test_k_bounds(self):
        with pytest.raises(ValueError):
            top_k_eigs(np.eye(3), 4)
        with pytest.raises(ValueError):
            top_k_eigs(np.eye(3), 0)

    def test_sign_deterministic(self):
        rng = np.random.default_rng(9)
        a = symmetrize_matrix(rng.standard_normal((6, 6)))
        _, v1 = top_k_eigs(a, 3)
        _, v2 = top_k_eigs(a.copy(), 3)
        assert np.array_equal(v1, v2)
        for c in range(3):
            col = v1[:, c]
            assert col[np.argmax(np.abs(col))] > 0
