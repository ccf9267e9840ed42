import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import small_matrices
from grothnorm import matcore
from grothnorm.matcore import TOL_MATCH, pq_norm, schatten_norm

H = np.array([[1.0, 1.0], [1.0, -1.0]])


def brute_pq(A, p, q, samples=None):
    """Oracle: maximize |Ax|_q over the extreme points of the p-ball."""
    k = A.shape[1]
    if p == np.inf:
        pts = np.array(list(itertools.product((1.0, -1.0), repeat=k)))
    elif p == 1:
        pts = np.vstack([np.eye(k), -np.eye(k)])
    else:
        pts = samples
    return max(np.linalg.norm(A @ x, q) for x in pts)


class TestSchurProduct:
    def test_ones_is_identity(self):
        A = np.arange(6.0).reshape(2, 3)
        np.testing.assert_array_equal(matcore.schur_product(A, np.ones((2, 3))), A)

    def test_diagonal_mask(self):
        out = matcore.schur_product(np.eye(2), [[1, 2], [3, 4]])
        np.testing.assert_array_equal(out, [[1, 0], [0, 4]])

    def test_arithmetic(self):
        out = matcore.schur_product([[1, 2], [3, 4]], [[2, 0], [0, 2]])
        np.testing.assert_array_equal(out, [[2, 0], [0, 8]])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            matcore.schur_product(np.eye(2), np.eye(3))


class TestSchatten:
    def test_anchors(self):
        assert schatten_norm(np.eye(3), 1) == pytest.approx(3)
        assert schatten_norm(np.diag([3.0, -4.0]), np.inf) == pytest.approx(4)
        assert schatten_norm([[0, 1], [1, 0]], 2) == pytest.approx(np.sqrt(2))

    def test_unsupported_p(self):
        with pytest.raises(ValueError):
            schatten_norm(np.eye(2), 3)

    @given(small_matrices(5, 5))
    def test_orderings(self, A):
        assert schatten_norm(A, 1) >= schatten_norm(A, np.inf) - 1e-12
        assert schatten_norm(A, 2) ** 2 == pytest.approx(np.sum(A * A), abs=1e-12)

    def test_trace_duality(self, rng):
        for _ in range(50):
            A, B = rng.standard_normal((2, 4, 4))
            assert abs(np.trace(A.T @ B)) <= schatten_norm(A, 1) * schatten_norm(B, np.inf) + 1e-12


class TestPqNorm:
    def test_anchors(self):
        for n in (1, 3, 5):
            assert pq_norm(np.eye(n), np.inf, 1) == n
            assert pq_norm(np.ones((n, n)), np.inf, 1) == n * n
        assert pq_norm(H, np.inf, 1) == 2

    def test_closed_forms(self):
        A = np.array([[1.0, -5.0, 2.0], [0.0, 3.0, -4.0]])
        assert pq_norm(A, 1, np.inf) == 5
        assert pq_norm(A, 1, 2) == pytest.approx(np.sqrt(34))
        assert pq_norm(A, 2, np.inf) == pytest.approx(np.sqrt(30))
        assert pq_norm(A, 2, 2) == pytest.approx(np.linalg.norm(A, 2))
        assert pq_norm(A, 1, 1) == 8
        assert pq_norm(A, np.inf, np.inf) == 8

    @given(small_matrices(4, 4))
    def test_enumerated_against_brute_force(self, A):
        for q in (1, 2, np.inf):
            assert pq_norm(A, np.inf, q) == pytest.approx(brute_pq(A, np.inf, q), abs=1e-12)
            assert pq_norm(A, 1, q) == pytest.approx(brute_pq(A, 1, q), abs=1e-12)

    @given(small_matrices(4, 4))
    def test_transpose_duality(self, A):
        dual = {1: np.inf, 2: 2, np.inf: 1}
        for p in (1, 2, np.inf):
            for q in (1, 2, np.inf):
                assert pq_norm(A.T, dual[q], dual[p]) == pytest.approx(pq_norm(A, p, q), abs=TOL_MATCH)

    @given(hnp.arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)),
                      elements=st.sampled_from([-1.0, 0.0, 1.0])))
    def test_one_sided_equals_two_sided(self, A):
        assert pq_norm(A, np.inf, 1) == matcore.infty_to_one_two_sided(A)

    def test_tie_break_is_lexicographic(self):
        # every ε gives the same value, so the first (all +1) wins
        value, eps = matcore.max_sign_vector(np.eye(3), 1)
        assert value == 3
        np.testing.assert_array_equal(eps, [1, 1, 1])
        value, eps = matcore.max_sign_vector(H, 1)
        np.testing.assert_array_equal(eps, [1, 1])

    def test_enumeration_cap(self):
        with pytest.raises(matcore.EnumerationCapError):
            pq_norm(np.ones((1, 25)), np.inf, 1)


class TestSpectral:
    def test_psd_anchors(self):
        assert matcore.is_psd(np.eye(2))
        assert not matcore.is_psd([[1, 2], [2, 1]])
        assert matcore.is_psd(np.zeros((2, 2)))

    def test_psd_rejects_non_square(self):
        with pytest.raises(ValueError):
            matcore.is_psd(np.ones((2, 3)))

    def test_spectral_anchors(self):
        np.testing.assert_allclose(matcore.spectral(np.diag([2.0, 1.0]), symmetric=False).values, [2, 1])
        np.testing.assert_allclose(matcore.spectral([[0, 1], [1, 0]]).values, [1, -1], atol=1e-14)
        np.testing.assert_allclose(matcore.spectral(np.ones((2, 2))).values, [2, 0], atol=1e-14)

    @given(small_matrices(6, 6))
    def test_reconstruction(self, A):
        for sym in (False,) if A.shape[0] != A.shape[1] else (False, True):
            M = (A + A.T) / 2 if sym else A
            data = matcore.spectral(M, symmetric=sym)
            assert np.max(np.abs(data.reconstruct() - M)) <= TOL_MATCH
            assert np.all(np.diff(data.values) <= 1e-15)

    @given(small_matrices(5, 5, square=True))
    def test_psd_factor(self, A):
        M = A @ A.T
        G = matcore.psd_factor(M)
        assert np.max(np.abs(G.T @ G - M)) <= 1e-10


class TestTextFormat:
    @given(small_matrices(4, 4, elements=st.floats(-1e6, 1e6, allow_nan=False)))
    def test_roundtrip_is_exact(self, A):
        text = matcore.format_matrix(A, comments=["note"])
        B, comments = matcore.parse_matrix(text)
        np.testing.assert_array_equal(A, B)
        assert comments == ["note"]

    def test_comments_and_blank_lines(self):
        A, comments = matcore.parse_matrix("# a\n\n2 1\n# b\n1.5\n-2\n")
        np.testing.assert_array_equal(A, [[1.5], [-2]])
        assert comments == ["a", "b"]

    @pytest.mark.parametrize("text", ["", "2 2\n1 2\n3\n", "1 1\nx\n", "1 1\nnan\n", "a b\n", "2 1\n1\n"])
    def test_malformed(self, text):
        with pytest.raises(matcore.MatrixFormatError):
            matcore.parse_matrix(text)

    def test_file_roundtrip(self, tmp_path):
        A = np.array([[0.1, 1 / 3], [2.0, -7.25]])
        matcore.write_matrix(tmp_path / "m.txt", A)
        B, _ = matcore.read_matrix(tmp_path / "m.txt")
        np.testing.assert_array_equal(A, B)
