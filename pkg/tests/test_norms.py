import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import small_matrices, symmetric_matrices
from oracles import gamma2_bounds, grothendieck_ascent
from grothnorm import matcore, norms
from grothnorm.certificates import (
    NormCertificate,
    verify,
    verify_contraction,
    verify_families,
    verify_schur,
)
from grothnorm.matcore import TOL_MATCH
from grothnorm.sdp import TOL_SDP

H = np.array([[1.0, 1.0], [1.0, -1.0]])
J2 = np.ones((2, 2))
J3_I3 = np.ones((3, 3)) - np.eye(3)
SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])
TOL = 1e-6


def approx(x):
    return pytest.approx(x, abs=TOL * (1 + abs(x)))


class TestGamma2:
    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_identity_and_ones(self, n):
        assert norms.gamma2(np.eye(n)).value == approx(1)
        assert norms.gamma2(np.ones((n, n))).value == approx(1)

    def test_hadamard(self):
        # both bounds of the closed-form bracket equal sqrt(2)
        lo, hi = gamma2_bounds(H)
        assert lo == pytest.approx(np.sqrt(2)) and hi == pytest.approx(np.sqrt(2))
        assert norms.gamma2(H).value == approx(np.sqrt(2))

    def test_vector_witness(self):
        for A in (np.eye(2), J2, np.diag([2.0, 0.0])):
            cert = norms.gamma2(A)
            fam = norms.gamma2_vector_witness(cert, A)
            assert verify_families(fam, A)["pass"]
            top = np.max(np.linalg.norm(fam.xs, axis=1)) * np.max(np.linalg.norm(fam.ys, axis=1))
            assert top <= cert.value + TOL_MATCH
        cert = norms.gamma2(J2)
        fam = norms.gamma2_vector_witness(cert, J2)
        assert np.max(np.abs(np.vstack([fam.xs, fam.ys]) - fam.xs[0])) <= 1e-3

    def test_diagonal(self):
        assert norms.gamma2(np.diag([2.0, 0.0])).value == approx(2)
        assert norms.gamma2(np.diag([-3.0, 1.0, 2.0])).value == approx(3)

    @settings(max_examples=30)
    @given(small_matrices(5, 5))
    def test_bracket_and_certificate(self, A):
        cert = norms.gamma2(A)
        lo, hi = gamma2_bounds(A)
        assert lo - TOL <= cert.value <= hi + TOL
        assert verify(cert, A)["pass"]


class TestGamma2Star:
    def test_anchors(self):
        assert norms.gamma2_star(np.eye(2)).value == approx(2)
        assert norms.gamma2_star(J2).value == approx(4)
        assert norms.gamma2_star([[-3.0]]).value == approx(3)
        assert norms.gamma2_star(SWAP).value == approx(2)

    @settings(max_examples=25)
    @given(small_matrices(5, 5))
    def test_matches_ascent_oracle(self, A):
        cert = norms.gamma2_star(A)
        assert cert.value == approx(grothendieck_ascent(A))
        assert verify(cert, A)["pass"]

    @settings(max_examples=25)
    @given(small_matrices(6, 6))
    def test_grothendieck_sandwich(self, A):
        value = norms.gamma2_star(A).value
        lower = matcore.pq_norm(A, np.inf, 1)
        assert lower - TOL_MATCH <= value <= 1.8 * lower + TOL_MATCH

    @settings(max_examples=20)
    @given(st.integers(1, 5).flatmap(lambda n: st.tuples(
        small_matrices(n, n, square=True), small_matrices(n, n, square=True))))
    def test_norm_duality(self, pair):
        A, B = pair
        n = min(A.shape[0], B.shape[0])
        A, B = A[:n, :n], B[:n, :n]
        pairing = abs(np.trace(A.T @ B))
        assert pairing <= norms.gamma2(A).value * norms.gamma2_star(B).value + TOL_MATCH

    @settings(max_examples=20)
    @given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=5))
    def test_diagonal_case(self, d):
        D = np.diag(d)
        assert norms.gamma2_star(D).value == approx(np.sum(np.abs(d)))
        assert norms.gamma2(D).value == approx(np.max(np.abs(d)))


class TestWitnessChain:
    def test_identity(self):
        cert = norms.gamma2_star(np.eye(2))
        fam = norms.orthogonal_witness(np.eye(2), cert)
        assert np.sum(fam.xs ** 2) == approx(2)
        dec = norms.contraction_decomp(fam)
        np.testing.assert_allclose(dec.alpha, [1, 1], atol=1e-4)
        np.testing.assert_allclose(dec.beta, [1, 1], atol=1e-4)
        np.testing.assert_allclose(dec.X, np.eye(2), atol=1e-4)
        sch = norms.schur_decomp(dec)
        np.testing.assert_allclose(sch.B, J2, atol=1e-4)
        assert matcore.schatten_norm(sch.B, 1) == pytest.approx(2, abs=1e-6)

    @pytest.mark.parametrize("a", [2.5, -0.7])
    def test_scalar(self, a):
        A = np.array([[a]])
        cert = norms.gamma2_star(A)
        fam = norms.orthogonal_witness(A, cert)
        assert np.sum(fam.xs ** 2) == approx(abs(a))
        assert np.sum(fam.ys ** 2) == approx(abs(a))
        dec = norms.contraction_decomp(fam)
        assert dec.alpha[0] == pytest.approx(np.sqrt(abs(a)), abs=1e-6)
        assert dec.X[0, 0] == pytest.approx(np.sign(a), abs=1e-6)
        sch = norms.schur_decomp(dec)
        assert sch.C[0, 0] == pytest.approx(np.sign(a), abs=1e-6)

    def test_swap_matrix(self):
        cert = norms.gamma2_star(SWAP)
        fam = norms.orthogonal_witness(SWAP, cert)
        assert fam.orthogonal
        assert verify_families(fam, SWAP)["pass"]
        assert np.sum(fam.xs ** 2) == approx(2)

    def test_degenerate_row_is_zeroed(self):
        A = np.array([[0.0, 0.0], [0.0, 1.0]])
        cert = norms.gamma2_star(A)
        dec = norms.contraction_decomp(norms.orthogonal_witness(A, cert))
        assert dec.alpha[0] == 0 and dec.beta[0] == 0
        assert np.all(dec.X[0] == 0) and np.all(dec.X[:, 0] == 0)
        assert verify_contraction(dec, A, cert.value)["pass"]

    def test_all_ones_schur_chain(self):
        cert = norms.gamma2_star(J2)
        sch = norms.schur_decomp(norms.contraction_decomp(norms.orthogonal_witness(J2, cert)))
        product = matcore.schatten_norm(sch.B, 1) * matcore.schatten_norm(sch.C, np.inf)
        assert product == pytest.approx(4, abs=10 * TOL_MATCH)

    @settings(max_examples=25)
    @given(small_matrices(5, 5, square=True))
    def test_chain_invariants(self, A):
        cert = norms.gamma2_star(A)
        fam = norms.orthogonal_witness(A, cert)
        fam.orthogonal = True
        assert verify_families(fam, A)["pass"]
        assert np.sum(fam.xs ** 2) == approx(cert.value)
        assert np.sum(fam.ys ** 2) == approx(cert.value)
        dec = norms.contraction_decomp(fam)
        assert verify_contraction(dec, A, cert.value, 10 * TOL_MATCH)["pass"]
        sch = norms.schur_decomp(dec)
        assert verify_schur(sch, A, cert.value, 10 * TOL_MATCH)["pass"]

    @settings(max_examples=20)
    @given(small_matrices(4, 4, square=True), small_matrices(4, 4, square=True))
    def test_any_schur_split_bounds(self, B, C):
        n = min(B.shape[0], C.shape[0])
        B, C = B[:n, :n], C[:n, :n]
        assert norms.gamma2_star(B * C).value <= norms.schur_upper_bound(B, C) + TOL_MATCH


class TestCorrelation:
    def test_corr_problem_anchors(self):
        assert norms.corr_problem(np.zeros((3, 3))).value == approx(0)
        assert norms.corr_problem(J3_I3).value == approx(3)
        assert norms.corr_problem(-SWAP).value == approx(2)

    def test_corr_problem_preconditions(self):
        with pytest.raises(norms.NormInputError):
            norms.corr_problem(np.eye(2))
        with pytest.raises(norms.NormInputError):
            norms.corr_problem([[0.0, 1.0], [0.0, 0.0]])

    def test_corr_C_anchors(self):
        assert norms.corr_norm_C(SWAP).value == approx(2)
        assert norms.corr_norm_C(J3_I3).value == approx(6)
        assert norms.corr_norm_C([[5.0]]).value == approx(5)
        with pytest.raises(norms.NormInputError):
            norms.corr_norm_C([[0.0, 1.0], [2.0, 0.0]])

    def test_corr_Cprime_anchors(self):
        assert norms.corr_norm_Cprime(J3_I3).value == approx(4.5)
        assert norms.corr_norm_Cprime(SWAP).value == approx(2)
        assert norms.corr_norm_Cprime(np.zeros((2, 2))).value == approx(0)

    @settings(max_examples=25)
    @given(symmetric_matrices(6))
    def test_C_equals_gamma2star(self, S):
        c = norms.corr_norm_C(S).value
        assert c == pytest.approx(norms.gamma2_star(S).value, abs=10 * TOL_SDP * (1 + c))

    @settings(max_examples=25)
    @given(symmetric_matrices(6))
    def test_C_Cprime_bounds_and_certificates(self, S):
        c = norms.corr_norm_C(S)
        cp = norms.corr_norm_Cprime(S)
        assert cp.value <= c.value + TOL_MATCH
        assert c.value <= 2 * cp.value + TOL_MATCH
        assert verify(c, S)["pass"] and verify(cp, S)["pass"]

    @pytest.mark.parametrize("n", range(2, 9))
    def test_sharpness_family(self, n):
        A = np.ones((n, n)) - np.eye(n)
        ratio = norms.corr_norm_C(A).value / norms.corr_norm_Cprime(A).value
        assert ratio == pytest.approx(2 * (n - 1) / n, abs=1e-5)

    def test_cprime_witness_anchors(self):
        fam = norms.cprime_orthogonal_witness(np.zeros((2, 2)), np.zeros(2), np.zeros(2))
        assert np.sum(fam.xs ** 2) == 0
        fam = norms.cprime_orthogonal_witness(SWAP, np.ones(2), np.ones(2))
        assert np.sum(fam.xs ** 2) == pytest.approx(2) and np.sum(fam.ys ** 2) == pytest.approx(2)
        assert fam.xs[0] @ fam.ys[1] == pytest.approx(1)
        cert = norms.corr_norm_Cprime(J3_I3)
        fam = norms.cprime_witness_from_certificate(J3_I3, cert)
        assert verify_families(fam, J3_I3)["pass"]
        assert np.sum(fam.xs ** 2) == approx(4.5)
        assert np.sum(fam.ys ** 2) == approx(4.5)

    def test_cprime_witness_rejects_infeasible(self):
        with pytest.raises(norms.NormInputError):
            norms.cprime_orthogonal_witness(SWAP, np.zeros(2), np.zeros(2))

    @settings(max_examples=20)
    @given(symmetric_matrices(5))
    def test_cprime_witness_property(self, S):
        H0 = S - np.diag(np.diag(S))
        cert = norms.corr_norm_Cprime(H0)
        fam = norms.cprime_witness_from_certificate(H0, cert)
        assert verify_families(fam, H0)["pass"]
        assert np.sum(fam.xs ** 2) == approx(cert.value)


class TestSymmetrize:
    def test_equal_families(self):
        x = np.eye(3)
        z, w = norms.symmetrize_witness(x, x)
        assert np.all(w == 0)
        np.testing.assert_allclose(np.linalg.norm(z, axis=1), 1)

    def test_orthogonal_pair(self):
        z, w = norms.symmetrize_witness([[1.0, 0.0]], [[0.0, 1.0]])
        assert np.sum(z ** 2) == pytest.approx(0.5)
        assert np.sum(w ** 2) == pytest.approx(0.5)

    def test_rejects_non_unit(self):
        with pytest.raises(norms.NormInputError):
            norms.symmetrize_witness([[2.0, 0.0]], [[1.0, 0.0]])

    @given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2 ** 31))
    def test_identity(self, n, d, seed):
        rng = np.random.default_rng(seed)
        xs = rng.standard_normal((n, d))
        ys = rng.standard_normal((n, d))
        xs /= np.linalg.norm(xs, axis=1)[:, None]
        ys /= np.linalg.norm(ys, axis=1)[:, None]
        z, w = norms.symmetrize_witness(xs, ys)
        np.testing.assert_allclose(np.sum(z ** 2, 1) + np.sum(w ** 2, 1), 1, atol=TOL_MATCH)
        G = xs @ ys.T
        np.testing.assert_allclose((G + G.T) / 2, z @ z.T - w @ w.T, atol=TOL_MATCH)


class TestSymmetricPrimal:
    def test_anchors(self):
        assert norms.gamma2_star_symmetric_primal(SWAP).value == approx(2)
        assert norms.gamma2_star_symmetric_primal(np.zeros((2, 2))).value == approx(0)
        assert norms.gamma2_star_symmetric_primal(J3_I3).value == approx(6)

    @settings(max_examples=20)
    @given(symmetric_matrices(6))
    def test_certificate(self, S):
        cert = norms.gamma2_star_symmetric_primal(S)
        assert verify(cert, S)["pass"]
        assert cert.value == pytest.approx(norms.corr_norm_C(S).value, abs=10 * TOL_SDP * (1 + cert.value))


class TestTildeEmbed:
    def test_scalar(self):
        T = norms.tilde_embed([[2.0]])
        np.testing.assert_array_equal(T, [[0, 2], [2, 0]])
        np.testing.assert_allclose(np.linalg.eigvalsh(T), [-2, 2])

    def test_hadamard_spectrum(self):
        ev = np.linalg.eigvalsh(norms.tilde_embed(H))
        np.testing.assert_allclose(ev, np.sqrt(2) * np.array([-1, -1, 1, 1]), atol=1e-12)

    @settings(max_examples=20)
    @given(small_matrices(4, 4, square=True))
    def test_spectrum_is_signed_singular_values(self, A):
        s = np.linalg.svd(A, compute_uv=False)
        np.testing.assert_allclose(np.linalg.eigvalsh(norms.tilde_embed(A)),
                                   np.sort(np.concatenate([s, -s])), atol=1e-12)

    @settings(max_examples=20)
    @given(small_matrices(4, 4, square=True))
    def test_correlation_norms_of_embedding(self, A):
        # both norms of the embedding equal twice γ₂*(A)
        T = norms.tilde_embed(A)
        g = norms.gamma2_star(A).value
        assert norms.corr_norm_C(T).value == approx(2 * g)
        assert norms.corr_norm_Cprime(T).value == approx(2 * g)

    def test_identity_embedding(self):
        assert norms.corr_norm_C(norms.tilde_embed(np.eye(2))).value == approx(4)


def test_certificate_json_roundtrip():
    cert = norms.gamma2_star(H)
    back = NormCertificate.from_dict(json.loads(cert.to_json()))
    assert back.value == cert.value
    assert verify(back, H)["pass"]


def test_corrupted_certificate_fails():
    cert = norms.gamma2_star(H)
    cert.witness["X"] = cert.witness["X"] * 0.5
    assert not verify(cert, H)["pass"]
