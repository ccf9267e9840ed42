"""Schur norm γ₂, Grothendieck norm γ₂*, correlation norms and their witnesses.

Every public norm routine returns a :class:`NormCertificate` whose witness is
repaired to be exactly feasible (up to rounding) before the value is read off
it, so the reported value is always the objective of a checkable feasible
point.
"""

from __future__ import annotations

import numpy as np

from . import matcore, sdp
from .certificates import (
    ContractionDecomposition,
    NormCertificate,
    SchurDecomposition,
    VectorFamilies,
)
from .matcore import TOL_MATCH


class NormInputError(ValueError):
    """Input violates a precondition (shape, symmetry, hollowness)."""


class SolverFailure(RuntimeError):
    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


def _solve(problem, tol=sdp.TOL_SDP):
    """Solve a builder program; a stalled iterate within ``10·tol`` is accepted.

    Stalls happen on badly scaled inputs whose optimal face has eigenvalues
    near machine precision.  Callers repair and re-verify every witness, so
    the accepted iterate still yields a checkable certificate.
    """
    try:
        sol = sdp.solve(problem, tol=tol)
    except sdp.SdpBreakdown as exc:
        raise SolverFailure(str(exc), exc.solution) from exc
    worst = max(sol.gap, sol.primal_infeasibility, sol.dual_infeasibility)
    if sol.status == sdp.OPTIMAL or (sol.status == sdp.MAX_ITERATIONS and worst <= 10 * tol):
        return sol
    raise SolverFailure(
        f"solver returned {sol.status} after {sol.iterations} iterations "
        f"(gap={sol.gap:.3g}, pinf={sol.primal_infeasibility:.3g}, "
        f"dinf={sol.dual_infeasibility:.3g})", sol)


def _meta(sol, **extra):
    meta = {"status": sol.status, "gap": sol.gap, "iterations": sol.iterations,
            "primal_value": sol.primal_value, "dual_value": sol.dual_value}
    meta.update(extra)
    return meta


def _require_symmetric(A, hollow=False):
    A = matcore.as_matrix(A)
    if not matcore.is_symmetric(A):
        raise NormInputError("matrix must be square and symmetric")
    if hollow and not matcore.is_hollow(A):
        raise NormInputError("matrix must be hollow (zero diagonal)")
    return A


def _shift_to_psd(M) -> float:
    """Smallest nonnegative ``s`` (plus a rounding cushion) with ``M + sI`` psd."""
    lam = matcore.min_eigenvalue(M)
    if lam >= 0:
        return 0.0
    return -lam * (1 + 1e-6) + 1e-15 * max(1.0, float(np.max(np.abs(M))))


# ---------------------------------------------------------------------------
# program builders
# ---------------------------------------------------------------------------


def _cross_constraints(prob, A, row0, col0, block=0):
    n, k = A.shape
    for i in range(n):
        for j in range(k):
            prob.add_constraint([(block, row0 + i, col0 + j, 0.5)], A[i, j])


def gamma2_program(A) -> sdp.SdpProblem:
    """minimize t  s.t.  [[X, A], [A^T, Y]] psd,  X_ii = Y_jj = t."""
    A = matcore.as_matrix(A)
    n, k = A.shape
    prob = sdp.SdpProblem([n + k], num_free=1)
    prob.set_objective([], {0: 1.0})
    _cross_constraints(prob, A, 0, n)
    for l in range(n + k):
        prob.add_constraint([(0, l, l, 1.0)], 0.0, {0: -1.0})
    return prob


def gamma2_star_program(A) -> sdp.SdpProblem:
    """minimize tr(X + Y)/2  s.t.  [[X, A], [A^T, Y]] psd,  X, Y diagonal."""
    A = matcore.as_matrix(A)
    n, k = A.shape
    N = n + k
    prob = sdp.SdpProblem([N])
    prob.set_objective([(0, l, l, 0.5) for l in range(N)])
    _cross_constraints(prob, A, 0, n)
    for i in range(n):
        for j in range(i + 1, n):
            prob.add_constraint([(0, i, j, 0.5)], 0.0)
    for i in range(k):
        for j in range(i + 1, k):
            prob.add_constraint([(0, n + i, n + j, 0.5)], 0.0)
    return prob


def trace_norm_program(M) -> sdp.SdpProblem:
    """minimize tr(X + Y)/2  s.t.  [[X, M], [M^T, Y]] psd  (value = ||M||_{S,1})."""
    M = matcore.as_matrix(M)
    n, k = M.shape
    prob = sdp.SdpProblem([n + k])
    prob.set_objective([(0, l, l, 0.5) for l in range(n + k)])
    _cross_constraints(prob, M, 0, n)
    return prob


def corr_problem_program(A) -> sdp.SdpProblem:
    """minimize tr(D)  s.t.  D + A psd, D diagonal  (variable P = D + A)."""
    n = A.shape[0]
    prob = sdp.SdpProblem([n])
    prob.set_objective([(0, i, i, 1.0) for i in range(n)])
    for i in range(n):
        for j in range(i + 1, n):
            prob.add_constraint([(0, i, j, 0.5)], A[i, j])
    return prob


def _offdiag_block(prob, block, A, sign):
    # off-diagonal part of block = sign*A; the diagonal is left to the caller
    n = A.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            prob.add_constraint([(block, i, j, 0.5)], sign * A[i, j])


def corr_C_program(A) -> sdp.SdpProblem:
    """minimize tr(D)  s.t.  D - A psd,  D + A psd.

    Variables ``P = D - A`` and ``Q = D + A`` with ``P_ii - Q_ii = -2 A_ii``;
    then ``tr(D) = tr(P + Q)/2``.
    """
    n = A.shape[0]
    prob = sdp.SdpProblem([n, n])
    prob.set_objective([(b, i, i, 0.5) for b in (0, 1) for i in range(n)])
    _offdiag_block(prob, 0, A, -1.0)
    _offdiag_block(prob, 1, A, 1.0)
    for i in range(n):
        prob.add_constraint([(0, i, i, 1.0), (1, i, i, -1.0)], -2.0 * A[i, i])
    return prob


def corr_Cprime_program(A) -> sdp.SdpProblem:
    """minimize tr(D1 + D2)/2  s.t.  D1 - A psd,  A + D2 psd,  D1, D2 >= 0.

    Variables ``P = D1 - A``, ``Q = A + D2`` and 1×1 blocks holding the
    entries of ``D1`` then ``D2``.  Without the sign constraint the minimum
    is not a norm (it vanishes on ``[[1]]``).
    """
    n = A.shape[0]
    prob = sdp.SdpProblem([n, n] + [1] * (2 * n))
    prob.set_objective([(2 + l, 0, 0, 0.5) for l in range(2 * n)])
    _offdiag_block(prob, 0, A, -1.0)
    _offdiag_block(prob, 1, A, 1.0)
    for i in range(n):
        prob.add_constraint([(0, i, i, 1.0), (2 + i, 0, 0, -1.0)], -A[i, i])
        prob.add_constraint([(1, i, i, 1.0), (2 + n + i, 0, 0, -1.0)], A[i, i])
    return prob


def symmetric_primal_program(A) -> sdp.SdpProblem:
    """maximize tr(J(A) X)  s.t.  X_ii + X_{i+n,i+n} = 1,  X psd;  J(A) = A ⊕ (-A)."""
    n = A.shape[0]
    prob = sdp.SdpProblem([2 * n], sense="max")
    obj = []
    for i in range(n):
        for j in range(i, n):
            obj.append((0, i, j, A[i, j]))
            obj.append((0, n + i, n + j, -A[i, j]))
    prob.set_objective(obj)
    for i in range(n):
        prob.add_constraint([(0, i, i, 1.0), (0, n + i, n + i, 1.0)], 1.0)
    return prob


# ---------------------------------------------------------------------------
# γ₂ and γ₂*
# ---------------------------------------------------------------------------


def gamma2(A, tol=sdp.TOL_SDP) -> NormCertificate:
    """Schur norm γ₂(A) with a ``BlockPair`` witness ``(X, Y, t)``."""
    A = matcore.as_matrix(A)
    n, k = A.shape
    sol = _solve(gamma2_program(A), tol)
    M = sol.primal_blocks[0]
    W = np.block([[M[:n, :n], A], [A.T, M[n:, n:]]])
    W = (W + W.T) / 2
    t = float(np.max(np.diag(W)))
    np.fill_diagonal(W, t)
    s = _shift_to_psd(W)
    t += s
    W[np.diag_indices_from(W)] = t
    return NormCertificate("gamma2", t, "BlockPair",
                           {"X": W[:n, :n], "Y": W[n:, n:], "t": t},
                           _meta(sol, repair_shift=s))


def _block_matrix(cert, A):
    A = matcore.as_matrix(A)
    X = np.asarray(cert.witness["X"], float)
    Y = np.asarray(cert.witness["Y"], float)
    return np.block([[X, A], [A.T, Y]])


def _factor_block(W, n):
    G = matcore.psd_factor(W)
    if G.shape[0] == 0:
        G = np.zeros((1, W.shape[0]))
    return G[:, :n].T.copy(), G[:, n:].T.copy()


def gamma2_vector_witness(cert: NormCertificate, A) -> VectorFamilies:
    """Vectors with ``<x_i, y_j> = A_ij`` and ``|x_i| |y_j| <= γ₂(A)``."""
    A = matcore.as_matrix(A)
    W = _block_matrix(cert, A)
    if not matcore.is_psd(W):
        raise NormInputError("certificate block matrix is not positive semidefinite")
    xs, ys = _factor_block(W, A.shape[0])
    return VectorFamilies(xs, ys)


def gamma2_star(A, tol=sdp.TOL_SDP) -> NormCertificate:
    """Grothendieck norm γ₂*(A) with a ``DiagonalPair`` witness ``(X, Y)``."""
    A = matcore.as_matrix(A)
    n, k = A.shape
    sol = _solve(gamma2_star_program(A), tol)
    M = sol.primal_blocks[0]
    d = np.maximum(np.diag(M).copy(), 0.0)
    W = np.block([[np.diag(d[:n]), A], [A.T, np.diag(d[n:])]])
    s = _shift_to_psd(W)
    d += s
    value = float(np.sum(d) / 2)
    return NormCertificate("gamma2star", value, "DiagonalPair",
                           {"X": np.diag(d[:n]), "Y": np.diag(d[n:])},
                           _meta(sol, repair_shift=s))


def orthogonal_witness(A, cert: NormCertificate) -> VectorFamilies:
    """Orthogonal families with ``<x_i, y_j> = A_ij`` and equal energies γ₂*(A).

    ``cert.meta["rebalance"]`` records the factor applied to the x's.
    """
    A = matcore.as_matrix(A)
    W = _block_matrix(cert, A)
    if not matcore.is_psd(W):
        raise NormInputError("certificate block matrix is not positive semidefinite")
    xs, ys = _factor_block(W, A.shape[0])
    tx, ty = float(np.sum(xs * xs)), float(np.sum(ys * ys))
    c = (ty / tx) ** 0.25 if tx > 0 and ty > 0 else 1.0
    cert.meta["rebalance"] = c
    return VectorFamilies(xs * c, ys / c, orthogonal=True)


def contraction_decomp(families: VectorFamilies) -> ContractionDecomposition:
    """``A_ij = α_i β_j X_ij`` with ``α_i = |x_i|``, ``β_j = |y_j|``, ``X`` a contraction.

    A vector whose norm is numerically zero and whose Gram row vanishes is
    treated as exactly zero, and its row (column) of ``X`` is zeroed.
    """
    xs, ys = families.xs, families.ys
    if xs.shape[0] != ys.shape[0]:
        raise NormInputError("contraction decomposition needs square families")
    G = families.gram
    alpha = np.linalg.norm(xs, axis=1)
    beta = np.linalg.norm(ys, axis=1)
    small = np.sqrt(TOL_MATCH) * max(1.0, float(np.max(alpha)), float(np.max(beta)))
    dead_x = (alpha <= small) & (np.max(np.abs(G), axis=1) <= TOL_MATCH / 10)
    dead_y = (beta <= small) & (np.max(np.abs(G), axis=0) <= TOL_MATCH / 10)
    dead_x |= alpha == 0
    dead_y |= beta == 0
    alpha = np.where(dead_x, 0.0, alpha)
    beta = np.where(dead_y, 0.0, beta)
    xn = np.where(dead_x[:, None], 0.0, xs / np.where(dead_x, 1.0, alpha)[:, None])
    yn = np.where(dead_y[:, None], 0.0, ys / np.where(dead_y, 1.0, beta)[:, None])
    return ContractionDecomposition(alpha, beta, xn @ yn.T)


def schur_decomp(decomp: ContractionDecomposition) -> SchurDecomposition:
    """``A = B ∘ C`` with rank-one ``B = α β^T`` and contraction ``C``."""
    return SchurDecomposition(np.outer(decomp.alpha, decomp.beta), decomp.X.copy())


def schur_upper_bound(B, C) -> float:
    """``||B||_{S,1} ||C||_{S,∞}``, an upper bound on γ₂*(B ∘ C)."""
    return matcore.schatten_norm(B, 1) * matcore.schatten_norm(C, np.inf)


# ---------------------------------------------------------------------------
# correlation norms
# ---------------------------------------------------------------------------


def corr_problem(A, tol=sdp.TOL_SDP) -> NormCertificate:
    """Correlation problem: min tr(D) over diagonal D with D + A psd."""
    A = _require_symmetric(A, hollow=True)
    sol = _solve(corr_problem_program(A), tol)
    d = np.maximum(np.diag(sol.primal_blocks[0]).copy(), 0.0)
    s = _shift_to_psd(np.diag(d) + A)
    d += s
    return NormCertificate("corrproblem", float(np.sum(d)), "CorrelationDiagonal",
                           {"D": d}, _meta(sol, repair_shift=s))


def corr_norm_C(A, tol=sdp.TOL_SDP) -> NormCertificate:
    """||A||_C = min tr(D) over diagonal D with D - A and D + A psd."""
    A = _require_symmetric(A)
    sol = _solve(corr_C_program(A), tol)
    P, Q = sol.primal_blocks
    d = (np.diag(P) + np.diag(Q)) / 2
    s = max(_shift_to_psd(np.diag(d) - A), _shift_to_psd(np.diag(d) + A))
    d += s
    return NormCertificate("corrC", float(np.sum(d)), "CorrelationDiagonal",
                           {"D": d}, _meta(sol, repair_shift=s))


def corr_norm_Cprime(A, tol=sdp.TOL_SDP) -> NormCertificate:
    """||A||_{C'} = min tr(D1 + D2)/2 with D1 - A psd and A + D2 psd."""
    A = _require_symmetric(A)
    n = A.shape[0]
    sol = _solve(corr_Cprime_program(A), tol)
    d1 = np.maximum(np.diag(sol.primal_blocks[0]) + np.diag(A), 0.0)
    d2 = np.maximum(np.diag(sol.primal_blocks[1]) - np.diag(A), 0.0)
    s1 = _shift_to_psd(np.diag(d1) - A)
    s2 = _shift_to_psd(np.diag(d2) + A)
    d1 += s1
    d2 += s2
    value = float((np.sum(d1) + np.sum(d2)) / 2)
    return NormCertificate("corrCprime", value, "CorrelationDiagonal",
                           {"D1": d1, "D2": d2}, _meta(sol, repair_shift=max(s1, s2)))


def cprime_orthogonal_witness(A, D1, D2) -> VectorFamilies:
    """Orthogonal families ``z_i, w_i`` with ``<z_i, w_j> = A_ij`` for ``i != j``.

    Takes diagonals with ``D1 + A`` and ``D2 - A`` psd; both families then
    carry energy ``tr(D1 + D2)/2``.  A ``corrCprime`` certificate stores the
    pair the other way round, see :func:`cprime_witness_from_certificate`.
    """
    A = _require_symmetric(A, hollow=True)
    D1 = np.diag(np.asarray(D1, float).ravel()) if np.ndim(D1) == 1 else np.asarray(D1, float)
    D2 = np.diag(np.asarray(D2, float).ravel()) if np.ndim(D2) == 1 else np.asarray(D2, float)
    B = D1 + A
    C = D2 - A
    if not (matcore.is_psd(B) and matcore.is_psd(C)):
        raise NormInputError("need D1 + A and D2 - A positive semidefinite")
    n = A.shape[0]
    gx = matcore.psd_factor(B)
    gy = matcore.psd_factor(C)
    xs = gx.T if gx.shape[0] else np.zeros((n, 1))
    ys = gy.T if gy.shape[0] else np.zeros((n, 1))
    z = np.hstack([xs, ys]) / np.sqrt(2)
    w = np.hstack([xs, -ys]) / np.sqrt(2)
    return VectorFamilies(z, w, orthogonal=True, offdiag_only=True)


def cprime_witness_from_certificate(A, cert: NormCertificate) -> VectorFamilies:
    # certificate: D1 - A psd, A + D2 psd  ->  constructor wants (D + A, D - A)
    return cprime_orthogonal_witness(A, cert.witness["D2"], cert.witness["D1"])


def symmetrize_witness(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    """Pair unit families ``x_i, y_i`` into ``z_i, w_i``.

    Guarantees ``|z_i|^2 + |w_i|^2 = 1`` and
    ``(<x_i, y_j> + <x_j, y_i>)/2 = <z_i, z_j> - <w_i, w_j>``.
    """
    xs = np.atleast_2d(np.asarray(xs, float))
    ys = np.atleast_2d(np.asarray(ys, float))
    if xs.shape != ys.shape:
        raise NormInputError("families must have the same shape")
    if (np.max(np.abs(np.linalg.norm(xs, axis=1) - 1)) > TOL_MATCH
            or np.max(np.abs(np.linalg.norm(ys, axis=1) - 1)) > TOL_MATCH):
        raise NormInputError("symmetrize_witness needs unit vectors")
    a = np.hstack([xs, ys])
    b = np.hstack([ys, xs])
    c = 1 / (2 * np.sqrt(2))
    return c * (a + b), c * (a - b)


def gamma2_star_symmetric_primal(A, tol=sdp.TOL_SDP) -> NormCertificate:
    """γ₂*(A) for symmetric A as max tr(J(A) X) over X psd with paired unit diagonal.

    The witness carries the (repaired) primal ``X`` and the dual diagonal ``D``
    with ``D ± A`` psd, so both sides of the strong-duality pair are checkable.
    """
    A = _require_symmetric(A)
    n = A.shape[0]
    sol = _solve(symmetric_primal_program(A), tol)
    X = sol.primal_blocks[0]
    w, U = matcore.eigh_desc(X)
    X = (U * np.maximum(w, 0.0)) @ U.T
    tot = np.diag(X)[:n] + np.diag(X)[n:]
    scale = 1 / np.sqrt(np.where(tot > 0, tot, 1.0))
    S = np.concatenate([scale, scale])
    X = X * np.outer(S, S)
    J = np.block([[A, np.zeros_like(A)], [np.zeros_like(A), -A]])
    lower = float(np.sum(J * X))
    d = sol.dual_multipliers.copy()
    s = max(_shift_to_psd(np.diag(d) - A), _shift_to_psd(np.diag(d) + A))
    d += s
    return NormCertificate("gamma2star_sym", lower, "SymmetricGram", {"X": X, "D": d},
                           _meta(sol, upper_bound=float(np.sum(d)), repair_shift=s))


def tilde_embed(A) -> np.ndarray:
    """The hollow symmetric matrix ``[[0, A], [A^T, 0]]``."""
    A = matcore.as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise NormInputError("tilde_embed needs a square matrix")
    Z = np.zeros_like(A)
    return np.block([[Z, A], [A.T, Z]])
