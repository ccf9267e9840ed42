"""Linear maps on real n×n matrices, stored by their Choi matrix.

The Choi matrix is n²×n² with block ``(i, j)`` equal to ``Φ(E_ij)``, so entry
``choi[i*n + k, j*n + l] = Φ(E_ij)[k, l]``.
"""

from __future__ import annotations

import functools
import itertools
import re
from dataclasses import dataclass

import numpy as np

from . import matcore, norms, sdp
from .certificates import NormCertificate
from .matcore import TOL_MATCH

CS1_CAP = 16
CS1_SDP_CAP = 4
GAP_DEMO_CAP = 12
CLIFFORD_CAP = 8
GAMMA_STAR_CAP = 8
MULTISTARTS = 16

_CHOI_HEADER = re.compile(r"choi\s+n\s*=\s*(\d+)")


@dataclass
class MatrixMap:
    n: int
    choi: np.ndarray

    def __post_init__(self):
        self.choi = matcore.as_matrix(self.choi, "choi")
        if self.choi.shape != (self.n * self.n, self.n * self.n):
            raise ValueError(f"choi matrix must be {self.n ** 2}x{self.n ** 2}")

    @property
    def blocks(self) -> np.ndarray:
        """Four-index view ``C[i, k, j, l] = Φ(E_ij)[k, l]``."""
        n = self.n
        return self.choi.reshape(n, n, n, n)

    @classmethod
    def from_callable(cls, n, f) -> "MatrixMap":
        choi = np.zeros((n * n, n * n))
        for i in range(n):
            for j in range(n):
                E = np.zeros((n, n))
                E[i, j] = 1.0
                choi[i * n:(i + 1) * n, j * n:(j + 1) * n] = f(E)
        return cls(n, choi)

    def __call__(self, X) -> np.ndarray:
        return apply(self, X)


def apply(phi: MatrixMap, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape != (phi.n, phi.n):
        raise ValueError(f"expected a {phi.n}x{phi.n} matrix, got {X.shape}")
    return np.einsum("ij,ikjl->kl", X, phi.blocks)


def conjugate(phi: MatrixMap) -> MatrixMap:
    """``X -> Φ(X^T)^T``."""
    return MatrixMap(phi.n, phi.choi.T.copy())


def adjoint(phi: MatrixMap) -> MatrixMap:
    """The map ``Ψ`` with ``tr(Φ(X) Y) = tr(X Ψ(Y))``."""
    n = phi.n
    C = phi.blocks.transpose(3, 2, 1, 0)
    return MatrixMap(n, C.reshape(n * n, n * n).copy())


def is_cp(phi: MatrixMap, tol=matcore.PSD_TOL) -> bool:
    return matcore.is_psd(phi.choi, tol)


def identity_map(n: int) -> MatrixMap:
    choi = np.zeros((n * n, n * n))
    diag = np.arange(n) * (n + 1)
    choi[np.ix_(diag, diag)] = 1.0
    return MatrixMap(n, choi)


def zero_map(n: int) -> MatrixMap:
    return MatrixMap(n, np.zeros((n * n, n * n)))


def diagonal_embedding(A) -> np.ndarray:
    """``Σ_ij A_ij E_ij ⊗ E_ij`` as an n²×n² matrix."""
    A = matcore.as_matrix(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("need a square matrix")
    out = np.zeros((n * n, n * n))
    diag = np.arange(n) * (n + 1)
    out[np.ix_(diag, diag)] = A
    return out


def schur_map(A) -> MatrixMap:
    """The Schur multiplier ``X -> A ∘ X``."""
    A = matcore.as_matrix(A)
    return MatrixMap(A.shape[0], diagonal_embedding(A))


def diagonal_action_map(A) -> MatrixMap:
    """``E_ij -> δ_ij Σ_k A_ik E_kk``; sends ``diag(ε)`` to ``diag(A^T ε)``."""
    A = matcore.as_matrix(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("need a square matrix")
    return MatrixMap(n, np.diag(A.ravel()))


def compose(phi: MatrixMap, psi: MatrixMap) -> MatrixMap:
    """``X -> phi(psi(X))``."""
    return MatrixMap.from_callable(phi.n, lambda E: apply(phi, apply(psi, E)))


def conjugation_map(V) -> MatrixMap:
    """``X -> V X V^T``; completely positive."""
    V = matcore.as_matrix(V)
    return MatrixMap.from_callable(V.shape[0], lambda E: V @ E @ V.T)


def conditional_expectation(phi: MatrixMap) -> np.ndarray:
    """The n×n matrix with entries ``Φ(E_ij)[i, j]``."""
    idx = np.arange(phi.n)
    return phi.blocks[idx[:, None], idx[:, None], idx[None, :], idx[None, :]].copy()


# ---------------------------------------------------------------------------
# Schatten-1 quantities
# ---------------------------------------------------------------------------


def cs1_norm(phi: MatrixMap, cross_check: bool | None = None) -> NormCertificate:
    """Trace norm of the Choi matrix, with a ``TracePair`` witness on it.

    For ``n <= 4`` the trace-norm SDP is also solved and its value stored in
    ``meta``; ``cross_check=False`` skips that.
    """
    n = phi.n
    if n > CS1_CAP:
        raise matcore.EnumerationCapError(f"n = {n} exceeds the cap {CS1_CAP}")
    U, s, Vt = np.linalg.svd(phi.choi)
    X = (U * s) @ U.T
    Y = (Vt.T * s) @ Vt
    value = float(np.sum(s))
    meta = {"choi_n": n}
    if cross_check is None:
        cross_check = n <= CS1_SDP_CAP
    if cross_check:
        if n > CS1_SDP_CAP:
            raise matcore.EnumerationCapError(f"n = {n} exceeds the SDP cap {CS1_SDP_CAP}")
        sol = norms._solve(norms.trace_norm_program(phi.choi))
        meta["sdp_value"] = sol.primal_value
        meta["sdp_agrees"] = bool(abs(sol.primal_value - value) <= 10 * sdp.TOL_SDP * (1 + value))
    return NormCertificate("cs1", value, "TracePair", {"X": X, "Y": Y}, meta)


def lower_bound_cs1(phi: MatrixMap) -> float:
    return matcore.schatten_norm(conditional_expectation(phi), 1)


def _polar(M) -> np.ndarray:
    U, _, Vt = np.linalg.svd(M)
    return U @ Vt


def _ascend(phi, adj, X, iters):
    best, best_X = matcore.schatten_norm(apply(phi, X), 1), X
    for _ in range(iters):
        Y = _polar(apply(phi, X).T)
        X = _polar(apply(adj, Y).T)
        val = matcore.schatten_norm(apply(phi, X), 1)
        if val > best:
            best, best_X = val, X
        elif val <= best * (1 + 1e-14):
            break
    return best, best_X


def op_to_trace_estimate(phi: MatrixMap, iters: int = 100, seed: int = 0,
                         starts: int = MULTISTARTS) -> dict:
    """Lower bound on ``sup |tr(Φ(X) Y)|`` over contractions ``X, Y``.

    Alternates polar-factor updates of ``Y`` and ``X`` from the identity and
    ``starts`` random orthogonal matrices (start ``s`` seeded by ``(seed, s)``).
    """
    adj = adjoint(phi)
    best, best_X = _ascend(phi, adj, np.eye(phi.n), iters)
    for s in range(starts):
        rng = np.random.default_rng([seed, s])
        Q, _ = np.linalg.qr(rng.standard_normal((phi.n, phi.n)))
        val, X = _ascend(phi, adj, Q, iters)
        if val > best:
            best, best_X = val, X
    recheck = matcore.schatten_norm(apply(phi, best_X), 1)
    return {
        "lower_bound": recheck,
        "X": best_X,
        "X_operator_norm": matcore.schatten_norm(best_X, np.inf),
        "starts": starts + 1,
        "seed": int(seed),
    }


def diagonal_action_op_to_trace(A) -> tuple[float, np.ndarray]:
    """Exact ``||Φ||_{S,∞→S,1} = max_ε ||A^T ε||_1`` with the maximizing ε."""
    A = matcore.as_matrix(A)
    return matcore.max_sign_vector(A.T, 1)


def cs1_gap_demo(A) -> dict:
    A = matcore.as_matrix(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("need a square matrix")
    if n > GAP_DEMO_CAP:
        raise matcore.EnumerationCapError(f"n = {n} exceeds the cap {GAP_DEMO_CAP}")
    cs1 = cs1_norm(diagonal_action_map(A), cross_check=False).value
    op, eps = diagonal_action_op_to_trace(A)
    return {
        "n": n,
        "cs1": cs1,
        "entry_sum": float(np.sum(np.abs(A))),
        "op_to_trace": op,
        "maximizing_signs": eps,
        "ratio": cs1 / op if op > 0 else None,
    }


# ---------------------------------------------------------------------------
# Clifford witnesses
# ---------------------------------------------------------------------------

# I, X, J, Z with J antisymmetric; a tensor string is symmetric and squares
# to I exactly when it holds an even number of J factors
_PAULIS = (np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]]),
           np.array([[0.0, 1.0], [-1.0, 0.0]]), np.array([[1.0, 0.0], [0.0, -1.0]]))


def _kron_all(mats):
    out = np.ones((1, 1))
    for M in mats:
        out = np.kron(out, M)
    return out


@dataclass
class CliffordSystem:
    m: int
    dim: int
    generators: list

    def pairing(self, coeffs_a, coeffs_b) -> np.ndarray:
        """Matrix of normalized traces ``tr(B_i C_j) / dim``."""
        Bs = self.combine(coeffs_a)
        Cs = self.combine(coeffs_b)
        return np.array([[np.sum(B * C.T) / self.dim for C in Cs] for B in Bs])

    def combine(self, coeffs) -> list:
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        if coeffs.shape[1] != self.m:
            raise ValueError(f"coefficient vectors must have length {self.m}")
        G = np.array(self.generators)
        return list(np.einsum("ik,kab->iab", coeffs, G))


def _anticommute(a, b) -> bool:
    return sum(x != 0 and y != 0 and x != y for x, y in zip(a, b)) % 2 == 1


@functools.lru_cache(maxsize=None)
def _anticommuting_strings(m, q):
    """First ``m`` pairwise anticommuting symmetric strings on ``q`` factors, in
    lexicographic search order, or ``None``."""
    pool = [s for s in itertools.product(range(4), repeat=q) if any(s) and s.count(2) % 2 == 0]

    def extend(chosen, start):
        if len(chosen) == m:
            return chosen
        for k in range(start, len(pool)):
            if all(_anticommute(pool[k], c) for c in chosen):
                found = extend(chosen + [pool[k]], k + 1)
                if found:
                    return found
        return None

    found = extend([], 0)
    return tuple(found) if found else None


def clifford_system(m: int) -> CliffordSystem:
    """``m`` real symmetric, pairwise anticommuting involutions of least dimension.

    Generators are tensor strings over ``I, X, J, Z``; the number of factors is
    the smallest that admits ``m`` of them (dimension 2, 2, 4, 8, 8, 16, 16, 16).
    """
    if not 1 <= m <= CLIFFORD_CAP:
        raise matcore.EnumerationCapError(f"m = {m} outside 1..{CLIFFORD_CAP}")
    q = 1
    while (strings := _anticommuting_strings(m, q)) is None:
        q += 1
    gens = [_kron_all([_PAULIS[k] for k in s]) for s in strings]
    return CliffordSystem(m, 1 << q, gens)


def check_clifford(system: CliffordSystem, tol=TOL_MATCH) -> dict:
    G = system.generators
    I = np.eye(system.dim)
    anti = max(np.max(np.abs(a @ b + b @ a - 2 * (k == l) * I))
               for k, a in enumerate(G) for l, b in enumerate(G))
    norm_dev = max(abs(matcore.schatten_norm(g, np.inf) - 1) for g in G)
    sym = max(np.max(np.abs(g - g.T)) for g in G)
    return {"anticommutation": float(anti), "norm_deviation": float(norm_dev),
            "symmetry": float(sym), "pass": bool(max(anti, norm_dev, sym) <= tol)}


def clifford_witness(xis, etas, tol=TOL_MATCH):
    """Contractions ``B_i, C_j`` with ``tr(B_i C_j)/dim = <ξ_i, η_j>``.

    Returns ``(Bs, Cs, pairing)``.
    """
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    etas = np.atleast_2d(np.asarray(etas, dtype=float))
    m = xis.shape[1]
    if etas.shape[1] != m:
        raise ValueError("vectors must share a dimension")
    for V in (xis, etas):
        if np.max(np.abs(np.linalg.norm(V, axis=1) - 1)) > tol:
            raise ValueError("clifford_witness needs unit vectors")
    system = clifford_system(m)
    Bs, Cs = system.combine(xis), system.combine(etas)
    pairing = np.array([[np.sum(B * C.T) / system.dim for C in Cs] for B in Bs])
    return Bs, Cs, pairing


def _unit_vectors_program(A) -> sdp.SdpProblem:
    """maximize Σ A_ij W[i, n+j] over psd W with unit diagonal."""
    n, k = A.shape
    prob = sdp.SdpProblem([n + k], sense="max")
    prob.set_objective([(0, i, n + j, A[i, j] / 2)
                        for i in range(n) for j in range(k) if A[i, j] != 0])
    for l in range(n + k):
        prob.add_constraint([(0, l, l, 1.0)], 1.0)
    return prob


def _reduce_rank(V, objective, max_rank):
    """Lower the rank of ``W = V V^T`` keeping ``diag(W)`` and ``<objective, W>`` fixed."""
    N = V.shape[0]
    while V.shape[1] > max_rank:
        r = V.shape[1]
        iu = np.triu_indices(r)
        basis = []
        for a, b in zip(*iu):
            S = np.zeros((r, r))
            S[a, b] = S[b, a] = 1.0
            basis.append(S)
        rows = [[(V @ S @ V.T)[l, l] for S in basis] for l in range(N)]
        rows.append([np.sum(objective * (V @ S @ V.T)) for S in basis])
        _, _, Wt = np.linalg.svd(np.array(rows))
        coef = Wt[-1]
        Delta = sum(c * S for c, S in zip(coef, basis))
        lam, Q = np.linalg.eigh(Delta)
        if abs(lam[0]) < abs(lam[-1]):
            Delta, lam, Q = -Delta, -lam[::-1], Q[:, ::-1]
        step = -1.0 / lam[0]
        M = np.eye(r) + step * Delta
        w, P = np.linalg.eigh(M)
        keep = w > 1e-12 * w.max()
        V = V @ (P[:, keep] * np.sqrt(w[keep]))
    return V


def gamma_star_map_bound(A) -> dict:
    """Certified lower bound ``|Σ A_ij tr(B_i C_j)/dim|`` with Clifford contractions.

    Unit vectors come from the unit-diagonal SDP, their rank is lowered until
    the Clifford dimension stays within bounds, and the bound is compared
    with the γ₂* upper certificate.
    """
    A = matcore.as_matrix(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("need a square matrix")
    if n > GAMMA_STAR_CAP:
        raise matcore.EnumerationCapError(f"n = {n} exceeds the cap {GAMMA_STAR_CAP}")
    upper = norms.gamma2_star(A)
    sol = norms._solve(_unit_vectors_program(A))
    W = sol.primal_blocks[0]
    w, P = np.linalg.eigh((W + W.T) / 2)
    keep = w > 1e-9 * max(w.max(), 1.0)
    V = P[:, keep] * np.sqrt(w[keep])
    objective = np.zeros((2 * n, 2 * n))
    objective[:n, n:] = A / 2
    objective[n:, :n] = A.T / 2
    max_rank = 1
    while (max_rank + 1) * (max_rank + 2) // 2 <= 2 * n + 1:
        max_rank += 1
    V = _reduce_rank(V, objective, min(max_rank, CLIFFORD_CAP))
    V = V / np.linalg.norm(V, axis=1)[:, None]
    Bs, Cs, pairing = clifford_witness(V[:n], V[n:])
    value = float(abs(np.sum(A * pairing)))
    contraction = max(matcore.schatten_norm(M, np.inf) for M in Bs + Cs)
    return {
        "value": value,
        "gamma2_star": upper.value,
        "infty_to_one": matcore.pq_norm(A, np.inf, 1),
        "clifford_dim": int(Bs[0].shape[0]),
        "rank": int(V.shape[1]),
        "max_contraction_norm": contraction,
        "unit_vectors": {"xi": V[:n], "eta": V[n:]},
        "B": Bs,
        "C": Cs,
        "upper_certificate": upper,
    }


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------


def format_map(phi: MatrixMap) -> str:
    return matcore.format_matrix(phi.choi, comments=[f"choi n={phi.n}"])


def parse_map(text: str) -> MatrixMap:
    M, comments = matcore.parse_matrix(text)
    for c in comments:
        hit = _CHOI_HEADER.search(c)
        if hit:
            return MatrixMap(int(hit.group(1)), M)
    raise matcore.MatrixFormatError("missing '# choi n=<n>' header")


def read_map(path) -> MatrixMap:
    with open(path) as fh:
        return parse_map(fh.read())


def write_map(path, phi: MatrixMap) -> None:
    with open(path, "w") as fh:
        fh.write(format_map(phi))
