"""The sign-vector lift F(A), the ρ functional and the sampling experiment.

Sign vectors are indexed by integers: bit ``b`` of the index (``b = 0`` least
significant, coordinate 1) is 0 for ``+1`` and 1 for ``-1``.  Index 0 is the
all-ones vector and ``idx ^ (2^n - 1)`` is the negation of ``idx``.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass

import numpy as np

from . import matcore, norms
from .certificates import NormCertificate, VectorFamilies
from .matcore import TOL_MATCH

LIFT_CAP = 5
RHO_CAP = 24
RIETZ_CAP = 20
EXPERIMENT_N_CAP = 12
EXPERIMENT_K_CAP = 64

_MASK64 = (1 << 64) - 1


class CapExceeded(ValueError):
    pass


def sign_matrix(n: int) -> np.ndarray:
    """All of ``{±1}^n`` as rows, in index order."""
    idx = np.arange(1 << n, dtype=np.int64)[:, None]
    bits = (idx >> np.arange(n, dtype=np.int64)) & 1
    return 1.0 - 2.0 * bits


def sign_index(eps) -> int:
    """Inverse of :func:`sign_matrix`: the index of a sign vector."""
    eps = np.asarray(eps)
    if not np.all(np.abs(eps) == 1):
        raise ValueError("entries must be +1 or -1")
    return int(sum(1 << b for b, e in enumerate(eps) if e < 0))


@dataclass(frozen=True)
class FourierMatrix:
    n: int
    M: np.ndarray

    def check_symmetries(self, tol=0.0) -> bool:
        full = (1 << self.n) - 1
        neg = np.arange(1 << self.n) ^ full
        M = self.M
        return bool(np.max(np.abs(M - M[np.ix_(neg, neg)])) <= tol
                    and np.max(np.abs(M[neg, :] + M)) <= tol)


def fourier_lift(A) -> FourierMatrix:
    """``F(A)[ε, η] = Σ_ij A_ij ε_i η_j`` over all sign vectors."""
    A = matcore.as_matrix(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("fourier_lift needs a square matrix")
    if n > LIFT_CAP:
        raise CapExceeded(f"n = {n} exceeds the lift cap {LIFT_CAP}")
    E = sign_matrix(n)
    return FourierMatrix(n, E @ A @ E.T)


def rho(vectors) -> float:
    """``max_ε |Σ ε_i x_i|_2`` for the rows ``x_i`` of ``vectors``.

    Evaluated as ``sqrt(max_ε ε^T G ε)`` on the Gram matrix ``G``.
    """
    X = np.atleast_2d(np.asarray(vectors, dtype=float))
    n = X.shape[0]
    if n > RHO_CAP:
        raise CapExceeded(f"{n} vectors exceed the cap {RHO_CAP}")
    G = X @ X.T
    best = 0.0
    # ε and -ε agree, so the last coordinate is fixed to +1
    total = 1 << (n - 1)
    chunk = 1 << 14
    for start in range(0, total, chunk):
        stop = min(total, start + chunk)
        idx = np.arange(start, stop, dtype=np.int64)[:, None]
        E = 1.0 - 2.0 * ((idx >> np.arange(n, dtype=np.int64)) & 1)
        best = max(best, float(np.max(np.einsum("ri,ij,rj->r", E, G, E))))
    return float(np.sqrt(max(best, 0.0)))


# ---------------------------------------------------------------------------
# γ₂ of matrices with repeated rows and columns
# ---------------------------------------------------------------------------


def _signed_classes(M, axis):
    """Map every row (axis 0) or column (axis 1) to a representative up to sign."""
    V = M if axis == 0 else M.T
    reps, index, signs = [], np.zeros(len(V), dtype=int), np.ones(len(V))
    lookup = {}
    for i, v in enumerate(V):
        nz = np.flatnonzero(v)
        s = -1.0 if len(nz) and v[nz[0]] < 0 else 1.0
        key = (s * v).tobytes()
        if key not in lookup:
            lookup[key] = len(reps)
            reps.append(i)
        index[i] = lookup[key]
        signs[i] = s
    return np.array(reps), index, signs


def gamma2_signed_reduced(M, tol=None) -> NormCertificate:
    """γ₂(M), solved on ``M`` with rows/columns equal up to sign merged.

    Duplicating a row (or its negative) does not change γ₂, so the reduced
    program has the same value; its witness is expanded back to ``M``.
    """
    M = matcore.as_matrix(M)
    rr, ri, rs = _signed_classes(M, 0)
    cr, ci, cs = _signed_classes(M, 1)
    R = M[np.ix_(rr, cr)] * np.outer(rs[rr], cs[cr])
    cert = norms.gamma2(R) if tol is None else norms.gamma2(R, tol=tol)
    X = cert.witness["X"][np.ix_(ri, ri)] * np.outer(rs, rs)
    Y = cert.witness["Y"][np.ix_(ci, ci)] * np.outer(cs, cs)
    cert.witness = {"X": X, "Y": Y, "t": cert.witness["t"]}
    cert.meta["reduced_shape"] = list(R.shape)
    return cert


# ---------------------------------------------------------------------------
# witness transport
# ---------------------------------------------------------------------------


def _span_projector(V, rtol=1e-10):
    if V.size == 0:
        return np.zeros((V.shape[1], V.shape[1]))
    _, s, Wt = np.linalg.svd(V, full_matrices=False)
    keep = s > rtol * max(1.0, s[0] if len(s) else 0.0)
    B = Wt[keep]
    return B.T @ B


def _average(maps, n):
    E = sign_matrix(n)
    return ((E > 0).T.astype(float) @ maps) / (1 << (n - 1))


def witness_project(xmap, ymap, A=None, tol=TOL_MATCH) -> VectorFamilies:
    """Average sign-indexed maps down to families ``x_i, y_j``.

    ``x_i = 2^{1-n} Σ_{ε_i = 1} x(ε)``.  If the plain averages do not satisfy
    ``ρ(x) <= max_ε |x(ε)|`` (and likewise for ``y``), the maps are first
    projected onto each other's spans, which enforces the bound.
    """
    xmap = np.atleast_2d(np.asarray(xmap, dtype=float))
    ymap = np.atleast_2d(np.asarray(ymap, dtype=float))
    rows = xmap.shape[0]
    n = rows.bit_length() - 1
    if rows != 1 << n or ymap.shape[0] != rows or n < 1:
        raise ValueError("maps must have 2^n rows each")
    if xmap.shape[1] != ymap.shape[1]:
        raise ValueError("maps must live in the same space")
    if A is not None:
        F = fourier_lift(A).M
        err = np.max(np.abs(xmap @ ymap.T - F))
        if err > tol:
            raise ValueError(f"maps do not factor F(A) (error {err:.3g})")
    cx = float(np.max(np.linalg.norm(xmap, axis=1)))
    cy = float(np.max(np.linalg.norm(ymap, axis=1)))
    xs, ys = _average(xmap, n), _average(ymap, n)
    if rho(xs) <= cx + tol and rho(ys) <= cy + tol:
        return VectorFamilies(xs, ys)
    xp = xmap @ _span_projector(ymap)
    yp = ymap @ _span_projector(xp)
    return VectorFamilies(_average(xp, n), _average(yp, n))


def witness_lift(families: VectorFamilies, require_orthogonal=True, tol=TOL_MATCH):
    """Sign-indexed maps ``x̃(ε) = Σ ε_i x_i`` and ``ỹ(η) = Σ η_j y_j``.

    Returns ``(xmap, ymap, products)`` where ``products[ε, η] = |x̃(ε)| |ỹ(η)|``.
    """
    xs, ys = families.xs, families.ys
    if require_orthogonal:
        for V in (xs, ys):
            G = V @ V.T
            if np.max(np.abs(G - np.diag(np.diag(G))), initial=0.0) > tol:
                raise ValueError("witness_lift needs orthogonal families")
    n = xs.shape[0]
    if ys.shape[0] != n:
        raise ValueError("families must have equal length")
    E = sign_matrix(n)
    xm, ym = E @ xs, E @ ys
    prods = np.outer(np.linalg.norm(xm, axis=1), np.linalg.norm(ym, axis=1))
    return xm, ym, prods


def gamma2_of_lift(A, factorization: VectorFamilies | None = None) -> NormCertificate:
    """γ₂(F(A)) by SDP, plus the best ``ρ(x) ρ(y)`` bound from factorizations of A.

    Candidate factorizations: the one supplied, the orthogonal γ₂*(A) witness
    and the projection of the SDP witness itself.  ``meta["rho_bound_ok"]``
    records ``value <= best bound + TOL_MATCH``.
    """
    A = matcore.as_matrix(A)
    lift = fourier_lift(A)
    cert = gamma2_signed_reduced(lift.M)
    cert.norm_name = "gamma2_lift"
    bounds = {}
    if factorization is not None:
        bounds["supplied"] = rho(factorization.xs) * rho(factorization.ys)
    star = norms.gamma2_star(A)
    ortho = norms.orthogonal_witness(A, star)
    bounds["orthogonal"] = rho(ortho.xs) * rho(ortho.ys)
    W = np.block([[cert.witness["X"], lift.M], [lift.M.T, cert.witness["Y"]]])
    G = matcore.psd_factor(W)
    N = lift.M.shape[0]
    proj = witness_project(G[:, :N].T, G[:, N:].T)
    bounds["projected"] = rho(proj.xs) * rho(proj.ys)
    best = min(bounds.values())
    cert.meta.update(gamma2_star=star.value, rho_bounds=bounds, rho_bound=best,
                     rho_bound_ok=bool(cert.value <= best + TOL_MATCH))
    return cert


def rietz_check(xs, ys, tol=1e-8) -> dict:
    """Compare ``ρ(x_1⊗y_1, ..., x_n⊗y_n)`` with ``sqrt(π/2) ρ(x_1, ..., x_n)``."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    n = xs.shape[0]
    if n > RIETZ_CAP:
        raise CapExceeded(f"n = {n} exceeds the cap {RIETZ_CAP}")
    if ys.shape[0] != n:
        raise ValueError("need one y per x")
    if np.max(np.abs(np.linalg.norm(ys, axis=1) - 1)) > TOL_MATCH:
        raise ValueError("rietz_check needs unit vectors y_i")
    tensors = np.einsum("ia,ib->iab", xs, ys).reshape(n, -1)
    lhs = rho(tensors)
    rhs = np.sqrt(np.pi / 2) * rho(xs)
    return {"lhs": lhs, "rhs": float(rhs), "slack": float(rhs - lhs), "pass": bool(lhs <= rhs + tol)}


# ---------------------------------------------------------------------------
# sampling experiment
# ---------------------------------------------------------------------------


class SplitMix64:
    """The 64-bit SplitMix generator; used so sign draws are reproducible anywhere."""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def sign(self) -> int:
        return -1 if self.next() >> 63 else 1


def trial_stream(seed: int, trial: int) -> SplitMix64:
    """Generator for one trial: seeded with ``seed + (trial + 1) * 0xD1B54A32D192ED03``."""
    return SplitMix64((int(seed) + (trial + 1) * 0xD1B54A32D192ED03) & _MASK64)


def sample_signs(seed: int, trial: int, K: int, n: int) -> np.ndarray:
    g = trial_stream(seed, trial)
    return np.array([[g.sign() for _ in range(n)] for _ in range(K)], dtype=float)


def sampling_experiment(A, K: int, trials: int, seed: int, full_enumeration: bool = False) -> dict:
    """Statistics of ``γ₂([Σ A_kl ε_i,k ε_j,l]_ij) / ||A||_{∞→1}`` over sampled signs.

    With ``full_enumeration`` every sign vector is used once (``K = 2^n``), so
    the matrix is exactly F(A) and a single trial is run.
    """
    A = matcore.as_matrix(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("sampling_experiment needs a square matrix")
    if n > EXPERIMENT_N_CAP:
        raise CapExceeded(f"n = {n} exceeds the cap {EXPERIMENT_N_CAP}")
    if full_enumeration:
        K, trials = 1 << n, 1
    if not 1 <= K <= EXPERIMENT_K_CAP:
        raise CapExceeded(f"K = {K} outside 1..{EXPERIMENT_K_CAP}")
    if trials < 1:
        raise ValueError("trials must be positive")
    denom = matcore.pq_norm(A, np.inf, 1)
    degenerate = denom <= 0.0
    values, ratios = [], []
    for t in range(trials):
        E = sign_matrix(n) if full_enumeration else sample_signs(seed, t, K, n)
        M = E @ A @ E.T
        if np.all(M == 0):
            val = 0.0
        else:
            val = gamma2_signed_reduced(M).value
        values.append(val)
        ratios.append(None if degenerate else val / denom)
    report = {
        "n": n, "K": K, "trials": trials, "seed": int(seed),
        "full_enumeration": bool(full_enumeration),
        "generator": "splitmix64; trial state = seed + (trial+1)*0xD1B54A32D192ED03; "
                     "sign = -1 iff top bit set; row-major draws",
        "infty_to_one": denom,
        "degenerate_denominator": bool(degenerate),
        "gamma2_values": values,
        "ratios": ratios,
    }
    if degenerate:
        report["ratio_min"] = report["ratio_median"] = report["ratio_max"] = None
    else:
        report["ratio_min"] = min(ratios)
        report["ratio_median"] = statistics.median(ratios)
        report["ratio_max"] = max(ratios)
    return report
