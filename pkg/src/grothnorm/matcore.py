"""Dense real linear algebra and the elementary (non-SDP) matrix norms.

Matrices are plain ``numpy`` float arrays.  Everything here is a pure function
of its inputs.
"""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TOL_MATCH = 1e-6
PSD_TOL = 1e-8
SIGN_ENUM_CAP = 24

# rows of sign vectors handled per block during enumeration
_CHUNK_BITS = 14


class MatrixFormatError(ValueError):
    """Raised when a matrix text file cannot be parsed."""


class EnumerationCapError(ValueError):
    """Raised when a sign enumeration would exceed ``SIGN_ENUM_CAP``."""


class ConvergenceError(RuntimeError):
    pass


def as_matrix(A, name="A") -> np.ndarray:
    """Return ``A`` as a finite 2-d float array, raising ``ValueError`` otherwise."""
    M = np.array(A, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    elif M.ndim == 1:
        M = M.reshape(1, -1)
    if M.ndim != 2 or M.shape[0] == 0 or M.shape[1] == 0:
        raise ValueError(f"{name} must be a non-empty 2-d matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def is_symmetric(A, tol=TOL_MATCH) -> bool:
    A = np.asarray(A, dtype=float)
    return A.shape[0] == A.shape[1] and bool(np.max(np.abs(A - A.T), initial=0.0) <= tol)


def is_hollow(A, tol=TOL_MATCH) -> bool:
    A = np.asarray(A, dtype=float)
    return A.shape[0] == A.shape[1] and bool(np.max(np.abs(np.diag(A)), initial=0.0) <= tol)


def schur_product(A, B) -> np.ndarray:
    """Entrywise (Schur) product ``A ∘ B``."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    return A * B


# ---------------------------------------------------------------------------
# spectral kernel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralData:
    """Eigen- or singular-value data of a matrix.

    For ``kind == "eig"`` the input was symmetric and ``A = U diag(values) U^T``
    with values in descending order.  For ``kind == "svd"``,
    ``A = U diag(values) V^T`` with nonnegative descending values.
    """

    kind: str
    values: np.ndarray
    U: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.values) @ self.V.T


def _fix_signs(U: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of every column made positive
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def eigh_desc(A) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric eigendecomposition with eigenvalues in descending order."""
    A = np.asarray(A, dtype=float)
    w, U = np.linalg.eigh((A + A.T) / 2)
    return w[::-1], _fix_signs(U[:, ::-1])


def spectral(A, symmetric=None) -> SpectralData:
    """Eigendecomposition (symmetric input) or thin SVD (otherwise).

    The result is checked against its invariants; failure to reproduce the
    input to ``TOL_MATCH`` raises :class:`ConvergenceError` instead of
    returning a bad factorization.
    """
    A = as_matrix(A)
    if symmetric is None:
        symmetric = is_symmetric(A, tol=0.0)
    if symmetric:
        w, U = eigh_desc(A)
        data = SpectralData("eig", w, U, U)
    else:
        try:
            U, s, Vt = np.linalg.svd(A, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"SVD did not converge: {exc}") from exc
        data = SpectralData("svd", s, U, Vt.T)
    scale = max(1.0, float(np.max(np.abs(A))))
    err = np.max(np.abs(data.reconstruct() - A))
    orth = max(
        np.max(np.abs(data.U.T @ data.U - np.eye(data.U.shape[1])), initial=0.0),
        np.max(np.abs(data.V.T @ data.V - np.eye(data.V.shape[1])), initial=0.0),
    )
    if err > TOL_MATCH * scale or orth > TOL_MATCH:
        raise ConvergenceError(f"spectral factorization inaccurate (err={err:.3g}, orth={orth:.3g})")
    return data


def singular_values(A) -> np.ndarray:
    return np.linalg.svd(as_matrix(A), compute_uv=False)


def min_eigenvalue(A) -> float:
    A = np.asarray(A, dtype=float)
    return float(np.linalg.eigvalsh((A + A.T) / 2)[0])


def is_psd(A, tol=PSD_TOL) -> bool:
    """True iff ``λ_min(A) >= -tol * max(1, ||A||_{S,∞})``.

    Non-symmetric input is never positive semidefinite and returns False.
    """
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("is_psd needs a square matrix")
    scale = max(1.0, float(np.max(np.abs(A))))
    if not is_symmetric(A, tol=max(tol, 1e-12) * scale):
        return False
    w = np.linalg.eigvalsh((A + A.T) / 2)
    return bool(w[0] >= -tol * max(1.0, float(np.max(np.abs(w)))))


def psd_margin(A) -> float:
    """``λ_min(A) / max(1, ||A||)``; nonnegative iff ``A`` is psd."""
    A = np.asarray(A, dtype=float)
    w = np.linalg.eigvalsh((A + A.T) / 2)
    return float(w[0] / max(1.0, float(np.max(np.abs(w)))))


def psd_factor(M, clip=True) -> np.ndarray:
    """Return ``G`` with ``G^T G = M`` (columns of ``G`` are the Gram vectors).

    Negative eigenvalues are clipped to zero; the caller decides how much
    clipping it tolerates.
    """
    w, U = eigh_desc(M)
    if clip:
        w = np.maximum(w, 0.0)
    keep = w > 0
    return (U[:, keep] * np.sqrt(w[keep])).T


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def _parse_p(p):
    if p in (np.inf, "inf", "∞", float("inf")):
        return np.inf
    if p in (1, 2):
        return int(p)
    raise ValueError(f"unsupported exponent {p!r}; expected 1, 2 or inf")


def schatten_norm(A, p) -> float:
    """Schatten p-norm for ``p`` in {1, 2, inf}."""
    p = _parse_p(p)
    A = as_matrix(A)
    if p == 2:
        return float(np.sqrt(np.sum(A * A)))
    s = singular_values(A)
    return float(np.sum(s)) if p == 1 else float(s[0])


def sign_vectors(k: int, start=0, stop=None) -> np.ndarray:
    """Rows ``start..stop-1`` of the lexicographic enumeration of ``{±1}^k``.

    Row ``r`` has ``-1`` in coordinate ``i`` iff bit ``k-1-i`` of ``r`` is set,
    so row order is lexicographic with ``+1 < -1`` and row 0 is all ones.
    """
    if stop is None:
        stop = 1 << k
    r = np.arange(start, stop, dtype=np.int64)[:, None]
    bits = (r >> np.arange(k - 1, -1, -1, dtype=np.int64)) & 1
    return 1.0 - 2.0 * bits


def _enumerate_max(A: np.ndarray, q) -> tuple[float, np.ndarray]:
    """Max over ``ε ∈ {±1}^k`` of ``|Aε|_q``; ties go to the lexicographically first ε.

    Only ``ε_1 = +1`` is enumerated: ``ε`` and ``-ε`` give the same value and the
    positive one is lexicographically smaller.
    """
    k = A.shape[1]
    if k > SIGN_ENUM_CAP:
        raise EnumerationCapError(f"enumeration over {k} signs exceeds cap {SIGN_ENUM_CAP}")
    total = 1 << (k - 1)
    chunk = 1 << _CHUNK_BITS
    best, best_eps = -1.0, None
    for start in range(0, total, chunk):
        E = sign_vectors(k, start, min(total, start + chunk))
        AE = E @ A.T
        vals = np.sum(np.abs(AE), axis=1) if q == 1 else np.sqrt(np.sum(AE * AE, axis=1))
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, best_eps = float(vals[i]), E[i].copy()
    return best, best_eps


def max_sign_vector(A, q=1) -> tuple[float, np.ndarray]:
    """Return ``(max_ε |Aε|_q, maximizing ε)`` for ``q`` in {1, 2}."""
    return _enumerate_max(as_matrix(A), q)


def pq_norm(A, p, q) -> float:
    """Operator norm ``sup_{|x|_p <= 1} |Ax|_q`` for ``p, q`` in {1, 2, inf}."""
    p, q = _parse_p(p), _parse_p(q)
    A = as_matrix(A)
    absA = np.abs(A)
    if p == 1:
        if q == 1:
            return float(np.max(np.sum(absA, axis=0)))
        if q == 2:
            return float(np.max(np.sqrt(np.sum(A * A, axis=0))))
        return float(np.max(absA))
    if p == 2:
        if q == 2:
            return float(singular_values(A)[0])
        if q == np.inf:
            return float(np.max(np.sqrt(np.sum(A * A, axis=1))))
        # |A|_{2->1} = |A^T|_{inf->2}
        return _enumerate_max(A.T, 2)[0]
    if q == np.inf:
        return float(np.max(np.sum(absA, axis=1)))
    return _enumerate_max(A, 1 if q == 1 else 2)[0]


def infty_to_one_two_sided(A) -> float:
    """``max_{ε,η} |Σ A_ij ε_i η_j|`` by enumerating both sign vectors."""
    A = as_matrix(A)
    n, k = A.shape
    if n + k > SIGN_ENUM_CAP:
        raise EnumerationCapError("two-sided enumeration too large")
    best = 0.0
    for eps in itertools.product((1.0, -1.0), repeat=n):
        row = np.asarray(eps) @ A
        best = max(best, float(np.max(np.abs(sign_vectors(k) @ row))))
    return best


# ---------------------------------------------------------------------------
# matrix text format
# ---------------------------------------------------------------------------


def format_matrix(A, comments=()) -> str:
    A = as_matrix(A)
    out = io.StringIO()
    for c in comments:
        out.write(f"# {c}\n")
    out.write(f"{A.shape[0]} {A.shape[1]}\n")
    for row in A:
        out.write(" ".join(format(float(x), ".17g") for x in row) + "\n")
    return out.getvalue()


def parse_matrix(text: str) -> tuple[np.ndarray, list[str]]:
    """Parse the matrix text format; returns the matrix and its comment lines."""
    comments, lines = [], []
    for raw in text.splitlines():
        s = raw.strip()
        if not s:
            continue
        if s.startswith("#"):
            comments.append(s[1:].strip())
        else:
            lines.append(s)
    if not lines:
        raise MatrixFormatError("missing 'rows cols' header")
    try:
        rows, cols = (int(t) for t in lines[0].split())
    except ValueError as exc:
        raise MatrixFormatError(f"bad header line {lines[0]!r}") from exc
    if rows <= 0 or cols <= 0:
        raise MatrixFormatError("dimensions must be positive")
    body = lines[1:]
    if len(body) != rows:
        raise MatrixFormatError(f"expected {rows} rows, found {len(body)}")
    try:
        data = [[float(t) for t in line.split()] for line in body]
    except ValueError as exc:
        raise MatrixFormatError(f"non-numeric entry: {exc}") from exc
    if any(len(r) != cols for r in data):
        raise MatrixFormatError(f"every row must have {cols} entries")
    M = np.array(data, dtype=float)
    if not np.all(np.isfinite(M)):
        raise MatrixFormatError("non-finite entry")
    return M, comments


def read_matrix(path) -> tuple[np.ndarray, list[str]]:
    return parse_matrix(Path(path).read_text())


def write_matrix(path, A, comments=()) -> None:
    Path(path).write_text(format_matrix(A, comments))
