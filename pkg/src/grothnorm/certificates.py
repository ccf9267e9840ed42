"""Norm certificates and vector-family witnesses, with solver-free checkers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .matcore import TOL_MATCH


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


@dataclass
class NormCertificate:
    """A norm value together with a typed witness.

    ``witness_kind`` is one of ``BlockPair``, ``DiagonalPair``,
    ``CorrelationDiagonal``, ``SymmetricGram``, ``TracePair``.  The payload
    holds plain arrays; :func:`verify` re-checks it against the input matrix
    without calling the solver.
    """

    norm_name: str
    value: float
    witness_kind: str
    witness: dict
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "norm": self.norm_name,
            "value": float(self.value),
            "witness": {"kind": self.witness_kind, "payload": _jsonable(self.witness)},
            "meta": _jsonable(self.meta),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d) -> "NormCertificate":
        payload = {k: (np.array(v, dtype=float) if isinstance(v, list) else v)
                   for k, v in d["witness"]["payload"].items()}
        return cls(d["norm"], float(d["value"]), d["witness"]["kind"], payload, dict(d.get("meta", {})))


@dataclass
class VectorFamilies:
    """Rows of ``xs`` and ``ys`` are the vectors ``x_i`` and ``y_j``."""

    xs: np.ndarray
    ys: np.ndarray
    orthogonal: bool = False
    offdiag_only: bool = False

    @property
    def gram(self) -> np.ndarray:
        return self.xs @ self.ys.T

    @property
    def ambient_dim(self) -> int:
        return self.xs.shape[1]

    def to_dict(self) -> dict:
        return {"xs": self.xs.tolist(), "ys": self.ys.tolist(),
                "orthogonal": self.orthogonal, "offdiag_only": self.offdiag_only}


@dataclass
class ContractionDecomposition:
    alpha: np.ndarray
    beta: np.ndarray
    X: np.ndarray


@dataclass
class SchurDecomposition:
    B: np.ndarray
    C: np.ndarray


def _check(value, limit, ok):
    return {"value": float(value), "limit": float(limit), "pass": bool(ok)}


def _report(checks):
    return {"checks": checks, "pass": all(c["pass"] for c in checks.values())}


def verify_families(fam: VectorFamilies, A, tol=TOL_MATCH) -> dict:
    A = matcore.as_matrix(A)
    G = fam.gram
    checks = {}
    diff = np.abs(G - A)
    if fam.offdiag_only:
        diff = diff * (1 - np.eye(len(A)))
    checks["gram"] = _check(np.max(diff), tol, np.max(diff) <= tol)
    if fam.orthogonal:
        for name, V in (("xs_orthogonal", fam.xs), ("ys_orthogonal", fam.ys)):
            off = np.abs(V @ V.T - np.diag(np.sum(V * V, axis=1)))
            checks[name] = _check(np.max(off, initial=0.0), tol, np.max(off, initial=0.0) <= tol)
    return _report(checks)


def verify_contraction(dec: ContractionDecomposition, A, value, tol=TOL_MATCH) -> dict:
    A = matcore.as_matrix(A)
    op = matcore.schatten_norm(dec.X, np.inf)
    recon = np.max(np.abs(np.outer(dec.alpha, dec.beta) * dec.X - A))
    prod = np.linalg.norm(dec.alpha) * np.linalg.norm(dec.beta)
    return _report({
        "contraction": _check(op, 1 + tol, op <= 1 + tol),
        "reconstruction": _check(recon, tol, recon <= tol),
        "value": _check(abs(prod - value), tol, abs(prod - value) <= tol),
    })


def verify_schur(dec: SchurDecomposition, A, value, tol=TOL_MATCH) -> dict:
    A = matcore.as_matrix(A)
    recon = np.max(np.abs(dec.B * dec.C - A))
    op = matcore.schatten_norm(dec.C, np.inf)
    tr = matcore.schatten_norm(dec.B, 1)
    return _report({
        "reconstruction": _check(recon, tol, recon <= tol),
        "contraction": _check(op, 1 + tol, op <= 1 + tol),
        "trace_norm": _check(abs(tr - value), tol, abs(tr - value) <= tol),
    })


def _psd_check(M, name, checks):
    margin = matcore.psd_margin(M)
    checks[name] = _check(margin, -matcore.PSD_TOL, margin >= -matcore.PSD_TOL)


def verify(cert: NormCertificate, A, tol=TOL_MATCH) -> dict:
    """Re-verify ``cert`` for input ``A`` using dense linear algebra only."""
    A = matcore.as_matrix(A)
    w = cert.witness
    kind = cert.witness_kind
    checks = {}
    value = float(cert.value)
    if kind in ("BlockPair", "DiagonalPair", "TracePair"):
        X, Y = np.asarray(w["X"], float), np.asarray(w["Y"], float)
        n, k = A.shape
        shape_ok = X.shape == (n, n) and Y.shape == (k, k)
        checks["shape"] = _check(0, 0, shape_ok)
        if not shape_ok:
            return _report(checks)
        _psd_check(np.block([[X, A], [A.T, Y]]), "block_psd", checks)
        if kind == "BlockPair":
            t = float(w["t"])
            dev = max(np.max(np.abs(np.diag(X) - t)), np.max(np.abs(np.diag(Y) - t)))
            checks["diagonal_equals_t"] = _check(dev, tol, dev <= tol)
            obj = t
        else:
            if kind == "DiagonalPair":
                off = max(np.max(np.abs(X - np.diag(np.diag(X)))), np.max(np.abs(Y - np.diag(np.diag(Y)))))
                checks["diagonal"] = _check(off, tol, off <= tol)
            obj = (np.trace(X) + np.trace(Y)) / 2
        checks["objective"] = _check(abs(obj - value), tol, abs(obj - value) <= tol)
    elif kind == "CorrelationDiagonal":
        n = A.shape[0]
        if "D" in w:
            D = np.diag(np.asarray(w["D"], float).ravel())
            if cert.norm_name == "corrproblem":
                _psd_check(D + A, "D_plus_A_psd", checks)
            else:
                _psd_check(D - A, "D_minus_A_psd", checks)
                _psd_check(D + A, "D_plus_A_psd", checks)
            obj = np.trace(D)
        else:
            D1 = np.diag(np.asarray(w["D1"], float).ravel())
            D2 = np.diag(np.asarray(w["D2"], float).ravel())
            _psd_check(D1 - A, "D1_minus_A_psd", checks)
            _psd_check(A + D2, "A_plus_D2_psd", checks)
            low = min(np.min(np.diag(D1)), np.min(np.diag(D2)))
            checks["diagonals_nonnegative"] = _check(low, 0.0, low >= 0)
            obj = (np.trace(D1) + np.trace(D2)) / 2
        checks["shape"] = _check(0, 0, D.shape == (n, n) if "D" in w else D1.shape == (n, n))
        checks["objective"] = _check(abs(obj - value), tol, abs(obj - value) <= tol)
    elif kind == "SymmetricGram":
        n = A.shape[0]
        X = np.asarray(w["X"], float)
        D = np.diag(np.asarray(w["D"], float).ravel())
        _psd_check(X, "gram_psd", checks)
        cons = np.max(np.abs(np.diag(X)[:n] + np.diag(X)[n:] - 1))
        checks["unit_constraints"] = _check(cons, tol, cons <= tol)
        J = np.block([[A, np.zeros_like(A)], [np.zeros_like(A), -A]])
        lower = float(np.sum(J * X))
        _psd_check(D - A, "D_minus_A_psd", checks)
        _psd_check(D + A, "D_plus_A_psd", checks)
        upper = float(np.trace(D))
        checks["objective"] = _check(abs(lower - value), tol, abs(lower - value) <= tol)
        checks["duality_gap"] = _check(upper - lower, tol * (1 + abs(value)),
                                       -tol <= upper - lower <= tol * (1 + abs(value)))
    else:
        raise ValueError(f"unknown witness kind {kind!r}")
    return _report(checks)
