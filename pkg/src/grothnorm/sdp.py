"""Block-structured semidefinite programming.

The solver handles programs of the form::

    minimize    <C, X> + c_f . f
    subject to  <A_i, X> + F_i . f = b_i        i = 1..m
                X = diag(X_1, ..., X_B) psd,  f free

and their duals::

    maximize    b . y
    subject to  C - sum_i y_i A_i = Z psd,  F^T y = c_f.

Coefficient matrices are sparse symmetric: an entry ``(block, r, c, v)`` puts
``v`` at both ``(r, c)`` and ``(c, r)`` of that block.  The algorithm is an
infeasible primal-dual path-following method with the HKM direction and a
Mehrotra predictor-corrector step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import matcore

TOL_SDP = 1e-7
MAX_ITERS = 200
REG = 1e-12

OPTIMAL = "optimal"
INFEASIBLE = "infeasible-detected"
MAX_ITERATIONS = "max-iterations"


class SdpError(RuntimeError):
    """Base class for solver failures."""


class SdpBreakdown(SdpError):
    """The Newton system could not be factored; ``solution`` holds the last iterate."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


@dataclass
class Constraint:
    entries: list
    rhs: float
    free: dict = field(default_factory=dict)


def _merge_entries(entries, blocks):
    merged = {}
    for blk, r, c, v in entries:
        blk, r, c, v = int(blk), int(r), int(c), float(v)
        if not 0 <= blk < len(blocks):
            raise ValueError(f"block index {blk} out of range")
        d = blocks[blk]
        if not (0 <= r < d and 0 <= c < d):
            raise ValueError(f"entry ({r}, {c}) outside block {blk} of size {d}")
        if not np.isfinite(v):
            raise ValueError("non-finite coefficient")
        if r > c:
            r, c = c, r
        merged[(blk, r, c)] = merged.get((blk, r, c), 0.0) + v
    return [(b, r, c, v) for (b, r, c), v in sorted(merged.items()) if v != 0.0]


@dataclass
class SdpProblem:
    """A block SDP with equality constraints and free scalar variables."""

    blocks: list
    num_free: int = 0
    sense: str = "min"
    objective: list = field(default_factory=list)
    objective_free: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)

    def __post_init__(self):
        self.blocks = [int(b) for b in self.blocks]
        if not self.blocks or any(b <= 0 for b in self.blocks):
            raise ValueError("blocks must be positive dimensions")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")

    def set_objective(self, entries, free=None):
        self.objective = _merge_entries(entries, self.blocks)
        self.objective_free = self._check_free(free)

    def add_constraint(self, entries, rhs, free=None):
        if not np.isfinite(rhs):
            raise ValueError("non-finite right-hand side")
        con = Constraint(_merge_entries(entries, self.blocks), float(rhs), self._check_free(free))
        self.constraints.append(con)
        return len(self.constraints) - 1

    def _check_free(self, free):
        out = {}
        for k, v in (free or {}).items():
            if not 0 <= int(k) < self.num_free:
                raise ValueError(f"free variable index {k} out of range")
            if not np.isfinite(v):
                raise ValueError("non-finite coefficient")
            out[int(k)] = float(v)
        return out

    @property
    def dim(self) -> int:
        return sum(self.blocks)

    def to_dict(self) -> dict:
        return {
            "blocks": self.blocks,
            "num_free": self.num_free,
            "sense": self.sense,
            "objective": {"entries": [list(e) for e in self.objective],
                          "free": {str(k): v for k, v in self.objective_free.items()}},
            "constraints": [
                {"entries": [list(e) for e in c.entries], "rhs": c.rhs,
                 "free": {str(k): v for k, v in c.free.items()}}
                for c in self.constraints
            ],
        }

    @classmethod
    def from_dict(cls, d) -> "SdpProblem":
        prob = cls(d["blocks"], int(d.get("num_free", 0)), d.get("sense", "min"))
        obj = d.get("objective", {})
        prob.set_objective(obj.get("entries", []), {int(k): v for k, v in obj.get("free", {}).items()})
        for c in d.get("constraints", []):
            prob.add_constraint(c["entries"], c["rhs"], {int(k): v for k, v in c.get("free", {}).items()})
        return prob

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class SdpSolution:
    status: str
    primal_blocks: list
    free_values: np.ndarray
    dual_multipliers: np.ndarray
    dual_slack_blocks: list
    primal_value: float
    dual_value: float
    gap: float
    iterations: int
    primal_infeasibility: float = 0.0
    dual_infeasibility: float = 0.0

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "primal_blocks": [b.tolist() for b in self.primal_blocks],
            "free_values": self.free_values.tolist(),
            "dual_multipliers": self.dual_multipliers.tolist(),
            "dual_slack_blocks": [b.tolist() for b in self.dual_slack_blocks],
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "gap": self.gap,
            "iterations": self.iterations,
            "primal_infeasibility": self.primal_infeasibility,
            "dual_infeasibility": self.dual_infeasibility,
        }

    @classmethod
    def from_dict(cls, d) -> "SdpSolution":
        return cls(
            status=d["status"],
            primal_blocks=[np.array(b, dtype=float) for b in d["primal_blocks"]],
            free_values=np.array(d["free_values"], dtype=float),
            dual_multipliers=np.array(d["dual_multipliers"], dtype=float),
            dual_slack_blocks=[np.array(b, dtype=float) for b in d["dual_slack_blocks"]],
            primal_value=float(d["primal_value"]),
            dual_value=float(d["dual_value"]),
            gap=float(d["gap"]),
            iterations=int(d["iterations"]),
            primal_infeasibility=float(d.get("primal_infeasibility", 0.0)),
            dual_infeasibility=float(d.get("dual_infeasibility", 0.0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# ---------------------------------------------------------------------------
# assembled (single block-diagonal matrix) form
# ---------------------------------------------------------------------------


class _Assembled:
    """Problem data laid out over one block-diagonal matrix of order ``N``."""

    def __init__(self, prob: SdpProblem, negate: bool):
        self.offsets = np.concatenate([[0], np.cumsum(prob.blocks)]).astype(int)
        N = self.N = int(self.offsets[-1])
        m = self.m = len(prob.constraints)
        p = self.p = prob.num_free
        sign = -1.0 if negate else 1.0

        self.C = np.zeros((N, N))
        for blk, r, c, v in prob.objective:
            i, j = self.offsets[blk] + r, self.offsets[blk] + c
            self.C[i, j] = self.C[j, i] = sign * v
        self.cf = np.zeros(p)
        for k, v in prob.objective_free.items():
            self.cf[k] = sign * v

        self.b = np.array([c.rhs for c in prob.constraints], dtype=float)
        self.F = np.zeros((m, p))
        for i, c in enumerate(prob.constraints):
            for k, v in c.free.items():
                self.F[i, k] = v

        # full symmetric expansion: both (r, c) and (c, r) for off-diagonal entries
        con, rows, cols, vals = [], [], [], []
        # upper entries with diagonal values halved, for the four-term Schur formula
        upper = [[] for _ in range(m)]
        for i, c in enumerate(prob.constraints):
            for blk, r, cc, v in c.entries:
                gi, gj = self.offsets[blk] + r, self.offsets[blk] + cc
                con.append(i); rows.append(gi); cols.append(gj); vals.append(v)
                if gi != gj:
                    con.append(i); rows.append(gj); cols.append(gi); vals.append(v)
                    upper[i].append((gi, gj, v))
                else:
                    upper[i].append((gi, gj, v / 2))
        self.con = np.array(con, dtype=int)
        self.rows = np.array(rows, dtype=int)
        self.cols = np.array(cols, dtype=int)
        self.vals = np.array(vals, dtype=float)
        self.E = len(vals)
        L = max((len(u) for u in upper), default=0)
        self.slots = []
        for a in range(L):
            P = np.zeros(m, dtype=int)
            Q = np.zeros(m, dtype=int)
            V = np.zeros(m)
            for i, u in enumerate(upper):
                if a < len(u):
                    P[i], Q[i], V[i] = u[a]
            self.slots.append((P, Q, V))
        self.incidence = np.zeros((m, self.E))
        self.incidence[self.con, np.arange(self.E)] = 1.0
        self.coef_scale = max(
            1.0,
            float(np.max(np.abs(self.C), initial=0.0)),
            float(np.max(np.abs(self.b), initial=0.0)),
            float(np.max(np.abs(self.vals), initial=0.0)),
            float(np.max(np.abs(self.F), initial=0.0)),
            float(np.max(np.abs(self.cf), initial=0.0)),
        )

    def A(self, X):
        if self.m == 0:
            return np.zeros(0)
        return np.bincount(self.con, weights=self.vals * X[self.rows, self.cols], minlength=self.m)

    def At(self, y):
        out = np.zeros((self.N, self.N))
        if self.m:
            np.add.at(out, (self.rows, self.cols), y[self.con] * self.vals)
        return out

    def schur(self, X, Zi):
        """``M_ij = tr(A_i X A_j Z^{-1})``."""
        m = self.m
        if self.E <= 4000:
            r, c, v = self.rows, self.cols, self.vals
            K = np.outer(v, v) * X[np.ix_(c, r)] * Zi[np.ix_(r, c)]
            M = self.incidence @ K @ self.incidence.T
        else:
            M = np.zeros((m, m))
            for Pa, Qa, Va in self.slots:
                for Pb, Qb, Vb in self.slots:
                    t = (X[np.ix_(Qa, Pb)] * Zi[np.ix_(Pa, Qb)]
                         + X[np.ix_(Qa, Qb)] * Zi[np.ix_(Pa, Pb)]
                         + X[np.ix_(Pa, Pb)] * Zi[np.ix_(Qa, Qb)]
                         + X[np.ix_(Pa, Qb)] * Zi[np.ix_(Qa, Pb)])
                    M += np.outer(Va, Vb) * t
        return (M + M.T) / 2

    def split(self, X):
        o = self.offsets
        return [X[o[k]:o[k + 1], o[k]:o[k + 1]].copy() for k in range(len(o) - 1)]


def _sym(M):
    return (M + M.T) / 2


def _is_definite(X):
    try:
        np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return False
    return True


def _max_step(X, dX):
    """Largest ``α`` with ``X + α dX`` psd (``inf`` if unbounded)."""
    L = np.linalg.cholesky(X)
    Li = scipy.linalg.solve_triangular(L, np.eye(len(X)), lower=True)
    lam = np.linalg.eigvalsh(_sym(Li @ dX @ Li.T))[0]
    # denormal negative eigenvalues would overflow the reciprocal
    return np.inf if lam >= -1e-300 else -1.0 / lam


class _NewtonSystem:
    REFINE_STEPS = 4

    def __init__(self, M, F):
        self.M = M
        self.F = F
        scale = max(1.0, float(np.max(np.diag(M)))) if len(M) else 1.0
        reg = REG * scale
        for _ in range(8):
            try:
                self.cho = scipy.linalg.cho_factor(M + reg * np.eye(len(M)), lower=True)
                break
            except np.linalg.LinAlgError:
                reg *= 100
        else:
            raise np.linalg.LinAlgError("Schur complement not positive definite")
        if F.shape[1]:
            self.MiF = scipy.linalg.cho_solve(self.cho, F)
            S = F.T @ self.MiF
            self.S = scipy.linalg.lu_factor(S + REG * max(1.0, np.max(np.abs(S))) * np.eye(len(S)))

    def solve(self, r1, rf):
        """Solve ``M dy + F df = r1``, ``F^T dy = rf`` with iterative refinement."""
        dy, df = self._solve_reg(r1, rf)
        scale = np.linalg.norm(r1) + np.linalg.norm(rf)
        for _ in range(self.REFINE_STEPS):
            e1 = r1 - self.M @ dy - self.F @ df
            ef = rf - self.F.T @ dy
            if np.linalg.norm(e1) + np.linalg.norm(ef) <= 1e-14 * scale:
                break
            cy, cf = self._solve_reg(e1, ef)
            dy, df = dy + cy, df + cf
        return dy, df

    def _solve_reg(self, r1, rf):
        Mir = scipy.linalg.cho_solve(self.cho, r1)
        if self.F.shape[1] == 0:
            return Mir, np.zeros(0)
        df = scipy.linalg.lu_solve(self.S, self.F.T @ Mir - rf)
        dy = Mir - self.MiF @ df
        return dy, df


def solve(problem: SdpProblem, tol: float = TOL_SDP, max_iters: int = MAX_ITERS) -> SdpSolution:
    """Solve ``problem`` by a primal-dual interior point method.

    Returns an :class:`SdpSolution` whose values are reported in the user's
    sense (maximization problems are negated internally).  Raises
    :class:`SdpBreakdown` when the Newton system cannot be factored and the
    current iterate is not already within tolerance.
    """
    negate = problem.sense == "max"
    P = _Assembled(problem, negate)
    N, m = P.N, P.m
    tau = 1.0 + P.coef_scale
    X = tau * np.eye(N)
    Z = tau * np.eye(N)
    y = np.zeros(m)
    f = np.zeros(P.p)
    normb = 1.0 + np.linalg.norm(P.b)
    normC = 1.0 + np.linalg.norm(P.C) + np.linalg.norm(P.cf)
    blockmask = np.zeros((N, N), dtype=bool)
    for k in range(len(problem.blocks)):
        o0, o1 = P.offsets[k], P.offsets[k + 1]
        blockmask[o0:o1, o0:o1] = True

    status = MAX_ITERATIONS
    it = 0
    best = None

    def measures(X, y, Z, f):
        rp = P.b - P.A(X) - P.F @ f
        Rd = P.C - P.At(y) - Z
        rf = P.cf - P.F.T @ y
        pobj = float(np.sum(P.C * X) + P.cf @ f)
        dobj = float(P.b @ y)
        pinf = np.linalg.norm(rp) / normb
        dinf = (np.linalg.norm(Rd) + np.linalg.norm(rf)) / normC
        gap = abs(pobj - dobj) / (1.0 + abs(pobj))
        return rp, Rd, rf, pobj, dobj, pinf, dinf, gap

    def pack(status, X, y, Z, f, pobj, dobj, gap, pinf, dinf, it):
        s = -1.0 if negate else 1.0
        return SdpSolution(
            status=status,
            primal_blocks=P.split(X),
            free_values=f.copy(),
            dual_multipliers=s * y,
            dual_slack_blocks=P.split(Z),
            primal_value=s * pobj,
            dual_value=s * dobj,
            gap=gap,
            iterations=it,
            primal_infeasibility=float(pinf),
            dual_infeasibility=float(dinf),
        )

    for it in range(max_iters + 1):
        rp, Rd, rf, pobj, dobj, pinf, dinf, gap = measures(X, y, Z, f)
        score = max(pinf, dinf, gap)
        if best is None or score < best[0]:
            best = (score, X.copy(), y.copy(), Z.copy(), f.copy(), pobj, dobj, gap, pinf, dinf, it)
        if pinf <= tol and dinf <= tol and gap <= tol:
            status = OPTIMAL
            break
        if np.linalg.norm(y) > 1e12 * normC or np.linalg.norm(X) > 1e12 * normb:
            status = INFEASIBLE
            break
        if it == max_iters:
            break

        mu = float(np.sum(X * Z)) / N
        try:
            Lz = np.linalg.cholesky(Z)
            Lzi = scipy.linalg.solve_triangular(Lz, np.eye(N), lower=True)
            Zi = Lzi.T @ Lzi
            Zi = np.where(blockmask, _sym(Zi), 0.0)
            system = _NewtonSystem(P.schur(X, Zi), P.F)
        except np.linalg.LinAlgError as exc:
            score, *rest = best
            sol = pack(MAX_ITERATIONS, *rest)
            if score <= 10 * tol:
                return sol
            raise SdpBreakdown(f"Newton system breakdown at iteration {it}: {exc}", sol) from exc

        XRdZi = _sym(X @ Rd @ Zi)

        def direction(Rc):
            r1 = rp - P.A(Rc)
            dy, df = system.solve(r1, rf)
            dZ = Rd - P.At(dy)
            dX = Rc + _sym(X @ P.At(dy) @ Zi)
            return dX, dy, dZ, df

        # predictor
        Rc = -X - XRdZi
        dXa, dya, dZa, dfa = direction(Rc)
        try:
            ap = min(1.0, _max_step(X, dXa))
            ad = min(1.0, _max_step(Z, dZa))
        except np.linalg.LinAlgError:
            ap = ad = 0.0
        mu_aff = float(np.sum((X + ap * dXa) * (Z + ad * dZa))) / N
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        # corrector
        Rc = sigma * mu * Zi - X - XRdZi - _sym(dXa @ dZa @ Zi)
        dX, dy, dZ, df = direction(Rc)
        try:
            ap = _max_step(X, dX)
            ad = _max_step(Z, dZ)
        except np.linalg.LinAlgError:
            ap = ad = 0.0
        gamma = 0.9 + 0.09 * min(1.0, ap, ad)
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        if ap < 1e-12 and ad < 1e-12:
            break
        # roundoff can put a full step on the boundary; back off until both stay definite
        for _ in range(30):
            Xn, Zn = _sym(X + ap * dX), _sym(Z + ad * dZ)
            if _is_definite(Xn) and _is_definite(Zn):
                break
            ap, ad = 0.8 * ap, 0.8 * ad
        else:
            break
        X, Z = Xn, Zn
        f = f + ap * df
        y = y + ad * dy

    if status == OPTIMAL or status == INFEASIBLE:
        rp, Rd, rf, pobj, dobj, pinf, dinf, gap = measures(X, y, Z, f)
        return pack(status, X, y, Z, f, pobj, dobj, gap, pinf, dinf, it)
    _, *rest = best
    return pack(MAX_ITERATIONS, *rest)


# ---------------------------------------------------------------------------
# independent certificate check
# ---------------------------------------------------------------------------


def _dense_blocks(problem, entries):
    mats = [np.zeros((d, d)) for d in problem.blocks]
    for blk, r, c, v in entries:
        mats[blk][r, c] = v
        mats[blk][c, r] = v
    return mats


def check_certificate(problem: SdpProblem, solution: SdpSolution, tol: float = TOL_SDP) -> dict:
    """Recompute residuals, psd margins and the duality gap of ``solution``.

    Returns a report ``{"checks": {name: {"value", "limit", "pass"}}, "pass"}``.
    Nothing from the solver's internal state is reused.
    """
    checks = {}
    Xs = [np.asarray(b, dtype=float) for b in solution.primal_blocks]
    f = np.asarray(solution.free_values, dtype=float)
    y = np.asarray(solution.dual_multipliers, dtype=float)
    shapes_ok = (len(Xs) == len(problem.blocks)
                 and all(X.shape == (d, d) for X, d in zip(Xs, problem.blocks))
                 and f.shape == (problem.num_free,) and y.shape == (len(problem.constraints),))
    if not shapes_ok:
        return {"checks": {"shapes": {"value": 0.0, "limit": 0.0, "pass": False}}, "pass": False}

    worst = 0.0
    for c in problem.constraints:
        lhs = sum(v * (Xs[b][r, cc] if r == cc else 2 * Xs[b][r, cc]) for b, r, cc, v in c.entries)
        lhs += sum(v * f[k] for k, v in c.free.items())
        worst = max(worst, abs(lhs - c.rhs) / (1.0 + abs(c.rhs)))
    checks["primal_residual"] = {"value": worst, "limit": tol, "pass": worst <= tol}

    margin = min(matcore.psd_margin(X) for X in Xs)
    checks["primal_psd_margin"] = {"value": margin, "limit": -matcore.PSD_TOL,
                                   "pass": margin >= -matcore.PSD_TOL}

    C = _dense_blocks(problem, problem.objective)
    cf = np.zeros(problem.num_free)
    for k, v in problem.objective_free.items():
        cf[k] = v
    pobj = sum(float(np.sum(Ck * X)) for Ck, X in zip(C, Xs)) + float(cf @ f)
    dobj = float(sum(c.rhs * yi for c, yi in zip(problem.constraints, y)))

    # dual slack Z = C - sum y_i A_i (for max problems: sum y_i A_i - C)
    S = [Ck.copy() for Ck in C]
    for c, yi in zip(problem.constraints, y):
        for b, r, cc, v in c.entries:
            S[b][r, cc] -= yi * v
            if r != cc:
                S[b][cc, r] -= yi * v
    if problem.sense == "max":
        S = [-s for s in S]
    dmargin = min(matcore.psd_margin(s) for s in S)
    dlimit = -10 * tol
    checks["dual_psd_margin"] = {"value": dmargin, "limit": dlimit, "pass": dmargin >= dlimit}
    Fty = np.zeros(problem.num_free)
    for c, yi in zip(problem.constraints, y):
        for k, v in c.free.items():
            Fty[k] += yi * v
    fres = float(np.max(np.abs(Fty - cf), initial=0.0)) / (1.0 + float(np.max(np.abs(cf), initial=0.0)))
    checks["dual_free_residual"] = {"value": fres, "limit": tol, "pass": fres <= tol}

    gap = abs(pobj - dobj) / (1.0 + abs(pobj))
    checks["gap"] = {"value": gap, "limit": tol, "pass": gap <= tol}
    vmatch = abs(pobj - solution.primal_value) / (1.0 + abs(pobj))
    checks["reported_value"] = {"value": vmatch, "limit": tol, "pass": vmatch <= tol}
    for c in checks.values():
        c["value"], c["pass"] = float(c["value"]), bool(c["pass"])
    return {"checks": checks, "pass": all(c["pass"] for c in checks.values()),
            "primal_value": pobj, "dual_value": dobj}
