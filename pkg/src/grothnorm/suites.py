"""Seeded property suites: random instances, pass counts and worst slacks.

Each suite draws trial ``t`` from ``numpy.random.default_rng([seed, t])`` so a
failing instance can be replayed from ``(seed, t)`` alone.
"""

from __future__ import annotations

import numpy as np

from . import fourier, matcore, ncmaps, norms, sdp
from .certificates import verify, verify_contraction, verify_families

PROP_TOL = 1e-5


class Tally:
    """Per-property pass counts; a property passes when its slack is >= 0."""

    def __init__(self):
        self.props = {}
        self.failures = []

    def record(self, name, slack, trial, instance):
        entry = self.props.setdefault(name, {"passes": 0, "trials": 0, "worst_slack": None})
        entry["trials"] += 1
        slack = float(slack)
        if entry["worst_slack"] is None or slack < entry["worst_slack"]:
            entry["worst_slack"] = slack
        if slack >= 0:
            entry["passes"] += 1
        else:
            self.failures.append({"property": name, "trial": trial, "slack": slack,
                                  "instance": {k: np.asarray(v).tolist() for k, v in instance.items()}})

    def le(self, name, lhs, rhs, tol, trial, instance):
        self.record(name, rhs + tol - lhs, trial, instance)

    def close(self, name, a, b, tol, trial, instance):
        self.record(name, tol - abs(a - b), trial, instance)

    def ok(self, name, report, trial, instance):
        self.record(name, 0.0 if report["pass"] else -1.0, trial, instance)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"properties": self.props, "failures": self.failures, "pass": self.passed}


def _rel(value, tol=PROP_TOL):
    return tol * (1 + abs(value))


def grothendieck(n, trials, seed, tol=sdp.TOL_SDP) -> Tally:
    tally = Tally()
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        A = rng.standard_normal((n, n))
        inst = {"A": A}
        lower = matcore.pq_norm(A, np.inf, 1)
        cert = norms.gamma2_star(A, tol)
        g = cert.value
        tally.le("infty1_le_gamma2star", lower, g, _rel(g), t, inst)
        tally.le("gamma2star_le_1.8_infty1", g, 1.8 * lower, _rel(g), t, inst)
        tally.ok("certificate_verifies", verify(cert, A, PROP_TOL), t, inst)
        fam = norms.orthogonal_witness(A, cert)
        tally.ok("orthogonal_witness", verify_families(fam, A, PROP_TOL), t, inst)
        energy = (np.sum(fam.xs ** 2) + np.sum(fam.ys ** 2)) / 2
        tally.close("witness_energy", energy, g, _rel(g), t, inst)
        dec = norms.contraction_decomp(fam)
        tally.ok("contraction_decomposition", verify_contraction(dec, A, g, _rel(g)), t, inst)
    return tally


def duality(n, trials, seed, tol=sdp.TOL_SDP) -> Tally:
    tally = Tally()
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, n))
        inst = {"A": A, "B": B}
        ga = norms.gamma2(A, tol)
        gsa = norms.gamma2_star(A, tol)
        gb = norms.gamma2(B, tol)
        tally.ok("gamma2_certificate", verify(ga, A, PROP_TOL), t, inst)
        tally.ok("gamma2star_certificate", verify(gsa, A, PROP_TOL), t, inst)
        pairing = float(np.sum(A * B))
        tally.le("pairing_le_gamma2star_times_gamma2", abs(pairing), gsa.value * gb.value,
                 _rel(gsa.value * gb.value), t, inst)
        tally.le("gamma2_le_gamma2star", ga.value, gsa.value, _rel(gsa.value), t, inst)
        for name, prob in (("gamma2_program", norms.gamma2_program(A)),
                           ("gamma2star_program", norms.gamma2_star_program(A))):
            sol = sdp.solve(prob, tol=tol)
            tally.ok(f"{name}_strong_duality", sdp.check_certificate(prob, sol, 10 * tol), t, inst)
    return tally


def correlation(n, trials, seed, tol=sdp.TOL_SDP) -> Tally:
    tally = Tally()
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        G = rng.standard_normal((n, n))
        A = (G + G.T) / 2
        H = A - np.diag(np.diag(A))
        inst = {"A": A}
        c = norms.corr_norm_C(A, tol)
        g = norms.gamma2_star(A, tol)
        tally.close("corrC_equals_gamma2star", c.value, g.value, _rel(g.value), t, inst)
        sym = norms.gamma2_star_symmetric_primal(A, tol)
        tally.close("symmetric_primal_equals_dual", sym.value, sym.meta["upper_bound"],
                    _rel(sym.value), t, inst)
        tally.ok("corrC_certificate", verify(c, A, PROP_TOL), t, inst)
        cp = norms.corr_norm_Cprime(A, tol)
        tally.ok("corrCprime_certificate", verify(cp, A, PROP_TOL), t, inst)
        tally.le("Cprime_le_C", cp.value, c.value, _rel(c.value), t, inst)
        tally.le("C_le_2_Cprime", c.value, 2 * cp.value, _rel(c.value), t, inst)
        cp_h = norms.corr_norm_Cprime(H, tol)
        fam = norms.cprime_witness_from_certificate(H, cp_h)
        tally.ok("cprime_orthogonal_witness", verify_families(fam, H, PROP_TOL), t, inst)
        cor = norms.corr_problem(H, tol)
        c_h = norms.corr_norm_C(H, tol)
        tally.le("corrproblem_le_corrC", cor.value, c_h.value, _rel(c_h.value), t, inst)
        tally.ok("corrproblem_certificate", verify(cor, H, PROP_TOL), t, inst)
    return tally


def fourier_suite(n, trials, seed, tol=sdp.TOL_SDP) -> Tally:
    if n > fourier.LIFT_CAP:
        raise fourier.CapExceeded(f"n = {n} exceeds the lift cap {fourier.LIFT_CAP}")
    tally = Tally()
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        A = rng.standard_normal((n, n))
        inst = {"A": A}
        lift = fourier.fourier_lift(A)
        lower = matcore.pq_norm(A, np.inf, 1)
        tally.close("lift_one_to_infty", matcore.pq_norm(lift.M, 1, np.inf), lower,
                    1e-12 * (1 + lower), t, inst)
        tally.ok("lift_symmetries", {"pass": lift.check_symmetries(1e-12 * (1 + lower))}, t, inst)
        gf = fourier.gamma2_of_lift(A)
        gs = gf.meta["gamma2_star"]
        tally.le("lift_le_gamma2star", gf.value, gs, _rel(gs), t, inst)
        tally.le("gamma2star_le_half_pi_lift", gs, np.pi / 2 * gf.value, _rel(gs), t, inst)
        tally.le("infty1_le_lift", lower, gf.value, _rel(lower), t, inst)
        tally.ok("rho_bound", {"pass": gf.meta["rho_bound_ok"]}, t, inst)
        tally.ok("lift_certificate", verify(gf, lift.M, PROP_TOL), t, inst)
        Gm = rng.standard_normal((n, n))
        P = Gm @ Gm.T
        pinst = {"P": P}
        gp = fourier.gamma2_signed_reduced(fourier.fourier_lift(P).M, tol).value
        lp = matcore.pq_norm(P, np.inf, 1)
        tally.close("psd_lift_equals_infty1", gp, lp, _rel(lp), t, pinst)
    return tally


def rietz(n, trials, seed, tol=sdp.TOL_SDP) -> Tally:
    tally = Tally()
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        xs = rng.standard_normal((n, n))
        ys = rng.standard_normal((n, n))
        ys /= np.linalg.norm(ys, axis=1)[:, None]
        inst = {"xs": xs, "ys": ys}
        rep = fourier.rietz_check(xs, ys)
        tally.le("rietz_bound", rep["lhs"], rep["rhs"], 1e-8, t, inst)
        tally.close("rho_squared_is_gram_infty1", fourier.rho(xs) ** 2,
                    matcore.pq_norm(xs @ xs.T, np.inf, 1), 1e-9 * (1 + np.sum(xs ** 2)), t, inst)
    return tally


def ncmaps_suite(n, trials, seed, tol=sdp.TOL_SDP) -> Tally:
    tally = Tally()
    sdp_path = n <= ncmaps.CS1_SDP_CAP
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        S = rng.standard_normal((n * n, n * n))
        phi = ncmaps.MatrixMap(n, (S + S.T) / 2)
        inst = {"choi": phi.choi}
        cert = ncmaps.cs1_norm(phi, cross_check=sdp_path)
        v = cert.value
        if sdp_path:
            tally.close("cs1_sdp_equals_spectral", cert.meta["sdp_value"], v, _rel(v), t, inst)
        tally.ok("cs1_certificate", verify(cert, phi.choi, PROP_TOL), t, inst)
        tally.le("expectation_lower_bound", ncmaps.lower_bound_cs1(phi), v, matcore.TOL_MATCH, t, inst)
        est = ncmaps.op_to_trace_estimate(phi, iters=50, seed=seed + t, starts=4)
        tally.le("op_to_trace_le_cs1", est["lower_bound"], v, matcore.TOL_MATCH, t, inst)
        X, Y = rng.standard_normal((2, n, n))
        adj = ncmaps.adjoint(phi)
        lhs = np.trace(ncmaps.apply(phi, X) @ Y)
        rhs = np.trace(X @ ncmaps.apply(adj, Y))
        tally.close("adjoint_trace_identity", lhs, rhs, matcore.TOL_MATCH, t, inst)
        A = rng.standard_normal((n, n))
        sm = ncmaps.schur_map(A)
        tally.close("schur_multiplier_equality", ncmaps.lower_bound_cs1(sm),
                    ncmaps.cs1_norm(sm, cross_check=False).value, _rel(v), t, {"A": A})
        Vs = rng.standard_normal((3, n, n))
        small = ncmaps.conjugation_map(Vs[0])
        big = ncmaps.MatrixMap(n, small.choi + ncmaps.conjugation_map(Vs[1]).choi
                               + ncmaps.conjugation_map(Vs[2]).choi)
        diff = ncmaps.conditional_expectation(big) - ncmaps.conditional_expectation(small)
        tally.record("expectation_monotone", matcore.psd_margin(diff) + matcore.PSD_TOL * (1 + np.max(np.abs(diff))),
                     t, {"V": Vs})
    for m in range(1, min(n, ncmaps.CLIFFORD_CAP) + 1):
        rng = np.random.default_rng([seed, trials + m])
        xi = rng.standard_normal((n, m))
        eta = rng.standard_normal((n, m))
        xi /= np.linalg.norm(xi, axis=1)[:, None]
        eta /= np.linalg.norm(eta, axis=1)[:, None]
        _, _, pairing = ncmaps.clifford_witness(xi, eta)
        err = np.max(np.abs(pairing - xi @ eta.T))
        tally.record("clifford_pairing", 1e-10 - err, m, {"xi": xi, "eta": eta})
        tally.ok("clifford_generators", ncmaps.check_clifford(ncmaps.clifford_system(m)), m, {})
    return tally


def solver(n, trials, seed, tol=sdp.TOL_SDP) -> Tally:
    tally = Tally()
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        G = rng.standard_normal((n, n))
        A = (G + G.T) / 2
        inst = {"A": A}
        for name, prob in (("gamma2", norms.gamma2_program(G)),
                           ("gamma2star", norms.gamma2_star_program(G)),
                           ("corrC", norms.corr_C_program(A)),
                           ("corrCprime", norms.corr_Cprime_program(A)),
                           ("symmetric_primal", norms.symmetric_primal_program(A))):
            sol = sdp.solve(prob, tol=tol)
            tally.ok(f"{name}_optimal", {"pass": sol.status == sdp.OPTIMAL}, t, inst)
            tally.ok(f"{name}_certificate", sdp.check_certificate(prob, sol, 10 * tol), t, inst)
            again = sdp.SdpProblem.from_dict(prob.to_dict())
            resolved = sdp.solve(again, tol=tol)
            tally.close(f"{name}_roundtrip", resolved.primal_value, sol.primal_value, 0.0, t, inst)
    return tally


SUITES = {
    "grothendieck": grothendieck,
    "duality": duality,
    "correlation": correlation,
    "fourier": fourier_suite,
    "rietz": rietz,
    "ncmaps": ncmaps_suite,
    "solver": solver,
}
