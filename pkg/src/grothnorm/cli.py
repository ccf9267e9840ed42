"""``grothnorm`` command line: norms, witnesses, property suites, experiments.

Exit codes: 0 ok, 1 property failure, 2 parse error, 3 precondition
violated, 4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__, fourier, matcore, ncmaps, norms, sdp, suites
from .certificates import NormCertificate, verify

EXIT_OK, EXIT_PROPERTY, EXIT_PARSE, EXIT_PRECONDITION, EXIT_SOLVER = 0, 1, 2, 3, 4
TOL_FLOOR = 1e-9

NORMS = ("gamma2", "gamma2star", "corrC", "corrCprime", "corrproblem", "schatten1",
         "schatten2", "schattenInf", "infty1", "onetoinf", "cs1")
NC_COMMANDS = ("cs1", "choi", "expectation", "gapdemo", "cliffordcheck", "gammastarmap")


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# deterministic JSON
# ---------------------------------------------------------------------------


def _plain(obj):
    if isinstance(obj, NormCertificate):
        return _plain(obj.to_dict())
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def dumps(obj, indent=0) -> str:
    """JSON with floats at 17 significant digits; non-finite floats become null."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format(obj, ".17g") if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def make_report(command, inputs, results, tol) -> dict:
    return _plain({
        "command": command,
        "inputs": inputs,
        "results": results,
        "provenance": {
            "package": "grothnorm",
            "version": __version__,
            "tolerances": {"sdp": tol, "match": matcore.TOL_MATCH, "psd": matcore.PSD_TOL,
                           "property": suites.PROP_TOL},
        },
    })


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _read(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"cannot read {path}: {exc.strerror}") from exc
    try:
        return text, *matcore.parse_matrix(text)
    except matcore.MatrixFormatError as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc}") from exc


def _map_from_file(path, kind):
    text, M, comments = _read(path)
    if any(ncmaps._CHOI_HEADER.search(c) for c in comments):
        try:
            return ncmaps.parse_map(text), "choi"
        except ValueError as exc:
            raise CliError(EXIT_PARSE, f"{path}: {exc}") from exc
    if M.shape[0] != M.shape[1]:
        raise CliError(EXIT_PRECONDITION, "a map needs a square matrix or a Choi file")
    return (ncmaps.diagonal_action_map(M), "diagonal") if kind == "diagonal" else (ncmaps.schur_map(M), "schur")


def cmd_norm(args, tol):
    _, A, _ = _read(args.file)
    name = args.norm
    cert, results = None, {}
    if name in ("gamma2", "gamma2star", "corrC", "corrCprime", "corrproblem"):
        fn = {"gamma2": norms.gamma2, "gamma2star": norms.gamma2_star,
              "corrC": norms.corr_norm_C, "corrCprime": norms.corr_norm_Cprime,
              "corrproblem": norms.corr_problem}[name]
        cert = fn(A, tol)
        target = A
    elif name == "cs1":
        phi, kind = _map_from_file(args.file, args.map)
        cert = ncmaps.cs1_norm(phi, cross_check=False)
        target = phi.choi
        results["map"] = kind
    elif name.startswith("schatten"):
        p = {"schatten1": 1, "schatten2": 2, "schattenInf": np.inf}[name]
        results["value"] = matcore.schatten_norm(A, p)
    elif name == "infty1":
        value, eps = matcore.max_sign_vector(A, 1)
        results["value"] = value
        results["maximizing_signs"] = eps
    else:
        results["value"] = matcore.pq_norm(A, 1, np.inf)
    if cert is not None:
        results["value"] = cert.value
        if args.witness:
            results["certificate"] = cert
            results["verification"] = verify(cert, target, suites.PROP_TOL)
    inputs = {"file": args.file, "norm": name, "witness": bool(args.witness)}
    return inputs, results, [f"{name} = {format(results['value'], '.17g')}"]


def cmd_verify(args, tol):
    tally = suites.SUITES[args.suite](args.n, args.trials, args.seed, tol)
    results = tally.to_dict()
    inputs = {"suite": args.suite, "n": args.n, "trials": args.trials, "seed": args.seed}
    lines = [f"{name}: {p['passes']}/{p['trials']} pass, worst slack {format(p['worst_slack'], '.3g')}"
             for name, p in results["properties"].items()]
    lines.append("PASS" if tally.passed else f"FAIL ({len(tally.failures)} failing checks)")
    return inputs, results, lines


def cmd_experiment(args, tol):
    _, A, _ = _read(args.file)
    results = fourier.sampling_experiment(A, args.K, args.trials, args.seed,
                                          full_enumeration=args.full_enumeration)
    inputs = {"file": args.file, "K": args.K, "trials": args.trials, "seed": args.seed,
              "full_enumeration": bool(args.full_enumeration)}
    if results["degenerate_denominator"]:
        lines = ["degenerate denominator: ||A||_{inf->1} = 0, ratios undefined"]
    else:
        lines = [f"ratio {k}: {format(results['ratio_' + k], '.17g')}" for k in ("min", "median", "max")]
    return inputs, results, lines


def cmd_nc(args, tol):
    inputs = {"subcommand": args.sub, "file": args.file, "map": args.map}
    sub = args.sub
    if sub == "cliffordcheck":
        if args.file is None:
            if args.m is None:
                raise CliError(EXIT_PRECONDITION, "cliffordcheck needs --m or a file of unit vectors")
            inputs["m"] = args.m
            check = ncmaps.check_clifford(ncmaps.clifford_system(args.m))
            return inputs, check, [f"generators m={args.m}: {'PASS' if check['pass'] else 'FAIL'}"]
        _, V, _ = _read(args.file)
        _, _, pairing = ncmaps.clifford_witness(V, V)
        err = float(np.max(np.abs(pairing - V @ V.T)))
        results = {"pairing": pairing, "max_error": err, "pass": err <= 1e-10}
        return inputs, results, [f"pairing error {format(err, '.3g')}"]
    if args.file is None:
        raise CliError(EXIT_PARSE, f"nc {sub} needs a file")
    if sub in ("cs1", "choi", "expectation"):
        phi, kind = _map_from_file(args.file, args.map)
        inputs["map"] = kind
        if sub == "cs1":
            cert = ncmaps.cs1_norm(phi)
            results = {"value": cert.value, "lower_bound": ncmaps.lower_bound_cs1(phi),
                       "sdp_value": cert.meta.get("sdp_value")}
            if args.witness:
                results["certificate"] = cert
                results["verification"] = verify(cert, phi.choi, suites.PROP_TOL)
            return inputs, results, [f"cs1 = {format(cert.value, '.17g')}"]
        if sub == "choi":
            return inputs, {"n": phi.n, "choi": phi.choi}, ncmaps.format_map(phi).splitlines()
        E = ncmaps.conditional_expectation(phi)
        return inputs, {"expectation": E}, matcore.format_matrix(E).splitlines()
    _, A, _ = _read(args.file)
    if sub == "gapdemo":
        r = ncmaps.cs1_gap_demo(A)
        return inputs, r, [f"cs1 = {format(r['cs1'], '.17g')}",
                           f"op_to_trace = {format(r['op_to_trace'], '.17g')}",
                           f"ratio = {r['ratio']}"]
    r = ncmaps.gamma_star_map_bound(A)
    results = {k: r[k] for k in ("value", "gamma2_star", "infty_to_one", "clifford_dim",
                                 "rank", "max_contraction_norm")}
    if args.witness:
        results.update(unit_vectors=r["unit_vectors"], B=r["B"], C=r["C"],
                       upper_certificate=r["upper_certificate"])
    return inputs, results, [f"lower = {format(r['value'], '.17g')}",
                             f"gamma2star = {format(r['gamma2_star'], '.17g')}"]


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print only the JSON report")
    common.add_argument("--tol", type=float, default=sdp.TOL_SDP,
                        help=f"SDP tolerance (floor {TOL_FLOOR:g})")
    common.add_argument("--witness", action="store_true", help="include certificates")

    parser = argparse.ArgumentParser(prog="grothnorm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norm", parents=[common], help="compute a norm of a matrix file")
    p.add_argument("file")
    p.add_argument("norm", choices=NORMS)
    p.add_argument("--map", choices=("schur", "diagonal"), default="schur",
                   help="how cs1 reads a plain matrix file")
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("verify", parents=[common], help="run a seeded property suite")
    p.add_argument("suite", choices=sorted(suites.SUITES))
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("experiment", parents=[common], help="sign-sampling experiment")
    p.add_argument("file")
    p.add_argument("--K", type=int, default=8)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--full-enumeration", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("nc", parents=[common], help="matrix-map computations")
    p.add_argument("sub", choices=NC_COMMANDS)
    p.add_argument("file", nargs="?")
    p.add_argument("--map", choices=("schur", "diagonal"), default="schur")
    p.add_argument("--m", type=int)
    p.set_defaults(func=cmd_nc)
    return parser


def run(argv=None, out=sys.stdout, err=sys.stderr) -> int:
    args = build_parser().parse_args(argv)
    tol = max(args.tol, TOL_FLOOR)
    try:
        inputs, results, lines = args.func(args, tol)
    except CliError as exc:
        print(f"error: {exc}", file=err)
        return exc.code
    except matcore.MatrixFormatError as exc:
        print(f"parse error: {exc}", file=err)
        return EXIT_PARSE
    except (norms.SolverFailure, sdp.SdpError, matcore.ConvergenceError) as exc:
        print(f"solver failure: {exc}", file=err)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"precondition violated: {exc}", file=err)
        return EXIT_PRECONDITION
    if args.tol < TOL_FLOOR:
        inputs["tol_requested"] = args.tol
    report = make_report(args.command, inputs, results, tol)
    if args.json:
        out.write(dumps(report) + "\n")
    else:
        for line in lines:
            out.write(line + "\n")
        if args.witness:
            out.write(dumps(report) + "\n")
    if results.get("pass") is False:
        return EXIT_PROPERTY
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
