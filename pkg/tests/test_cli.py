import io
import json

import numpy as np
import pytest

from grothnorm import cli, matcore, ncmaps, norms, suites
from grothnorm.certificates import NormCertificate, verify


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def run_json(*argv):
    code, out, err = run(*argv, "--json")
    return code, (json.loads(out) if out else None), err


@pytest.fixture
def matrix_file(tmp_path):
    def write(A, name="A.txt"):
        path = tmp_path / name
        matcore.write_matrix(path, np.asarray(A, dtype=float))
        return path

    return write


class TestNorm:
    def test_gamma2star_identity(self, matrix_file):
        code, rep, _ = run_json("norm", matrix_file(np.eye(2)), "gamma2star")
        assert code == 0
        assert rep["results"]["value"] == pytest.approx(2, abs=1e-6)
        assert set(rep) == {"command", "inputs", "results", "provenance"}
        assert rep["provenance"]["tolerances"]["sdp"] == 1e-7

    def test_plain_output(self, matrix_file):
        code, out, _ = run("norm", matrix_file([[1, -2], [3, 4]]), "infty1")
        assert code == 0
        assert out.strip() == "infty1 = 8"

    @pytest.mark.parametrize("norm, expected", [("schatten1", 3.0), ("schattenInf", 1.0),
                                                ("onetoinf", 1.0), ("corrC", 3.0)])
    def test_cheap_norms(self, matrix_file, norm, expected):
        code, rep, _ = run_json("norm", matrix_file(np.eye(3)), norm)
        assert code == 0
        assert rep["results"]["value"] == pytest.approx(expected, abs=1e-6)

    @pytest.mark.parametrize("norm", ["gamma2", "gamma2star", "corrC", "corrCprime", "corrproblem"])
    def test_witness_reverifies_offline(self, matrix_file, norm):
        A = np.array([[0.0, 1.0, -0.5], [1.0, 0.0, 2.0], [-0.5, 2.0, 0.0]])
        code, rep, _ = run_json("norm", matrix_file(A), norm, "--witness")
        assert code == 0
        assert rep["results"]["verification"]["pass"]
        cert = NormCertificate.from_dict(rep["results"]["certificate"])
        assert verify(cert, A, 1e-5)["pass"]

    def test_cs1_of_schur_and_phi(self, matrix_file):
        path = matrix_file([[1, 1], [1, -1]])
        assert run_json("norm", path, "cs1")[1]["results"]["value"] == pytest.approx(2 * np.sqrt(2))
        assert run_json("norm", path, "cs1", "--map", "diagonal")[1]["results"]["value"] == pytest.approx(4)

    def test_tolerance_floor(self, matrix_file):
        code, rep, _ = run_json("norm", matrix_file(np.eye(2)), "gamma2", "--tol", "1e-14")
        assert code == 0
        assert rep["provenance"]["tolerances"]["sdp"] == cli.TOL_FLOOR
        assert rep["inputs"]["tol_requested"] == 1e-14


class TestExitCodes:
    def test_parse_error(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("2 2\n1 2\n")
        code, out, err = run("norm", bad, "gamma2")
        assert code == 2 and out == "" and "expected 2 rows" in err

    def test_missing_file(self, tmp_path):
        assert run("norm", tmp_path / "absent.txt", "gamma2")[0] == 2

    def test_precondition_non_symmetric(self, matrix_file):
        code, _, err = run("norm", matrix_file([[1, 2], [0, 1]]), "corrC")
        assert code == 3 and "precondition" in err

    def test_precondition_not_hollow(self, matrix_file):
        assert run("norm", matrix_file(np.eye(2)), "corrproblem")[0] == 3

    def test_precondition_cap(self, matrix_file):
        assert run("experiment", matrix_file(np.eye(2)), "--K", 1000, "--seed", 0)[0] == 3

    def test_solver_failure(self, matrix_file, monkeypatch):
        def stall(*args, **kwargs):
            raise norms.SolverFailure("stalled")

        monkeypatch.setattr(norms, "_solve", stall)
        code, _, err = run("norm", matrix_file(np.eye(2)), "gamma2")
        assert code == 4 and "solver failure" in err

    def test_property_failure(self, monkeypatch):
        def failing(n, trials, seed, tol):
            tally = suites.Tally()
            tally.le("impossible", 2.0, 1.0, 0.0, 0, {"A": np.eye(1)})
            return tally

        monkeypatch.setitem(suites.SUITES, "rietz", failing)
        code, rep, _ = run_json("verify", "rietz", "--seed", 0)
        assert code == 1
        assert rep["results"]["failures"][0]["instance"] == {"A": [[1.0]]}

    def test_seed_is_required(self):
        with pytest.raises(SystemExit):
            run("verify", "rietz")


class TestVerifyAndExperiment:
    @pytest.mark.parametrize("suite", sorted(suites.SUITES))
    def test_suites_pass_small(self, suite):
        code, rep, _ = run_json("verify", suite, "--n", 3, "--trials", 2, "--seed", 5)
        assert code == 0, rep["results"]["failures"]
        assert rep["results"]["pass"]

    def test_verify_is_byte_identical(self):
        args = ("verify", "correlation", "--n", 3, "--trials", 2, "--seed", 9, "--json")
        assert run(*args)[1] == run(*args)[1]

    def test_experiment_is_byte_identical(self, matrix_file):
        args = ("experiment", matrix_file([[1, 2], [-1, 0.5]]), "--K", 4, "--trials", 3,
                "--seed", 3, "--json")
        first = run(*args)
        assert first[0] == 0
        assert first[1] == run(*args)[1]

    def test_experiment_degenerate(self, matrix_file):
        code, out, _ = run("experiment", matrix_file(np.zeros((2, 2))), "--seed", 0, "--trials", 1)
        assert code == 0 and "degenerate" in out


class TestNc:
    def test_gapdemo(self, matrix_file):
        code, rep, _ = run_json("nc", "gapdemo", matrix_file([[1, 1], [1, -1]]))
        assert code == 0
        assert (rep["results"]["cs1"], rep["results"]["op_to_trace"]) == pytest.approx((4, 2))

    def test_choi_file_and_expectation(self, tmp_path, rng):
        A = rng.standard_normal((2, 2))
        path = tmp_path / "map.txt"
        ncmaps.write_map(path, ncmaps.schur_map(A))
        code, rep, _ = run_json("nc", "expectation", path)
        assert code == 0
        np.testing.assert_allclose(rep["results"]["expectation"], A)
        code, rep, _ = run_json("nc", "cs1", path, "--witness")
        assert rep["results"]["verification"]["pass"]
        assert rep["results"]["value"] == pytest.approx(matcore.schatten_norm(A, 1))

    def test_cliffordcheck(self, matrix_file):
        assert run_json("nc", "cliffordcheck", "--m", 5)[1]["results"]["pass"]
        V = np.array([[1.0, 0.0, 0.0], [0.6, 0.8, 0.0], [0.0, 0.0, 1.0]])
        code, rep, _ = run_json("nc", "cliffordcheck", matrix_file(V))
        assert code == 0 and rep["results"]["max_error"] <= 1e-10
        assert run("nc", "cliffordcheck")[0] == 3

    def test_gammastarmap(self, matrix_file):
        code, rep, _ = run_json("nc", "gammastarmap", matrix_file(np.eye(2)))
        assert code == 0
        assert rep["results"]["value"] == pytest.approx(2, abs=1e-4)

    def test_needs_file(self):
        assert run("nc", "cs1")[0] == 2
