import io
import json
import subprocess
import sys

import numpy as np
import pytest

from ballmodel.cli import COMMANDS, run
from ballmodel.generate import (
    conjugate,
    random_contractive_colligation,
    random_row_contraction_blocks,
    random_unitary_colligation,
)
from ballmodel.jsonio import decode_matrix, dumps, encode_colligation, encode_row_contraction
from ballmodel.rowmodel import RowContraction
from ballmodel.sampling import random_unitary


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def write(path, obj):
    path.write_text(dumps(obj))
    return str(path)


@pytest.fixture
def files(tmp_path):
    rng = np.random.default_rng(11)
    T = random_row_contraction_blocks(2, 2, rng)
    R = conjugate(T, random_unitary(2, rng))
    return {
        "unitary": write(tmp_path / "u.json", encode_colligation(random_unitary_colligation(2, 3, 1, rng))),
        "t06": write(tmp_path / "t06.json", encode_row_contraction(RowContraction((np.array([[0.6]]),)))),
        "T": write(tmp_path / "t.json", encode_row_contraction(RowContraction(tuple(T)))),
        "R": write(tmp_path / "r.json", encode_row_contraction(RowContraction(tuple(R)))),
        "S": write(tmp_path / "s.json", encode_row_contraction(
            RowContraction(tuple(random_row_contraction_blocks(2, 2, rng))))),
        "dir": tmp_path,
    }


class TestDocumentedExamples:
    @pytest.mark.reference
    def test_spherical(self):
        code, out, _ = call("example", "spherical", "--lambda", "1,0", "--format", "json")
        assert code == 0
        rep = json.loads(out)
        assert np.allclose(decode_matrix(rep["kernel_at_origin"]), [[0, 0], [0, 1]])
        assert rep["classification"] == {"cnc": False, "strongly_cc": True, "cc": True}

    @pytest.mark.derived
    def test_charfunc_mobius(self, files):
        code, out, _ = call("rowc", "charfunc", "--file", files["t06"], "--points", "0.5")
        assert code == 0
        v = decode_matrix(json.loads(out)["values"][0]["value"])
        assert v[0, 0] == pytest.approx(-1 / 7, abs=1e-14)

    def test_agler_verify(self, files):
        code, out, _ = call("agler", "verify", "--file", files["unitary"], "--samples", "100", "--seed", "7")
        assert code == 0
        rep = json.loads(out)
        assert rep["max_residual"] < 1e-10 and rep["seed"] == 7


class TestCommands:
    def test_every_command_runs(self, files):
        argv = {
            ("realize", "eval"): ["--file", files["unitary"], "--points", "0.1,0.2"],
            ("check", "colligation"): ["--file", files["unitary"]],
            ("agler", "verify"): ["--file", files["unitary"], "--samples", "10"],
            ("agler", "defects"): ["--file", files["unitary"]],
            ("model", "verify"): ["--file", files["unitary"], "--kind", "cfm"],
            ("rowc", "charfunc"): ["--file", files["T"], "--points", "0.1,0.1", "--order", "2"],
            ("rowc", "classify"): ["--file", files["T"]],
            ("rowc", "moments"): ["--file", files["T"], "--order", "2"],
            ("rowc", "equiv"): ["--a", files["T"], "--b", files["R"]],
            ("rowc", "triple-equiv"): ["--a", files["T"], "--b", files["R"]],
            ("example", "spherical"): ["--lambda", "0.6,0.8j"],
        }
        assert set(argv) == set(COMMANDS)
        for (g, a), extra in argv.items():
            code, out, err = call(g, a, *extra)
            assert code == 0, (g, a, err, out)
            rep = json.loads(out)
            assert rep["command"] == f"{g} {a}" and rep["passed"] is True

    def test_equiv_witness_round_trips(self, files):
        _, out, _ = call("rowc", "equiv", "--a", files["T"], "--b", files["R"])
        rep = json.loads(out)
        W = decode_matrix(rep["witness"])
        again = decode_matrix(json.loads(dumps({"w": W}))["w"])
        assert np.array_equal(W, again)
        assert np.allclose(W.conj().T @ W, np.eye(2), atol=1e-10)

    def test_not_equivalent_exits_1(self, files):
        code, out, _ = call("rowc", "equiv", "--a", files["T"], "--b", files["S"])
        assert code == 1
        assert json.loads(out)["reason"] == "not found (heuristic)"

    def test_equiv_dimension_mismatch(self, files):
        code, out, _ = call("rowc", "equiv", "--a", files["T"], "--b", files["t06"])
        assert code == 1 and json.loads(out)["reason"] == "dimensions differ"

    def test_text_format(self, files):
        code, out, _ = call("rowc", "charfunc", "--file", files["t06"], "--points", "0.5", "--format", "text")
        assert code == 0
        assert "values[0].value: 1x1 [" in out
        assert "passed: True" in out


class TestExitCodes:
    @pytest.mark.parametrize("argv", [
        [],
        ["nope", "x"],
        ["rowc", "nope"],
        ["rowc", "classify"],
        ["example", "spherical", "--lambda", "1"],
        ["example", "spherical", "--lambda", "1,0", "--tol", "-1"],
        ["model", "verify", "--kind", "xyz", "--file", "x"],
    ])
    def test_usage_errors(self, argv):
        code, out, err = call(*argv)
        assert code == 2 and out == ""
        assert err.startswith(("usage error", "input error"))

    def test_malformed_file(self, files):
        bad = files["dir"] / "bad.json"
        bad.write_text(json.dumps({"d": 1, "n": 1, "T": [{"rows": 1, "cols": 1, "data": [["a", 0]]}]}))
        code, _, err = call("rowc", "classify", "--file", str(bad))
        assert code == 2
        assert "$.T[0].data[0]" in err

    def test_not_a_row_contraction(self, files):
        path = write(files["dir"] / "big.json", encode_row_contraction(RowContraction((np.array([[2.0]]),))))
        code, _, err = call("rowc", "classify", "--file", path)
        assert code == 2 and "exceeds 1" in err

    def test_off_sphere(self):
        code, _, err = call("example", "spherical", "--lambda", "0.5,0.5")
        assert code == 2

    def test_failed_check_exits_1(self, files):
        # strict contraction: the output block of the identity fails
        rng = np.random.default_rng(1)
        path = write(files["dir"] / "c.json", encode_colligation(random_contractive_colligation(2, 2, 1, 1, rng, 0.8)))
        code, out, _ = call("agler", "verify", "--file", path, "--samples", "5")
        assert code == 1 and json.loads(out)["passed"] is False


class TestDeterminism:
    def test_byte_identical(self, files):
        argv = ["rowc", "triple-equiv", "--a", files["T"], "--b", files["R"], "--seed", "3"]
        assert call(*argv)[1] == call(*argv)[1]

    def test_console_script_matches_in_process(self, files):
        argv = ["agler", "verify", "--file", files["unitary"], "--samples", "5"]
        proc = subprocess.run([sys.executable, "-m", "ballmodel", *argv], capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout == call(*argv)[1]
