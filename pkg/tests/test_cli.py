import json
import subprocess
import sys

import pytest

from conftest import CORPUS
from varinverse.cli import run


def c(name):
    return str(CORPUS / name)


def run_json(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = run(argv + ["--out", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_check_passes(tmp_path):
    code, doc = run_json(["check", c("dissipative.json"), c("dissipative_multiplier.json")], tmp_path)
    assert code == 0
    assert [r["id"] for r in doc["conditions"]][:3] == ["sym6", "grad6", "sym11"]


def test_check_douglas_names_sym11(tmp_path):
    code, doc = run_json(["check", c("douglas.json"), c("identity2.json")], tmp_path)
    assert code == 1
    assert [r["id"] for r in doc["conditions"] if not r["pass"]] == ["sym11"]


@pytest.mark.parametrize("name", ["malformed.json", "bad_expression.json", "unknown_symbol.json"])
def test_schema_errors(name, tmp_path):
    assert run(["check", c(name), c("identity2.json")]) == 2


def test_missing_file():
    assert run(["check", "/nonexistent.json"]) == 2


def test_build_harmonic(tmp_path):
    code, doc = run_json(["build", c("harmonic.json"), "--ansatz", "constant"], tmp_path)
    assert code == 0
    assert doc["lagrangian"]["L"] == "dq^2/2 - omega^2*q^2/2"
    assert doc["certify"]["pass"]


def test_build_dissipative_reports_exponent_check(tmp_path):
    code, doc = run_json(["build", c("dissipative.json"), "--ansatz", "scaled_time"], tmp_path)
    assert code == 0
    assert doc["lagrangian"]["multiplier"][0][0] == "exp(-alpha*t)"
    right, doubled = doc["exponent_check"]
    assert right["satisfies_conditions"] and not doubled["satisfies_conditions"]
    assert doubled["sym11_residual"] > 0.1


@pytest.mark.parametrize("ansatz", ["auto", "constant", "scaled_time", "diagonal_functions"])
def test_build_douglas_obstruction(ansatz, tmp_path, capsys):
    out = tmp_path / "o.json"
    assert run(["build", c("douglas.json"), "--ansatz", ansatz, "--out", str(out)]) == 3
    assert not out.exists()
    doc = json.loads(capsys.readouterr().out)
    assert doc["obstruction"]["text"] == "Eq19→h12=0; Eq11→h11=0; det=0"


def test_build_refuses_failed_certification(tmp_path, capsys):
    out = tmp_path / "o.json"
    code = run(["build", c("harmonic.json"), "--ansatz", "constant", "--certify-tol", "1e-12", "--out", str(out)])
    assert code == 1 and not out.exists()


def test_first_order_linear(tmp_path):
    code, doc = run_json(["first-order", c("oscillator_linear.json"), "--grid", "4"], tmp_path)
    assert code == 0
    assert doc["kind"] == "quadratic" and len(doc["table"]) == 5


def test_first_order_grid_zero():
    assert run(["first-order", c("oscillator_linear.json"), "--grid", "0"]) == 2


def test_first_order_method_linear_needs_affine():
    assert run(["first-order", c("pendulum.json"), "--method", "linear"]) == 2


def test_first_order_integration_failure(tmp_path):
    path = tmp_path / "blow.json"
    path.write_text(json.dumps({"kind": "first_order", "coordinates": ["q", "p"], "parameters": {},
                                "velocity_field": {"q": "p^3", "p": "q^3"}}))
    omega = tmp_path / "seed.json"
    omega.write_text(json.dumps({"omega0": [[0, 1], [-1, 0]]}))
    assert run(["first-order", str(path), "--omega0", str(omega), "--method", "flow", "--t", "40", "--dt", "0.05"]) == 4


def test_verify_round_trip(tmp_path):
    code, _ = run_json(["build", c("harmonic.json")], tmp_path, "lag.json")
    assert code == 0
    code, doc = run_json(["verify", c("harmonic.json"), str(tmp_path / "lag.json")], tmp_path, "v.json")
    assert code == 0 and doc["certify"]["pass"]


def test_reports_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert run(["check", c("magnetic.json"), c("magnetic_multiplier.json"), "--seed", "5", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_corpus_expected_exit_codes(tmp_path):
    assert run(["corpus", "--out", str(tmp_path)]) == 0


def test_corpus_byte_identical(tmp_path):
    names = ["dissipative-build", "oscillator-linear", "douglas-check-identity"]
    for d in ("a", "b"):
        assert run(["corpus", "--only", *names, "--out", str(tmp_path / d)]) == 0
    for n in names:
        assert (tmp_path / "a" / f"{n}.json").read_bytes() == (tmp_path / "b" / f"{n}.json").read_bytes()


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "varinverse", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "first-order" in proc.stdout
