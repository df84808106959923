import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import fixture_path
from fibersolve.cli import main
from fibersolve.gridfn import GridFunction

SEC4 = str(fixture_path("example_sec4.problem"))
TRIVIAL = str(fixture_path("trivial.problem"))


@pytest.fixture(autouse=True)
def _cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _problem(tmp_path, body, name="p.problem"):
    path = tmp_path / name
    path.write_text(body, encoding="utf-8")
    return str(path)


def test_validate_sec4(capsys):
    code, out, _ = run(capsys, "validate", SEC4)
    assert code == 0
    doc = json.loads(out)
    assert doc["status"] == "pass"
    assert doc["report"]["case"] == "LargeAlpha"
    assert doc["report"]["beta_bound"] == 26


def test_validate_k_equal_one_exits_2(capsys, tmp_path):
    path = _problem(tmp_path, '[functions]\nh = "sin(x) + 4*x"\nf = "exp(x) + 5*x"\n'
                              'g = "cos(x)"\n[constants]\nK = 1\nalpha = 5\nbeta = 1\n')
    code, out, _ = run(capsys, "validate", path)
    assert code == 2
    doc = json.loads(out)
    assert doc["error"]["type"] == "HypothesisViolation"


def test_validate_beta_too_large_exits_2(capsys, tmp_path):
    path = _problem(tmp_path, '[functions]\nh = "4*x"\nf = "5*x"\ng = "cos(x)"\n'
                              '[constants]\nbeta = 60\n')
    code, out, _ = run(capsys, "validate", path)
    assert code == 2
    doc = json.loads(out)
    assert doc["error"]["type"] == "BetaTooLarge"
    assert doc["case"] == "LargeAlpha" and doc["beta_bound"] == pytest.approx(3 * 17)


def test_malformed_expression_exits_1_with_offset(capsys, tmp_path):
    path = _problem(tmp_path, '[functions]\nh = "sin(x"\nf = "5*x"\ng = "0"\n')
    code, out, _ = run(capsys, "validate", path)
    assert code == 1
    doc = json.loads(out)
    assert doc["error"]["type"] == "ExprSyntaxError"
    assert "byte 5" in doc["error"]["message"]


@pytest.mark.parametrize("body", [
    '[functions]\nh = "4*x"\nf = "5*x"\n',                    # missing g
    '[functions]\nh = "4*x"\nf = "5*x"\ng = "0"\nz = "1"\n',  # unknown key
    '[functions]\nh = "4*x"\nf = "5*x"\ng = "abs(x)"\n',      # no symbolic g'
])
def test_config_errors_exit_1(capsys, tmp_path, body):
    code, out, _ = run(capsys, "validate", _problem(tmp_path, body))
    assert code == 1
    assert json.loads(out)["status"] == "fail"


@pytest.mark.parametrize("g, h, error", [
    ("x", "4*x", "UnboundedFunction"),
    ("0", "x^3", "HypothesisViolation"),  # inf |h'| = 0
])
def test_estimated_hypothesis_failures_exit_2(capsys, tmp_path, g, h, error):
    path = _problem(tmp_path, f'[functions]\nh = "{h}"\nf = "5*x"\ng = "{g}"\n')
    code, out, _ = run(capsys, "validate", path)
    assert code == 2
    assert json.loads(out)["error"]["type"] == error


def test_solve_sec4_writes_artifacts(capsys, tmp_path):
    code, out, _ = run(capsys, "solve", SEC4, "--tol", "1e-10", "--trace", "t.csv",
                       "--out", "out/sec4")
    assert code == 0
    doc = json.loads(out)
    assert doc["status"] == "converged"
    assert doc["verification"]["residual_sup"] <= 1e-6
    assert (tmp_path / "out/sec4_report.json").read_text() == out
    phi = GridFunction.from_csv(tmp_path / "out/sec4_phi.csv")
    Phi = GridFunction.from_csv(tmp_path / "out/sec4_Phi.csv")
    assert len(phi) == len(Phi) == 4001
    trace = (tmp_path / "t.csv").read_text().splitlines()
    assert trace[0] == "n,delta_phi,delta_Phi,residual,seconds"
    assert len(trace) == doc["iterations"] + 1


def test_solve_max_iter_exits_3(capsys, tmp_path):
    code, out, _ = run(capsys, "solve", SEC4, "--max-iter", "1", "--trace", "t.csv")
    assert code == 3
    doc = json.loads(out)
    assert doc["status"] == "max_iter" and doc["iterations"] == 1
    assert len((tmp_path / "t.csv").read_text().splitlines()) == 2
    assert not (tmp_path / "example_sec4_phi.csv").exists()


def test_solve_trivial(capsys, tmp_path):
    code, out, _ = run(capsys, "solve", TRIVIAL)
    assert code == 0
    doc = json.loads(out)
    assert doc["iterations"] == 1
    phi = GridFunction.from_csv(tmp_path / "trivial_phi.csv")
    assert np.all(phi.values == 0)


def test_flags_override_file(capsys, tmp_path):
    path = _problem(tmp_path, '[functions]\nh = "4*x"\nf = "5*x"\ng = "sin(x)"\n'
                              '[domain]\ngrid_n = 101\nA = 12\n[solver]\ntol = 1e-3\n')
    code, out, _ = run(capsys, "solve", path, "--grid-n", "201", "--tol", "1e-9")
    assert code == 0
    doc = json.loads(out)
    assert doc["grid_n"] == 201 and doc["tol"] == 1e-9 and doc["A"] == 12
    code, out, _ = run(capsys, "solve", path, "--interval", "15")
    doc = json.loads(out)
    assert doc["grid_n"] == 101 and doc["tol"] == 1e-3 and doc["A"] == 15


def test_explicit_parameters(capsys):
    code, out, _ = run(capsys, "solve", SEC4, "--L", "1", "--rho", "1")
    assert code == 0
    cond = json.loads(out)["condition"]
    assert cond["chosen_L"] == 1 and cond["lambda_factor"] == pytest.approx(2 / 3)
    code, out, _ = run(capsys, "solve", SEC4, "--L", "2.5", "--rho", "1")
    assert code == 1
    assert json.loads(out)["error"]["type"] == "ExplicitOutOfWindow"


def test_report_table_and_json_round_trip(capsys, tmp_path):
    assert run(capsys, "solve", SEC4, "--out", "out/sec4")[0] == 0
    code, out, _ = run(capsys, "report", "out")
    assert code == 0
    for word in ("residual sup", "Lambda factor", "observed ratio"):
        assert word in out
    original = (tmp_path / "out/sec4_report.json").read_text()
    code, out, _ = run(capsys, "report", "out/sec4_report.json", "--json")
    assert code == 0 and out == original


def test_report_round_trips_validation_json(capsys, tmp_path):
    _, out, _ = run(capsys, "validate", SEC4)
    (tmp_path / "v_report.json").write_text(out)
    code, again, _ = run(capsys, "report", "v_report.json", "--json")
    assert code == 0 and again == out
    code, table, _ = run(capsys, "report", "v_report.json")
    assert code == 0 and "LargeAlpha" in table


def test_report_missing_and_corrupted(capsys, tmp_path):
    (tmp_path / "empty").mkdir()
    code, _, err = run(capsys, "report", "empty")
    assert code == 1 and "no report artifacts" in err
    (tmp_path / "bad").mkdir()
    (tmp_path / "bad/x_report.json").write_text("{not json")
    code, _, err = run(capsys, "report", "bad")
    assert code == 1 and "cannot parse" in err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fibersolve", "validate", TRIVIAL],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["kind"] == "validation"
