import csv
import io
import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from phibvp.cli import CSV_COLUMNS, main

SPECS = Path(__file__).resolve().parent.parent / "specs"
EXAMPLE_SPECS = ["sinh_integral.yaml", "plaplacian_delay.yaml", "cubic_runmax.yaml"]


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def read_table(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], np.array(rows[1:], dtype=float)


def constant_candidate(path, a, b, value, n=9):
    t = np.linspace(a, b, n)
    lines = ["t,x"] + [f"{float(v)!r},{float(value)!r}" for v in t]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.mark.parametrize("spec", EXAMPLE_SPECS)
def test_solve_then_verify_round_trip(spec, tmp_path):
    out = tmp_path / "sol.csv"
    code, summary, _ = run("solve", SPECS / spec, "--out", out)
    assert code == 0, summary
    header, table = read_table(out.read_text())
    assert tuple(header) == CSV_COLUMNS
    assert "PASS  band" in summary and "FAIL" not in summary
    code, text, _ = run("verify", SPECS / spec, out)
    assert code == 0, text
    assert "solution: all certificates pass" in text


def test_csv_band_and_derivative_columns():
    code, text, err = run("solve", SPECS / "sinh_integral.yaml")
    assert code == 0, err
    _, table = read_table(text)
    t, x, dx, k_dx, phi = table.T
    assert np.all((x >= -1 - 1e-8) & (x <= 1 + 1e-8))
    np.testing.assert_allclose(dx[:-1], np.diff(x) / np.diff(t), rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(phi, np.sinh(k_dx), rtol=1e-14)
    assert "converged in" in err  # the summary goes to stderr when stdout carries data


def test_lower_solution_checks(tmp_path):
    spec = SPECS / "sinh_integral.yaml"
    good = constant_candidate(tmp_path / "m1.csv", 0.0, 1.0, -1.0)
    bad = constant_candidate(tmp_path / "p1.csv", 0.0, 1.0, 1.0)
    assert run("verify", spec, good, "--role", "lower")[0] == 0
    code, text, _ = run("verify", spec, bad, "--role", "lower")
    assert code != 0 and "FAIL  lower_boundary_b" in text
    assert run("verify", spec, bad, "--role", "upper")[0] == 0


def test_verify_input_errors(tmp_path):
    spec = SPECS / "sinh_integral.yaml"
    wrong_span = constant_candidate(tmp_path / "w.csv", 0.0, 2.0, 0.0)
    assert run("verify", spec, wrong_span)[0] == 1
    no_x = tmp_path / "nox.csv"
    no_x.write_text("t,y\n0,1\n1,1\n")
    code, _, err = run("verify", spec, no_x)
    assert code == 1 and "'x'" in err


def test_constraint_violation_exits_1():
    code, _, err = run("solve", SPECS / "plaplacian_delay_bad_delta.yaml")
    assert code == 1 and "delta" in err and "1.5" in err


def test_not_converged_exits_3():
    code, _, err = run("solve", SPECS / "sinh_integral.yaml", "--max-iters", "1")
    assert code == 3 and "no convergence" in err


def test_divergence_exits_2():
    code, _, err = run("constants", SPECS / "psi_square.yaml")
    assert code == 2 and "divergence" in err
    assert run("solve", SPECS / "psi_square.yaml")[0] == 2


def test_constants_output():
    code, text, _ = run("constants", SPECS / "plaplacian_delay.yaml")
    assert code == 0
    values = dict(line.split(None, 1) for line in text.splitlines())
    assert float(values["M"]) == 2.0 and float(values["eta_M"]) == 2.0
    assert float(values["N"]) == pytest.approx(1.01)
    assert {"L_M", "gamma_L_norm_L1", "rhs"} <= set(values)
    code, text, _ = run("constants", SPECS / "trivial.yaml")
    values = dict(line.split(None, 1) for line in text.splitlines())
    assert code == 0 and float(values["rhs"]) == 0.0


def test_json_is_deterministic(tmp_path):
    docs = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        assert run("solve", SPECS / "cubic_runmax.yaml", "--format", "json", "--cells", "256", "--out", out)[0] == 0
        doc = json.loads(out.read_text())
        doc.pop("timestamp")
        docs.append(json.dumps(doc, sort_keys=True))
    assert docs[0] == docs[1]
    doc = json.loads(docs[0])
    assert doc["schema"] == "phibvp.report" and doc["schema_version"] == 1
    assert doc["status"]["converged"] and doc["solver"]["cells"] == 256
    assert set(doc["solution"]) == set(CSV_COLUMNS)


def test_example_subcommand(tmp_path):
    code, text, _ = run("example", "--list")
    assert code == 0 and "plaplacian-delay" in text
    code, text, _ = run("example", "cubic-runmax", "--param", "d2=2", "--spec-only")
    assert code == 0 and "2.0 * indicator(0.0, 1.0)" in text
    spec = tmp_path / "ex.yaml"
    spec.write_text(text)
    code, _, err = run("solve", spec, "--cells", "256")
    assert code == 0, err
    assert run("example", "cubic-runmax", "--param", "d2=0")[0] == 1
    assert run("example", "cubic-runmax", "--param", "d2")[0] == 1
    assert run("example", "nonexistent")[0] == 1


def test_missing_spec_file():
    code, _, err = run("solve", "no/such/file.yaml")
    assert code == 1 and "cannot read" in err


@pytest.mark.skipif(shutil.which("phibvp") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["phibvp", "example", "--list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sinh-integral" in proc.stdout
