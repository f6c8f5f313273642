import json
import math
import subprocess
import sys

import pytest

from ballspec.cli import EXIT_FORMAT, EXIT_USAGE, EXIT_VERIFY, main

SMALL_GRID = ["--nr", "12", "--ntheta", "12", "--nphi", "24"]


def run(argv, capsys):
    rc = main(argv)
    out = capsys.readouterr()
    return rc, out.out, out.err


@pytest.fixture(scope="module")
def bump_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("fields") / "bump.json"
    assert main(["sample-grid", "--field", "bump", "-o", str(path)]) == 0
    return path


# ---------------------------------------------------------------------------
# zeros


def test_zeros_psi_rows(capsys):
    rc, out, _ = run(["zeros", "--kind", "psi", "--n", "0", "--count", "2"], capsys)
    assert rc == 0
    rows = [line.split(",") for line in out.splitlines()[1:]]
    assert [(r[1], r[2]) for r in rows] == [("0", "1"), ("0", "2")]
    assert abs(float(rows[0][3]) - 3.14159265358979) <= 1e-14
    assert abs(float(rows[1][3]) - 6.28318530717959) <= 1e-14


def test_zeros_psi_prime(capsys):
    rc, out, _ = run(["zeros", "--kind", "psi-prime", "--n", "0", "--count", "1"], capsys)
    assert rc == 0
    assert abs(float(out.splitlines()[1].split(",")[3]) - 4.49340945790906) <= 1e-12


def test_zeros_cutoff(capsys):
    rc, out, _ = run(["zeros", "--kind", "psi", "--n", "0", "--cutoff", "10"], capsys)
    assert rc == 0
    assert len(out.splitlines()) == 1 + 3


@pytest.mark.parametrize(
    "argv",
    [
        ["zeros", "--kind", "psi", "--n", "-1", "--count", "2"],
        ["zeros", "--kind", "psi", "--n", "0"],
        ["zeros", "--kind", "psi", "--n", "0", "--count", "2", "--cutoff", "3"],
        ["zeros", "--kind", "bessel", "--n", "0", "--count", "2"],
        ["zeros", "--kind", "psi", "--n", "0", "--count", "-2"],
        ["nonsense"],
        [],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    rc, _, _ = run(argv, capsys)
    assert rc == EXIT_USAGE


def test_output_file(tmp_path, capsys):
    path = tmp_path / "z.csv"
    rc, out, _ = run(["zeros", "--kind", "psi", "--n", "1", "--count", "3", "--output", str(path)], capsys)
    assert rc == 0 and out == ""
    assert path.read_text().startswith("kind,n,m,zero\n")


# ---------------------------------------------------------------------------
# config and environment


def test_config_overrides_flags(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"count": 4}))
    rc, out, _ = run(["zeros", "--kind", "psi", "--n", "0", "--count", "2", "--config", str(cfg)], capsys)
    assert rc == 0
    assert len(out.splitlines()) == 1 + 4


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    rc, _, _ = run(["zeros", "--kind", "psi", "--n", "0", "--count", "2", "--config", str(cfg)], capsys)
    assert rc == EXIT_USAGE


def test_config_not_json(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    rc, _, _ = run(["zeros", "--kind", "psi", "--n", "0", "--count", "2", "--config", str(cfg)], capsys)
    assert rc == EXIT_FORMAT


def test_threads_env(monkeypatch, capsys):
    monkeypatch.setenv("BALLSPEC_THREADS", "1")
    assert run(["zeros", "--kind", "psi", "--n", "0", "--count", "1"], capsys)[0] == 0
    monkeypatch.setenv("BALLSPEC_THREADS", "zero")
    assert run(["zeros", "--kind", "psi", "--n", "0", "--count", "1"], capsys)[0] == EXIT_USAGE
    monkeypatch.setenv("BALLSPEC_THREADS", "0")
    assert run(["zeros", "--kind", "psi", "--n", "0", "--count", "1"], capsys)[0] == EXIT_USAGE


# ---------------------------------------------------------------------------
# tables, grids, fields


def test_eigentable(capsys):
    rc, out, _ = run(["eigentable", "--family", "grad_div", "--cutoff", "5"], capsys)
    assert rc == 0
    d = json.loads(out)
    assert d["family"] == "grad_div"
    assert len(d["entries"]) == 16


def test_sample_grid_nodes(capsys):
    rc, out, _ = run(["sample-grid", "--nr", "3", "--ntheta", "48", "--nphi", "4"], capsys)
    assert rc == 0
    d = json.loads(out)
    assert len(d["nodes"]["r"]) == 3 * 48 * 4
    assert abs(sum(d["weights"]) - 4 * math.pi / 3) <= 1e-12


def test_sample_unknown_field(capsys):
    assert run(["sample-grid", "--field", "nope"], capsys)[0] == EXIT_USAGE


def test_malformed_input_exit_4(tmp_path, capsys):
    bad = tmp_path / "f.json"
    bad.write_text(json.dumps({"grid": {"R": 1.0}}))
    assert run(["decompose", "--input", str(bad)], capsys)[0] == EXIT_FORMAT
    missing = tmp_path / "missing.json"
    assert run(["decompose", "--input", str(missing)], capsys)[0] == EXIT_FORMAT


def test_decompose_defect_nonincreasing(bump_file, capsys):
    defects = []
    for N in ("20", "30"):
        rc, out, _ = run(["decompose", "--input", str(bump_file), "--cutoff", N], capsys)
        assert rc == 0
        defects.append(json.loads(out)["parseval"]["defect"])
    assert defects[1] <= defects[0]


# ---------------------------------------------------------------------------
# sobolev and solve


def test_sobolev_named_field(capsys):
    rc, out, _ = run(["sobolev", "--field", "radial", "--s", "1", "--cutoff", "20"] + SMALL_GRID, capsys)
    assert rc == 0
    d = json.loads(out)
    assert d["verdict"] is False


def test_sobolev_needs_one_source(bump_file, capsys):
    assert run(["sobolev", "--s", "1"], capsys)[0] == EXIT_USAGE
    assert run(["sobolev", "--s", "1", "--field", "bump", "--input", str(bump_file)], capsys)[0] == EXIT_USAGE


def test_solve_lambda_zero_unsolvable(bump_file, capsys):
    rc, out, _ = run(["solve", "--lambda", "0", "--input", str(bump_file), "--cutoff", "10"], capsys)
    assert rc == EXIT_VERIFY
    d = json.loads(out)
    assert d["solvable"] is False
    assert d["resonance"]["kind"] == "lambda_zero"
    assert d["fredholm_defect"] > 0
    assert d["violating"]


def test_solve_from_coefficients(bump_file, tmp_path, capsys):
    coeffs = tmp_path / "c.json"
    assert main(["decompose", "--input", str(bump_file), "--cutoff", "10", "-o", str(coeffs)]) == 0
    rc, out, _ = run(["solve", "--lambda", "-1", "--coeffs", str(coeffs)], capsys)
    assert rc == 0
    d = json.loads(out)
    assert d["solvable"] is True and d["resonance"]["kind"] == "none"


def test_solve_lambda_from_config(bump_file, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lam": -2.5, "cutoff": 8}))
    rc, out, _ = run(["solve", "--lambda", "0", "--input", str(bump_file), "--config", str(cfg)], capsys)
    assert rc == 0
    assert json.loads(out)["lambda"] == -2.5


# ---------------------------------------------------------------------------
# verify


def test_verify_eigen(capsys):
    rc, out, _ = run(["verify", "--suite", "eigen", "--nmax", "3"], capsys)
    assert rc == 0
    d = json.loads(out)
    assert d["passed"] is True
    assert all(c["value"] <= 1e-6 for c in d["checks"][:4])


def test_verify_unknown_suite(capsys):
    assert run(["verify", "--suite", "nope"], capsys)[0] == EXIT_USAGE


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "ballspec", "zeros", "--kind", "psi", "--n", "0", "--count", "1"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "kind,n,m,zero"
