import csv
import json
import os

import pytest

from cli import EXIT_ERROR, EXIT_OK, EXIT_USAGE, main, parse_levels
from errors import UsageError


def read_rows(path):
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


@pytest.mark.parametrize("text, levels", [("0..2", [0, 1, 2]), ("3", [3]), ("1..1", [1])])
def test_parse_levels(text, levels):
    assert parse_levels(text) == levels


@pytest.mark.parametrize("text", ["a..b", "2..1", "-1", ""])
def test_parse_levels_rejects(text):
    with pytest.raises(UsageError):
        parse_levels(text)


@pytest.mark.parametrize("argv, csv_name, rows", [
    (["algebra-suite", "--cases", "4", "--probes", "5"], "algebra-suite.csv", 4 * 11),
    (["maxnet-suite", "--max-m", "8", "--arch-m", "16", "--probes", "200"], "maxnet-suite.csv", 15),
    (["stability-suite", "--instances", "3"], "stability-suite.csv", 12),
    (["mlfp-equiv", "--levels", "0..1", "--max-d", "1", "--max-actions", "2", "--budgets", "2",
      "--probes", "10", "--theta-pairs", "3"], "mlfp-equiv.csv", 4),
    (["size-report", "--levels", "0..2"], "size-report.csv", 3),
])
def test_suites_pass(tmp_path, argv, csv_name, rows):
    out = str(tmp_path / "out")
    assert main(argv + ["--out", out, "--quiet"]) == EXIT_OK
    found = read_rows(os.path.join(out, csv_name))
    assert len(found) == rows
    assert all(r["passed"] == "True" for r in found)

    with open(os.path.join(out, csv_name.replace(".csv", ".manifest.json")), encoding="utf-8") as f:
        manifest = json.load(f)
    assert manifest["command"] == argv[0]
    assert manifest["failures"] == 0
    assert "numpy" in manifest["versions"]


def test_mlfp_equiv_skips_oversized_configurations(tmp_path):
    out = str(tmp_path / "out")
    argv = ["mlfp-equiv", "--levels", "0..2", "--max-d", "1", "--max-actions", "1", "--budgets", "2",
            "--probes", "5", "--max-params", "2", "--out", out, "--quiet"]
    assert main(argv) == EXIT_OK

    rows = read_rows(os.path.join(out, "mlfp-equiv.csv"))
    assert [(r["n"], r["skipped"]) for r in rows] == [("0", "False"), ("1", "True"), ("2", "True")]
    assert rows[0]["passed"] == "True"
    with open(os.path.join(out, "mlfp-equiv.manifest.json"), encoding="utf-8") as f:
        manifest = json.load(f)
    assert manifest["checks"]["skipped"] == 2
    assert manifest["failures"] == 0


def test_converge_is_reproducible(tmp_path):
    argv = ["converge", "--levels", "1..2", "--seeds", "2", "--budget", "2", "--quiet"]
    bodies, codes = [], []
    for run in ("a", "b"):
        out = str(tmp_path / run)
        codes.append(main(argv + ["--out", out]))
        with open(os.path.join(out, "converge.csv"), "rb") as f:
            bodies.append(f.read())
    assert codes[0] == codes[1]
    assert bodies[0] == bodies[1]

    rows = read_rows(os.path.join(str(tmp_path / "a"), "converge.csv"))
    assert [(r["level"], r["seed"]) for r in rows] == [("1", "0"), ("1", "1"), ("2", "0"), ("2", "1")]


@pytest.mark.slow
def test_default_converge_run_passes(tmp_path):
    out = str(tmp_path / "out")
    assert main(["converge", "--out", out, "--quiet"]) == EXIT_OK

    with open(os.path.join(out, "converge.manifest.json"), encoding="utf-8") as f:
        checks = json.load(f)["checks"]
    mean, se = checks["mean_rmse"], checks["standard_error"]
    assert list(mean) == ["1", "2", "3", "4"]
    assert mean["4"] < 0.5 * mean["1"]
    for lo, hi in zip("123", "234"):
        assert mean[hi] <= mean[lo] + 2.0 * (se[lo] ** 2 + se[hi] ** 2) ** 0.5
    assert len(read_rows(os.path.join(out, "converge.csv"))) == 40


def test_export_then_import(tmp_path):
    out = str(tmp_path / "out")
    assert main(["export", "--levels", "1", "--out", out, "--quiet"]) == EXIT_OK
    net_path = os.path.join(out, "grid16.q_net.json")
    assert os.path.exists(net_path)

    assert main(["import", "--net", net_path, "--out", out, "--quiet"]) == EXIT_OK
    row = read_rows(os.path.join(out, "import.csv"))[0]
    assert row["passed"] == "True"


def test_bad_levels_exit_with_usage(tmp_path):
    assert main(["mlfp-equiv", "--levels", "3..x", "--out", str(tmp_path)]) == EXIT_USAGE


@pytest.mark.parametrize("argv", [
    ["converge", "--budget", "1"],
    ["converge", "--seeds", "0"],
    ["converge", "--tol", "0"],
    ["converge", "--model", "missing.json"],
    ["export", "--budget", "1"],
    ["import", "--net", "missing.json"],
    ["maxnet-suite", "--beta", "1.0"],
    ["maxnet-suite", "--beta", "-0.5"],
    ["mlfp-equiv", "--budgets", "1..2"],
    ["mlfp-equiv", "--max-d", "0"],
    ["algebra-suite", "--cases", "0"],
])
def test_invalid_arguments_exit_with_usage(tmp_path, argv):
    out = tmp_path / "out"
    paths = {"missing.json": str(tmp_path / "missing.json")}
    argv = [paths.get(a, a) for a in argv]
    assert main(argv + ["--out", str(out), "--quiet"]) == EXIT_USAGE
    assert not out.exists()


def test_unknown_command():
    with pytest.raises(SystemExit) as e:
        main(["nonsense"])
    assert e.value.code == 2


def test_unreadable_model_is_a_runtime_error(tmp_path):
    model = tmp_path / "model.json"
    model.write_text('{"states": [[0.0]]', encoding="utf-8")
    argv = ["converge", "--model", str(model), "--out", str(tmp_path / "out"), "--quiet"]
    assert main(argv) == EXIT_ERROR
