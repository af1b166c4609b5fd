"""Command-line behaviour: exit codes, determinism and golden reports."""

import json
from pathlib import Path

import pytest

from bvjet import cli

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("name", ["F1", "F2", "F3", "F4"])
@pytest.mark.parametrize("fmt, ext", [("text", "txt"), ("structured", "json")])
def test_all_matches_golden(capsys, name, fmt, ext):
    code, out, _ = run(capsys, "all", f"{name}.model", "--format", fmt)
    assert out == (GOLDEN / f"all_{name}.{ext}").read_text(encoding="utf-8")
    assert code == (1 if name == "F4" else 0)


def test_noether_f2_passes(capsys):
    code, out, _ = run(capsys, "noether", "F2.model")
    assert code == 0 and "[FAIL]" not in out


def test_master_staged_failure_prints_witness(capsys):
    code, out, _ = run(capsys, "master", "F3.model", "--stage", "S0+S1")
    assert code == 1
    assert "stage: S0+S1" in out
    assert "witness: " in out


def test_precondition_failures_are_reported(capsys):
    code, out, _ = run(capsys, "kt", "F4")
    assert code == 1
    assert "precondition failed" in out


def test_structured_document(capsys):
    code, out, _ = run(capsys, "differential", "F1", "--format", "structured", "--verbosity", "full")
    doc = json.loads(out)
    assert code == 0
    assert list(doc) == ["model", "command", "checks", "deviations", "runtime_ms"]
    assert doc["runtime_ms"] is None
    rows = [r for c in doc["checks"] if "terms" in c for r in c["terms"]]
    assert {r["generator"] for r in rows} == {"X", "eta", "gamma", "X+", "eta+", "gamma+"}


def test_timing_is_opt_in(capsys):
    _, out, _ = run(capsys, "check-jacobi", "F1", "--format", "structured", "--timing")
    assert isinstance(json.loads(out)["runtime_ms"], float)


def test_repeat_runs_identical(capsys):
    first = run(capsys, "all", "F3", "--verbosity", "full")
    second = run(capsys, "all", "F3", "--verbosity", "full")
    assert first == second


def test_model_path(capsys, tmp_path):
    p = tmp_path / "lin.model"
    p.write_text("dim = 3\nalpha 1 2 = x3\nalpha 1 3 = -x2\nalpha 2 3 = x1\n")
    code, out, _ = run(capsys, "check-jacobi", str(p))
    assert code == 0 and out.startswith("model: lin ")


@pytest.mark.parametrize("argv", [
    ["frobnicate", "F1"],
    ["all"],
    ["all", "F1", "--stage", "S1"],
    ["all", "nowhere.model"],
])
def test_usage_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err


def test_malformed_model_exit_2(capsys, tmp_path):
    p = tmp_path / "bad.model"
    p.write_text("dim = 2\nalpha 1 2 = x1 +* x2\n")
    code, _, err = run(capsys, "all", str(p))
    assert code == 2
    assert f"{p}:2:" in err
