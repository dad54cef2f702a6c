import json
import subprocess
import sys

import numpy as np
import pytest

from semigroup_models import numerics as nx
from semigroup_models.cli import EXIT_FAIL, EXIT_IO, EXIT_PASS, EXIT_PRECONDITION, EXIT_USAGE, main, run


def strip_runtime(report):
    out = dict(report)
    out["checks"] = [{k: v for k, v in c.items() if k != "runtime_ms"} for c in report["checks"]]
    return out


def assert_schema(report, suite):
    assert set(report) == {"schema", "suite", "seed", "truncation", "checks", "pass"}
    assert report["schema"] == 1 and report["suite"] == suite
    assert set(report["truncation"]) == {"N", "M", "tol"}
    names = [c["name"] for c in report["checks"]]
    assert names == sorted(names) and len(set(names)) == len(names)
    for c in report["checks"]:
        assert set(c) == {"name", "residual", "tolerance", "pass", "runtime_ms"}
        assert isinstance(c["pass"], bool)
    assert report["pass"] == all(c["pass"] for c in report["checks"])


@pytest.mark.parametrize("suite", ["roundtrip", "commutant", "normal", "wold", "dilate", "tensor-q"])
def test_each_suite_passes_on_defaults(suite):
    code, report, _ = run([suite, "--cases", "3"])
    assert code == EXIT_PASS, [c for c in report["checks"] if not c["pass"]]
    assert_schema(report, suite)
    assert all(c["name"].startswith(suite + ".") for c in report["checks"])


def test_reports_are_deterministic():
    a = run(["normal", "--seed", "3", "--cases", "4"])[1]
    b = run(["normal", "--seed", "3", "--cases", "4"])[1]
    assert strip_runtime(a) == strip_runtime(b)
    c = run(["normal", "--seed", "4", "--cases", "4"])[1]
    assert strip_runtime(a) != strip_runtime(c)


def test_out_file(tmp_path):
    path = tmp_path / "report.json"
    assert main(["tensor-q", "--out", str(path)]) == EXIT_PASS
    report = json.loads(path.read_text())
    assert_schema(report, "tensor-q")


def test_in_file_roundtrip(tmp_path):
    t = 0.5 * nx.random_matrix(4, np.random.default_rng(0))
    t /= nx.op_norm(t) * 1.5
    path = tmp_path / "t.json"
    path.write_text(json.dumps(nx.matrix_to_dict(t)))
    code, report, _ = run(["roundtrip", "--in", str(path)])
    assert code == EXIT_PASS


def test_in_file_normal_tuple(tmp_path):
    path = tmp_path / "tuple.json"
    mats = [np.diag([0.2, -0.5j]), np.diag([0.1, 0.3])]
    path.write_text(json.dumps({"matrices": [nx.matrix_to_dict(m) for m in mats]}))
    assert run(["normal", "--in", str(path)])[0] == EXIT_PASS


def test_precondition_exit_code(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"matrices": [nx.matrix_to_dict(np.array([[0, 1], [0, 0]]))]}))
    code, report, msg = run(["normal", "--in", str(path)])
    assert code == EXIT_PRECONDITION and report is None and "normal" in msg


def test_truncation_too_small_is_a_precondition_error():
    code, _, msg = run(["dilate", "--trunc", "8", "--tol", "1e-12"])
    assert code == EXIT_PRECONDITION and "N >=" in msg


def test_failing_check_exits_one():
    # a tolerance below roundoff makes the law checks fail honestly
    code, report, msg = run(["roundtrip", "--tol", "1e-300", "--cases", "2"])
    assert code == EXIT_FAIL and not report["pass"] and "failed:" in msg


@pytest.mark.parametrize("argv", [
    ["nonsense"],
    ["roundtrip", "--dim", "0"],
    ["roundtrip", "--times", "a,b"],
    ["roundtrip", "--times", "-1"],
    ["roundtrip", "--bogus"],
    ["wold", "--n", "4"],
])
def test_usage_errors(argv):
    assert run(argv)[0] == EXIT_USAGE


def test_missing_input_file(tmp_path):
    assert run(["roundtrip", "--in", str(tmp_path / "missing.json")])[0] == EXIT_IO


def test_unwritable_output(tmp_path):
    assert run(["tensor-q", "--out", str(tmp_path / "no" / "dir.json")])[0] == EXIT_IO


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "semigroup_models", "tensor-q"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert_schema(json.loads(proc.stdout), "tensor-q")
    proc = subprocess.run([sys.executable, "-m", "semigroup_models", "--nope"], capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE and "usage error" in proc.stderr
