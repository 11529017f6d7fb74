from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from commutekit import corpus
from commutekit.cli import main
from commutekit.explorer import bigstep

from conftest import load_prog

SCHEMAS = Path(__file__).resolve().parent.parent / "docs" / "schemas"


def cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def cli_json(capsys, cmd, *argv):
    code, out, _ = cli(capsys, cmd, *argv, "--json")
    data = json.loads(out)
    schema = json.loads((SCHEMAS / f"{cmd}.schema.json").read_text())
    jsonschema.validate(data, schema)
    return code, data


def test_run_threaded(capsys):
    code, out, _ = cli(capsys, "run", "threaded")
    assert code == 0 and out.split() == ["x=3", "y=1"]


def test_run_accepts_a_path(capsys, tmp_path):
    f = tmp_path / "p.vcy"
    f.write_text("// @domain x:int[0..1]\n// @init x=1\nx = x + 1;\n")
    code, out, _ = cli(capsys, "run", str(f))
    assert code == 0 and out.strip() == "x=2"


def test_init_override(capsys):
    code, out, _ = cli(capsys, "run", "counter", "--init", "c=1, x=0, y=1")
    assert code == 0 and "c=2" in out.split()


@pytest.mark.parametrize("cmd,args", [
    ("run", ["threaded"]),
    ("explore", ["nested", "--initial-only"]),
    ("check", ["nested"]),
    ("verify", ["dict", "--mode", "oracle"]),
    ("infer", ["counter", "--mode", "oracle"]),
    ("transform", ["counter"]),
    ("sites", ["nested"]),
])
def test_json_outputs_match_schemas(capsys, cmd, args):
    code, _ = cli_json(capsys, cmd, *args)
    assert code == 0


def test_check_nested_counterexample(capsys):
    _, data = cli_json(capsys, "check", "nested")
    ce = data["counterexample"]
    assert ce["final"] == {"x": 0, "y": 1}
    assert ce["adapted_serial"] and not ce["scoped_serial"]


def test_check_counter_after_transform(capsys):
    code, out, _ = cli(capsys, "check", "counter", "--transform", "auto", "--property", "main-theorem")
    assert code == 0 and "FAIL" not in out


def test_verify_text(capsys):
    code, out, _ = cli(capsys, "verify", "simple", "--condition", "c > a", "--mode", "oracle")
    assert code == 0 and "VALID" in out


def test_verify_invalid_reports_witness(capsys):
    _, data = cli_json(capsys, "verify", "simple", "--condition", "true", "--mode", "oracle")
    (r,) = data["results"]
    assert r["status"] == "invalid" and r["witness"]


def test_transform_writes_lock_sidecar(capsys, tmp_path):
    out = tmp_path / "c.vcy"
    code, _, _ = cli(capsys, "transform", "counter", "--out", str(out))
    assert code == 0
    assert "lock(1)" in out.read_text()
    assert json.loads((tmp_path / "c.vcy.locks.json").read_text()) == {"1": 0}


def test_seeded_trace_replay(capsys, tmp_path):
    t1, t2 = tmp_path / "a.trace", tmp_path / "b.trace"
    cli(capsys, "run", "nested", "--seed", "7", "--trace", str(t1))
    cli(capsys, "run", "nested", "--choices", str(t1), "--trace", str(t2))
    assert t1.read_bytes() == t2.read_bytes()


def test_force_seq_matches_seq(capsys):
    prog, spec = load_prog(corpus.source("nested"))
    (want,) = bigstep(prog.body, spec.initial_state(), "seq").finals
    _, data = cli_json(capsys, "run", "nested", "--workers", "2", "--force-seq")
    assert data["final"] == want.bindings()


# -- exit codes --------------------------------------------------------------------------


def test_parse_error_exit_1(capsys, tmp_path):
    f = tmp_path / "bad.vcy"
    f.write_text("x = ;")
    code, _, err = cli(capsys, "run", str(f))
    assert code == 1 and "error" in err


def test_missing_file_exit_1(capsys):
    code, _, _ = cli(capsys, "run", "/nonexistent/file.vcy")
    assert code == 1


def test_bad_domain_exit_1(capsys):
    code, _, _ = cli(capsys, "explore", "counter", "--domain", "c:int[2..1]")
    assert code == 1


def test_usage_error_exit_1(capsys):
    with pytest.raises(SystemExit) as info:
        main(["run"])
    assert info.value.code == 1


def test_runtime_fault_exit_2(capsys, tmp_path):
    f = tmp_path / "div.vcy"
    f.write_text("// @domain x:int[0..0]\nx = 1 / x;\n")
    code, _, err = cli(capsys, "run", str(f))
    assert code == 2 and "division by zero" in err


def test_deadlock_exit_3(capsys, tmp_path):
    f = tmp_path / "dl.vcy"
    f.write_text("// @domain x:int[0..0]\nlock(0); lock(0);\n")
    code, _, _ = cli(capsys, "run", str(f))
    assert code == 3


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "commutekit", "run", "threaded"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.split() == ["x=3", "y=1"]
