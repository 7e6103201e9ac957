import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from stabfn.cli import format_csv, main, write_atomic

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(tmp_path, *args):
    csv, js = tmp_path / "out.csv", tmp_path / "out.json"
    code = main([*args, "--out-csv", str(csv), "--out-json", str(js)])
    return code, csv, js


def test_csv_format():
    text = format_csv(["a", "b", "c"], [[1, 0.1, True], [np.int64(2), np.float64(1 / 3), np.bool_(False)]])
    assert text == "a,b,c\n1,0.1,true\n2,0.3333333333333333,false\n"


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "sub" / "f.txt"
    write_atomic(str(p), "one")
    write_atomic(str(p), "two")
    assert p.read_text() == "two"
    assert [x.name for x in p.parent.iterdir()] == ["f.txt"]


def test_norms_run_passes(tmp_path, capsys):
    code, csv, js = run(tmp_path, "norms", "--preset", "cp1", "--k", "1:3:1")
    assert code == 0
    summary = json.loads(js.read_text())
    assert summary["passed"] and summary["experiment"] == "norms"
    assert all(a["passed"] for a in summary["assertions"])
    assert set(summary) == {"stabfn_version", "experiment", "config", "assertions", "passed", "result"}
    assert csv.read_text().count("\n") == 1 + 2 + 3 + 4
    assert "PASS" in capsys.readouterr().out


def test_failed_assertion_exits_1(tmp_path, capsys):
    code, _, js = run(tmp_path, "asymptotics", "--experiment", "laplace", "--preset", "cp1",
                      "--tol", "deviation=1e-6")
    assert code == 1
    assert not json.loads(js.read_text())["passed"]
    assert "FAIL" in capsys.readouterr().out


def test_config_errors_exit_2(tmp_path, capsys):
    code, csv, _ = run(tmp_path, "run", "--experiment", "halfform", "--preset", "cp1", "--k", "8:4:1")
    assert code == 2
    assert "grid.k" in capsys.readouterr().err
    assert not csv.exists()
    assert main(["run", "--experiment", "norms", "--weights", "[[1],[1]]", "--level", "[1"]) == 2
    assert "model.level" in capsys.readouterr().err
    assert main(["psi", "--experiment", "psi-cross-check", "--preset", "cp1"]) == 2
    assert "seed" in capsys.readouterr().err
    assert main(["psi", "--preset", "torus9", "--point", "[1, 1]"]) == 2
    assert main(["run"]) == 2


def test_numerical_error_exits_3(tmp_path, capsys):
    # the ray (1, 0) is on the boundary of the polytope
    code, _, _ = run(tmp_path, "asymptotics", "--experiment", "halfform", "--preset", "cp1",
                     "--option", "ray=[1.0, 0.0]")
    assert code == 3
    assert "interior" in capsys.readouterr().err
    assert main(["psi", "--preset", "hirzebruch1", "--point", "[1, 0, 1, 0]"]) == 3


def test_single_point_psi(capsys):
    assert main(["psi", "--preset", "cp1", "--point", "[[1, 0], [0, 2]]", "--method", "closed-form"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["psi"] == pytest.approx(-5 + 1 + np.log(5))


def test_list_presets(capsys):
    assert main(["list-presets"]) == 0
    out = capsys.readouterr().out
    assert "cp{n}" in out and "hirzebruch{n}" in out


def test_rerun_is_byte_identical(tmp_path):
    args = ["run", "--config", str(CONFIGS / "matrix_psi_gr24.toml"), "--samples", "20"]
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    assert run(a, *args)[0] == 0
    assert run(b, *args)[0] == 0
    assert (a / "out.csv").read_bytes() == (b / "out.csv").read_bytes()
    assert (a / "out.json").read_bytes() == (b / "out.json").read_bytes()


def test_jobs_do_not_change_output(tmp_path):
    args = ["psi", "--experiment", "psi-cross-check", "--preset", "cp2", "--seed", "4", "--samples", "12"]
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    assert run(a, *args)[0] == 0
    assert run(b, *args, "--jobs", "2")[0] == 0
    assert (a / "out.csv").read_bytes() == (b / "out.csv").read_bytes()


def test_log_level_from_environment(tmp_path):
    import os

    cmd = [sys.executable, "-m", "stabfn", "norms", "--preset", "cp1", "--k", "1:1:1"]
    env = dict(os.environ)
    env.pop("STABFN_LOG", None)
    quiet = subprocess.run(cmd, capture_output=True, text=True, env=env, cwd=tmp_path)
    loud = subprocess.run(cmd, capture_output=True, text=True, env=env | {"STABFN_LOG": "info"}, cwd=tmp_path)
    assert quiet.returncode == loud.returncode == 0
    assert "running norms" not in quiet.stderr
    assert "INFO stabfn.experiments: running norms" in loud.stderr


def test_config_file_with_flag_override(tmp_path):
    code, _, js = run(tmp_path, "run", "--config", str(CONFIGS / "chain_eigen_n4.toml"), "--samples", "3")
    assert code == 0
    summary = json.loads(js.read_text())
    assert summary["config"]["samples"] == 3
    assert summary["config"]["model"]["n"] == 4
