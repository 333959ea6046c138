import json
import subprocess
import sys

import numpy as np
import pytest

from relaxman.workbench import io
from relaxman.workbench.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_model_builtin_and_file(capsys, tmp_path, toy3):
    code, out, _ = run(capsys, "validate-model", "builtin:toy3")
    assert code == 0 and json.loads(out)["passed"]
    path = tmp_path / "toy3.json"
    path.write_text(toy3.to_json())
    report = tmp_path / "report.json"
    code, _, _ = run(capsys, "validate-model", str(path), "-o", str(report))
    assert code == 0
    man = json.loads((tmp_path / "report.json.manifest.json").read_text())
    assert man["input_hashes"]["model"] == io.file_hash(path)
    assert json.loads(report.read_text())["manifest"] == man["hash"]


def test_validate_model_failure_exit_code(capsys, tmp_path, toy3):
    path = tmp_path / "bad.json"
    path.write_text(toy3.replace(delta_plus=2.0).to_json())
    code, _, _ = run(capsys, "validate-model", str(path))
    assert code == 1


def test_reduce_then_spectral(capsys, tmp_path):
    red = tmp_path / "red.json"
    assert run(capsys, "reduce", "builtin:toy3", "--side", "plus", "-o", str(red))[0] == 0
    d = json.loads(red.read_text())
    np.testing.assert_allclose(d["Gamma"], [[0.46, 0], [0, -0.3]], atol=1e-14)
    assert d["provenance"]["model"] == "builtin:toy3"
    code, out, _ = run(capsys, "spectral", str(red))
    assert code == 0
    np.testing.assert_allclose(json.loads(out)["H"], [-1 / 0.46, 1 / 0.3])


def test_resolvent_scan_csv(capsys, tmp_path):
    out_csv = tmp_path / "scan.csv"
    code, _, _ = run(capsys, "resolvent-scan", "builtin:scalar", "--omega-max", "10", "--points", "21",
                     "-o", str(out_csv))
    assert code == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "omega,norm_R,norm_R_times_Gamma"
    assert len(lines) == 22


def test_verify_linearization(capsys):
    code, out, _ = run(capsys, "verify-linearization", "builtin:toy3", "--eta", "0.01", "--points", "401")
    assert code == 0 and json.loads(out)["passed"]
    code, out, _ = run(capsys, "verify-linearization", "builtin:toy3", "--eta", "0", "--points", "401")
    assert code == 1
    assert "omega=[0.0]" in json.loads(out)["reason"]


def test_example47(capsys):
    code, out, _ = run(capsys, "example47", "--modes", "4")
    d = json.loads(out)
    assert code == 0 and d["measured_sup"] >= d["bound"]


def test_solve_then_apply_and_fit(capsys, tmp_path):
    traj = tmp_path / "u.csv"
    code, out, _ = run(capsys, "solve-manifold", "builtin:coupled-saddle", "--v0", "[0.04, 0]",
                       "--eps1", "0.1", "--eps2", "1", "--trajectory", str(traj))
    assert code == 0
    d = json.loads(out)
    assert d["J"][1] == pytest.approx(0.04 ** 2 / 3, abs=1e-7)
    g = io.read_trajectory_csv(traj)
    assert g.derivs is not None and g.d == 2
    code, out, _ = run(capsys, "decay-fit", str(traj), "--window", "2", "5", "--min-rate", "0.9")
    assert code == 0 and json.loads(out)["rate"] == pytest.approx(1.0, abs=1e-3)
    code, _, _ = run(capsys, "decay-fit", str(traj), "--window", "2", "5", "--min-rate", "1.5")
    assert code == 1
    km = tmp_path / "km.csv"
    code, out, _ = run(capsys, "apply-multiplier", "builtin:coupled-saddle", str(traj), "--modified",
                       "--alpha", "0.25", "-o", str(km))
    assert code == 0 and km.exists() and (tmp_path / "km.csv.manifest.json").exists()


def test_chart_sweep_is_seeded(capsys):
    args = ["chart-sweep", "builtin:coupled-saddle", "--directions", "2", "--eps1", "0.1", "--eps2", "1",
            "--seed", "3"]
    a = run(capsys, *args)[1]
    b = run(capsys, *args)[1]
    assert a == b and a.startswith("v0,norm_J,rate")


def test_manifest_hash_is_deterministic(capsys, tmp_path):
    hashes = []
    for i in range(2):
        code, out, _ = run(capsys, "example47", "--modes", "2", "--seed", "5")
        hashes.append(json.loads(out)["manifest"])
    assert hashes[0] == hashes[1]


def test_usage_and_io_errors(capsys, tmp_path):
    assert run(capsys, "spectral", str(tmp_path / "missing.json"))[0] == 2
    code, _, err = run(capsys, "no-such-command")
    assert code == 2 and "invalid choice" in err
    assert run(capsys, "example47")[0] == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "relaxman", "example47", "--modes", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["N"] == 1


def test_threads_env(monkeypatch):
    monkeypatch.setenv("KM_THREADS", "3")
    assert io.worker_count() == 3
    monkeypatch.setenv("KM_THREADS", "junk")
    assert io.worker_count() >= 1
