import json
import subprocess
import sys

import numpy as np
import pytest

from nonmarkov.channel import dephasing_semigroup
from nonmarkov.cli import EXIT_OK, EXIT_PARTIAL, EXIT_VALIDATION, main
from nonmarkov.measure import nm_total
from nonmarkov.qcore import matrix_to_dict, max_entangled


def _write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_robustness_command(tmp_path):
    src = _write_json(tmp_path / "bell.json", matrix_to_dict(max_entangled(2).data, (2, 2)))
    out = tmp_path / "res.json"
    assert main(["robustness", src, "--out", str(out)]) == EXIT_OK
    res = json.loads(out.read_text())
    assert abs(res["value"] - 1) < 1e-6
    assert res["duality_difference"] < 1e-6
    assert "PPT" in res["relaxation"]


def test_robustness_needs_split(tmp_path):
    src = _write_json(tmp_path / "s.json", matrix_to_dict(np.eye(4) / 4))
    assert main(["robustness", src]) == EXIT_VALIDATION


def test_json_error_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dim": 4,\n  "re": [1, 2,,]}')
    assert main(["robustness", str(bad)]) == EXIT_VALIDATION
    err = capsys.readouterr().err
    assert "bad.json:2:" in err


def test_nm_command_writes_outputs(tmp_path):
    traj = dephasing_semigroup(0.3, np.linspace(0, 2, 6))
    src = tmp_path / "traj.json"
    traj.save(src)
    assert main(["nm", str(src), "--out", str(tmp_path / "o")]) == EXIT_OK
    csv = (tmp_path / "o" / "report.csv").read_text().splitlines()
    assert csv[0] == "time,rg_value,increment_flag" and len(csv) == 7
    summary = json.loads((tmp_path / "o" / "report.json").read_text())
    assert summary["total"] == 0.0 and summary["partial"] is False


def test_nm_partial_on_corrupted_channel(tmp_path):
    obj = dephasing_semigroup(0.3, np.linspace(0, 2, 5)).to_dict("choi")
    obj["channels"][3]["choi"]["re"][0][0] = 0.9
    src = _write_json(tmp_path / "t.json", obj)
    assert main(["nm", src, "--out", str(tmp_path)]) == EXIT_PARTIAL
    summary = json.loads((tmp_path / "report.json").read_text())
    assert summary["partial"] and summary["failed_samples"] == [3]


def test_nm_output_dir_from_environment(tmp_path, monkeypatch):
    traj = dephasing_semigroup(0.3, [0.0, 1.0])
    src = tmp_path / "traj.json"
    traj.save(src)
    monkeypatch.setenv("NONMARKOV_OUT", str(tmp_path / "env"))
    assert main(["nm", str(src), "--name", "x"]) == EXIT_OK
    assert (tmp_path / "env" / "x.csv").exists()


def test_nm_matches_library(tmp_path):
    traj = dephasing_semigroup(0.2, np.linspace(0, 3, 8))
    src = tmp_path / "traj.json"
    traj.save(src, form="choi")
    main(["nm", str(src), "--out", str(tmp_path)])
    rep = nm_total(traj)
    assert (tmp_path / "report.csv").read_text() == rep.to_csv()
    assert (tmp_path / "report.json").read_text() == rep.summary_json()


def test_bec_sweep_rejects_bad_input(tmp_path):
    assert main(["bec-sweep", "--values", "--tmax", "5", "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert main(["bec-sweep", "--sweep", "D", "--values", "2", "6", "--tmax", "5",
                 "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_bec_sweep_small(tmp_path):
    code = main(["bec-sweep", "--values", "0.01", "0.6", "--grid", "20", "--tmax", "31.4",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "sweep_ae.json").read_text())
    assert summary["series"][0]["crossover_bracket"] == [0.01, 0.6]
    assert (tmp_path / "sweep_ae_D4.csv").exists()
    assert (tmp_path / "sweep_ae_D4_long.csv").exists()


def test_nonpositive_tolerance_rejected(tmp_path):
    assert main(["nm", "x.json", "--tol", "0"]) == EXIT_VALIDATION


def test_missing_file():
    assert main(["nm", "/nonexistent/traj.json"]) == EXIT_VALIDATION


def test_verify_quick_subprocess(tmp_path):
    out = tmp_path / "v.json"
    proc = subprocess.run([sys.executable, "-m", "nonmarkov.cli", "verify", "--quick", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    doc = json.loads(out.read_text())
    assert doc["all_passed"]
    assert len(doc["checks"]) == 7


def test_robustness_product_state(tmp_path):
    rho = np.kron(np.diag([0.7, 0.3]), np.diag([0.4, 0.6]))
    src = _write_json(tmp_path / "prod.json", matrix_to_dict(rho, (2, 2)))
    out = tmp_path / "r.json"
    assert main(["robustness", src, "--method", "dual", "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["value"] < 1e-8


def test_robustness_rejects_non_psd(tmp_path, capsys):
    src = _write_json(tmp_path / "bad.json", matrix_to_dict(np.diag([0.75, 0.5, -0.25, 0.0]), (2, 2)))
    assert main(["robustness", src]) == EXIT_VALIDATION
    assert "validation error" in capsys.readouterr().err


def test_verify_with_weak_factor_reports(capsys):
    code = main(["verify", "--quick", "--factor", "d"])
    out = capsys.readouterr().out
    assert "continuity_bound_d" in out
    assert code in (EXIT_OK, EXIT_VALIDATION)
