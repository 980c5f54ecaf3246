import json
import subprocess
import sys

import pytest

from nudgeda.cli import main
from nudgeda.harness import RunReport

SMALL = ["--set", "N=200", "--set", "N_ob=50", "--set", "T=0.3"]


def test_run_preset(tmp_path, capsys):
    assert main(["run", "--preset", "scalar-sec3.1", *SMALL, "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("scalar:") and "force_err_rel_L1_c0" in out
    report = RunReport.read(tmp_path / "report.json")
    assert report.config["parameters"]["N"] == 200 and report.missing_files() == []


def test_run_config_file(tmp_path, capsys):
    cfg = {"schema_version": 1, "experiment": "scalar",
           "parameters": {"N": 200, "N_ob": 50, "T": 0.2}, "output_dir": str(tmp_path / "a")}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(path), "--set", "mu=4"]) == 0
    report = RunReport.read(tmp_path / "a" / "report.json")
    assert report.config["parameters"]["mu"] == 4.0


def test_seed_env(tmp_path, monkeypatch):
    monkeypatch.setenv("NUDGEDA_SEED", "42")
    assert main(["run", "--preset", "scalar-sec3.1", *SMALL, "--set", "seed=3",
                 "--out", str(tmp_path)]) == 0
    assert RunReport.read(tmp_path / "report.json").config["parameters"]["seed"] == 42
    monkeypatch.setenv("NUDGEDA_SEED", "abc")
    assert main(["run", "--preset", "scalar-sec3.1", *SMALL, "--out", str(tmp_path)]) == 2


def test_invalid_config_exit_code(tmp_path, capsys):
    assert main(["run", "--preset", "scalar-sec3.1", "--set", "mu=-1", "--out", str(tmp_path)]) == 2
    assert "invalid configuration" in capsys.readouterr().err
    assert main(["run", "--preset", "scalar-sec3.1", "--set", "bogus=1", "--out", str(tmp_path)]) == 2
    missing = tmp_path / "cfg.json"
    missing.write_text(json.dumps({"experiment": "scalar"}))
    assert main(["run", "--config", str(missing)]) == 2


def test_solver_error_exit_code(tmp_path, capsys):
    code = main(["run", "--preset", "rte-thin-sec4.3", "--set", "N=60", "--set", "N_ref=60",
                 "--set", "N_ob=20", "--set", "T=0.1", "--set", "kinetic_dt_ratio=3",
                 "--out", str(tmp_path)])
    assert code == 1
    err = capsys.readouterr().err
    assert "rte-moments experiment failed" in err and "dt/dx" in err
    assert main(["plotdata", "--report", str(tmp_path / "none.json"), "--what", "error-history"]) == 1


def test_convergence_cli(tmp_path, capsys):
    assert main(["convergence", "--kind", "weno", "--levels", "3", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "rate order" in out
    assert (tmp_path / "convergence_weno.csv").exists()
    assert main(["convergence", "--kind", "weno", "--levels", "2", "--out", str(tmp_path)]) == 2


def test_plotdata_cli(tmp_path, capsys):
    assert main(["run", "--preset", "scalar-sec3.1", "--set", "N=200", "--set", "N_ob=50",
                 "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    assert main(["plotdata", "--report", str(tmp_path / "report.json"), "--what",
                 "state-snapshots", "--out", str(tmp_path / "p")]) == 0
    printed = capsys.readouterr().out.split()
    assert len(printed) == 4
    assert main(["plotdata", "--report", str(tmp_path / "report.json"), "--what",
                 "moment-panels"]) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "nudgeda", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "plotdata" in res.stdout


def test_argparse_rejects_unknown_preset():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--preset", "nope"])
    assert exc.value.code == 2
