import json
import subprocess
import sys

import pytest

from proxtd.cli import main


def test_run_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["run", "--domain", "baird", "--algo", "gtd2", "--algo", "gtd2_mp", "--steps", "200",
                 "--runs", "2", "--seed", "1", "--out", str(out)])
    assert code == 0
    assert {p.name for p in out.iterdir()} == {"curves.csv", "summary.csv", "config.json"}
    config = json.loads((out / "config.json").read_text())
    assert config["algorithms"] == ["gtd2", "gtd2_mp"] and config["seed"] == 1
    assert "gtd2_mp" in capsys.readouterr().out


def test_run_from_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"domain": "baird", "algorithms": ["td0"], "steps": 50, "runs": 1, "log_every": 25}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert len((tmp_path / "o" / "curves.csv").read_text().splitlines()) == 1 + 3


def test_bad_config_key_returns_error(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "bogus" in capsys.readouterr().err


def test_check_bounds_and_report(tmp_path, capsys):
    out = tmp_path / "b"
    assert main(["check-bounds", "--domain", "chain50", "--n", "1000", "--out", str(out)]) == 0
    assert (out / "bounds.csv").exists()
    capsys.readouterr()
    assert main(["report", "--in", str(out)]) == 0
    assert "M_star" in capsys.readouterr().out


def test_report_missing_directory(tmp_path, capsys):
    assert main(["report", "--in", str(tmp_path / "nothing")]) == 1
    assert "no summary.csv" in capsys.readouterr().err


def test_sweep(tmp_path, capsys):
    assert main(["sweep", "--domain", "baird", "--algo", "gtd2", "--steps", "100", "--runs", "1",
                 "--values", "0.001", "0.01", "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "sweep.csv").read_text().splitlines()) == 3


def test_parser_rejects_unknown_algorithm():
    with pytest.raises(SystemExit):
        main(["run", "--algo", "sarsa"])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "proxtd", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "check-bounds" in proc.stdout
