"""Command-line entry point: exit codes, flag precedence, artifact wiring."""

import json

import pytest

from spinflow import cli
from spinflow.exceptions import NumericalError


def test_dynamics_end_to_end(tmp_path, capsys):
    out = tmp_path / "run"
    rc = cli.main(
        ["dynamics", "--model", "xy", "--seed", "3", "--out", str(out),
         "--config", str(_write(tmp_path, "T = 0.01\nrecord_every = 5\n"))]
    )
    assert rc == 0
    assert (out / "metadata.json").exists()
    text = capsys.readouterr().out
    assert "dynamics" in text and str(out) in text
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config"]["model"] == "xy"
    assert meta["config"]["seed"] == 3


def _write(tmp_path, body):
    f = tmp_path / "cli.cfg"
    f.write_text(body)
    return f


def test_flags_override_config_file(tmp_path):
    cfg = _write(tmp_path, "seed = 1\nT = 0.01\nrecord_every = 5\n")
    out = tmp_path / "o"
    assert cli.main(["dynamics", "--config", str(cfg), "--seed", "9",
                     "--out", str(out)]) == 0
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config"]["seed"] == 9


def test_missing_config_file_is_a_usage_error(tmp_path, capsys):
    rc = cli.main(["dynamics", "--config", str(tmp_path / "nope.cfg")])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_bad_config_content_is_a_usage_error(tmp_path, capsys):
    cfg = _write(tmp_path, "model = ising\n")
    rc = cli.main(["dynamics", "--config", str(cfg), "--out", str(tmp_path / "z")])
    assert rc == 2
    assert "ising" in capsys.readouterr().err


def test_unknown_key_for_scenario_is_a_usage_error(tmp_path, capsys):
    cfg = _write(tmp_path, "dt_ref_factor = 8\n")
    rc = cli.main(["validate", "--config", str(cfg)])
    assert rc == 2
    assert "dt_ref_factor" in capsys.readouterr().err


def test_numerical_failure_exit_code(monkeypatch, capsys):
    def boom(cfg):
        raise NumericalError("energy diverged")

    monkeypatch.setattr(cli, "run_scenario", boom)
    rc = cli.main(["dynamics"])
    assert rc == 3
    assert "energy diverged" in capsys.readouterr().err


def test_failed_validation_exit_code(monkeypatch, capsys):
    fake = {
        "scenario": "validate",
        "passed": False,
        "checks": {"drift": {"passed": False, "max_abs_z": 9.0}},
        "output_dir": "runs/validate",
    }
    monkeypatch.setattr(cli, "run_scenario", lambda cfg: fake)
    rc = cli.main(["validate"])
    assert rc == 4
    out = capsys.readouterr().out
    assert "FAIL" in out


def test_workers_defaults_to_all_cores(monkeypatch):
    seen = {}

    def capture(cfg):
        seen["workers"] = cfg.workers
        return {"scenario": "conv_dt", "points": [], "slope": 0.0, "r_squared": 1.0,
                "output_dir": "x"}

    monkeypatch.setattr(cli, "run_scenario", capture)
    monkeypatch.setattr(cli.os, "cpu_count", lambda: 6)
    assert cli.main(["conv-dt"]) == 0
    assert seen["workers"] == 6


def test_workers_flag_wins_over_cpu_count(monkeypatch):
    seen = {}

    def capture(cfg):
        seen["workers"] = cfg.workers
        return {"scenario": "conv_dt", "points": [], "slope": 0.0, "r_squared": 1.0,
                "output_dir": "x"}

    monkeypatch.setattr(cli, "run_scenario", capture)
    monkeypatch.setattr(cli.os, "cpu_count", lambda: 6)
    assert cli.main(["conv-dt", "--workers", "2"]) == 0
    assert seen["workers"] == 2


def test_subcommand_is_required(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 2
