import json

import pytest

from lgekf.cli import EXIT_CONFIG, EXIT_OK, main


def test_run_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"trajectory": {"duration": 1.0}, "filters": {"variants": ["L-FO", "R-FO"]}}))
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--trials", "1", "--out", str(out), "--seed", "4"]) == EXIT_OK
    assert {p.name for p in out.iterdir()} == {
        "manifest.json",
        "pairwise_mae.csv",
        "vs_truth_mae.csv",
        "error_series_total.csv",
        "error_series_position.csv",
        "error_series_orientation.csv",
    }
    assert "L-FO" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv",
    [["run", "--variants", "L-FO,Q-FO"], ["run", "--trials", "0"], ["run", "--config", "/nonexistent.json"]],
)
def test_config_errors(argv, capsys):
    assert main(argv) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_simulate(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"trajectory": {"duration": 1.0}}))
    out = tmp_path / "truth.csv"
    assert main(["simulate", "--config", str(cfg), "--trial", "2", "--out", str(out)]) == EXIT_OK
    assert len(out.read_text().splitlines()) == 1002


def test_verify(capsys):
    assert main(["verify", "--cases", "20"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and "checks passed" in out


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        main([])
