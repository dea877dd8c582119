import csv
import subprocess
import sys

import pytest
import yaml

from wtmrd.cli import EXIT_CONFIG, EXIT_OK, main
from wtmrd.metrics import REPORT_COLUMNS

SMALL = ["--nodes", "10", "--sim-time", "10", "--seed", "3"]


def report_row(path):
    with open(path / "report.csv", newline="") as fh:
        return next(csv.DictReader(fh))


def echoed(path):
    return yaml.safe_load((path / "config.echo.yaml").read_text())


def test_minimal_run_writes_a_report(tmp_path, capsys):
    assert main(["run", *SMALL, "--out", str(tmp_path)]) == EXIT_OK
    row = report_row(tmp_path)
    assert list(row) == REPORT_COLUMNS
    assert "ADR" in capsys.readouterr().out


def test_bare_flags_mean_run(tmp_path):
    assert main([*SMALL, "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "packets.csv").exists()


def test_repeat_invocations_agree(tmp_path):
    main(["run", *SMALL, "--out", str(tmp_path / "a")])
    main(["run", *SMALL, "--out", str(tmp_path / "b")])
    a, b = report_row(tmp_path / "a"), report_row(tmp_path / "b")
    for col in ("adt_ms", "per_node_classify_ms"):
        a.pop(col), b.pop(col)
    assert a == b
    assert (tmp_path / "a" / "packets.csv").read_bytes() == (tmp_path / "b" / "packets.csv").read_bytes()


def test_multiple_runs_get_their_own_directories(tmp_path):
    assert main(["run", *SMALL, "--runs", "2", "--out", str(tmp_path)]) == EXIT_OK
    assert sorted(p.name for p in tmp_path.iterdir()) == ["run-001", "run-002"]
    assert [echoed(tmp_path / d)["seed"] for d in ("run-001", "run-002")] == [3, 4]


@pytest.mark.parametrize("argv, needle", [
    (["run", "--malicious", "0.6"], "malicious"),
    (["run", "--attack", "wormhole"], "attack"),
    (["run", "--variant", "oracle"], "variant"),
    (["sweep", "--values", ""], "values"),
    (["sweep", "--values", "100,50"], "ascending"),
    (["sweep", "--variants", "magic"], "variants"),
])
def test_configuration_errors_exit_one(argv, needle, tmp_path, capsys):
    assert main([*argv, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert needle in capsys.readouterr().err
    assert not list(tmp_path.iterdir())


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as info:
        main(["run", "--nodes", "many"])
    assert info.value.code == EXIT_CONFIG


def test_bad_config_file_names_the_line(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("scenario:\n  nodes: 20\n  colour: red\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "bad.yaml:3:" in capsys.readouterr().err


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "s.yaml"
    cfg.write_text("scenario:\n  nodes: 40\n  seed: 11\n  sim_time: 10\n")
    assert main(["run", "--config", str(cfg), "--nodes", "12", "--out", str(tmp_path / "o")]) == EXIT_OK
    assert report_row(tmp_path / "o")["total_nodes"] == "12"
    assert (echoed(tmp_path / "o")["nodes"], echoed(tmp_path / "o")["seed"]) == (12, 11)


def test_sweep_counts_and_tables(tmp_path, capsys):
    out = tmp_path / "sw"
    code = main(["--sweep", "nodes", "--values", "20,30", "--variants", "wtmrd", "--runs", "2",
                 "--sim-time", "20", "--out", str(out)])
    assert code == EXIT_OK
    assert "4 runs" in capsys.readouterr().out
    stems = ["attack_detection_rate", "attack_detection_time", "data_security_level", "delay"]
    for stem in stems:
        for name in (f"{stem}.csv", f"{stem}_std.csv"):
            lines = (out / name).read_text().splitlines()
            assert lines[0] == "nodes,wtmrd"
            assert [ln.split(",")[0] for ln in lines[1:]] == ["20", "30"]
    assert len((out / "cells.csv").read_text().splitlines()) == 1 + 4


def test_plot_renders_each_metric(tmp_path):
    pytest.importorskip("matplotlib")
    out = tmp_path / "sw"
    main(["sweep", "--sweep", "packets", "--values", "10,20", "--variants", "wtmrd,noclass",
          "--sim-time", "30", "--nodes", "20", "--out", str(out)])
    assert main(["plot", str(out), "--out", str(tmp_path / "fig")]) == EXIT_OK
    assert len(list((tmp_path / "fig").glob("*.png"))) == 4


def test_plot_of_empty_directory_is_an_error(tmp_path):
    pytest.importorskip("matplotlib")
    assert main(["plot", str(tmp_path)]) == EXIT_CONFIG


def test_console_entry_point_help():
    proc = subprocess.run([sys.executable, "-m", "wtmrd.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sweep" in proc.stdout
