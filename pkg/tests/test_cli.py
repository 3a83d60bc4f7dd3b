"""CLI entry points: exit codes and output files."""

import csv
import json

import pytest

from casplan.cli import EXIT_CONFIG, EXIT_OK, main
from casplan.harness import CSV_COLUMNS


def test_validate_packaged_domains(capsys):
    assert main(["validate", "--domain", "campus"]) == EXIT_OK
    assert "domain=campus" in capsys.readouterr().out
    assert main(["validate", "--domain", "av"]) == EXIT_OK
    assert "domain=av" in capsys.readouterr().out


def test_validate_missing_config_is_config_error(capsys):
    assert main(["validate", "--config", "/nope.yaml"]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_validate_domain_mismatch(tmp_path, capsys):
    p = tmp_path / "odd.yaml"
    p.write_text("domain: campus\n")
    assert main(["validate", "--domain", "av",
                 "--config", str(p)]) == EXIT_CONFIG
    capsys.readouterr()


def test_validate_broken_config(tmp_path, capsys):
    p = tmp_path / "broken.yaml"
    p.write_text("domain: campus\nmap: |\n  ###\n  #.#\n  ###\n")
    # valid YAML but missing required tables -> config error, not a crash
    assert main(["validate", "--config", str(p)]) == EXIT_CONFIG
    capsys.readouterr()


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--domain", "av", "--episodes", "3", "--trials", "2",
               "--seed", "5", "--out", str(out)])
    capsys.readouterr()
    assert rc == EXIT_OK
    with open(out / "metrics.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 1 + 3 * 2
    payload = json.loads((out / "summary.json").read_text())
    assert payload["trials"] == 2
    assert (out / "events.csv").exists()


def test_run_random_task_unsupported_for_av(tmp_path, capsys):
    rc = main(["run", "--domain", "av", "--task", "random", "--episodes", "2",
               "--trials", "1", "--seed", "0", "--out", str(tmp_path)])
    capsys.readouterr()
    assert rc == EXIT_CONFIG


def test_competence_dump(capsys):
    assert main(["competence", "--domain", "av"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("[competence]")
    assert "chi=" in out


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])
