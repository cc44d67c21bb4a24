"""Command-line interface: exit codes, CSV output, determinism."""

import subprocess
import sys

from ccbox import cli
from ccbox.acceptance import NON_HORMANDER_YAML


def test_table_builtin_exits_zero(capsys):
    assert cli.main(["table", "--family", "heisenberg", "--grid", "3"]) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out


def test_unknown_family_is_config_error():
    assert cli.main(["table", "--family", "no_such_family.yaml"]) == 2


def test_bad_subcommand_is_usage_error(capsys):
    assert cli.main(["frobnicate"]) == 2
    capsys.readouterr()


def test_missing_required_flag_is_usage_error(capsys):
    assert cli.main(["select", "--family", "grushin"]) == 2
    capsys.readouterr()


def test_csv_output_written(tmp_path, capsys):
    out = tmp_path / "rows.csv"
    code = cli.main(["expcheck", "--family", "heisenberg", "--word", "1,2",
                     "--point", "0,0,0", "--output", str(out)])
    assert code == 0
    text = out.read_text()
    assert text.splitlines()[0].startswith("report")
    assert len(text.splitlines()) > 2
    capsys.readouterr()


def test_same_seed_same_output(capsys):
    argv = ["select", "--family", "grushin", "--point", "0.5,0.0",
            "--radius", "0.1", "--samples", "20", "--seed", "7"]
    assert cli.main(argv) == 0
    first = capsys.readouterr().out
    assert cli.main(argv) == 0
    second = capsys.readouterr().out
    assert first == second


def test_rank_deficient_family_fails_nonzero(tmp_path, capsys):
    path = tmp_path / "flat.yaml"
    path.write_text(NON_HORMANDER_YAML)
    code = cli.main(["select", "--family", str(path),
                     "--point", "0.1,0.1", "--radius", "0.1"])
    assert code == 1
    capsys.readouterr()


def test_console_script_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "ccbox.cli", "table", "--family", "grushin",
         "--grid", "3"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "[PASS]" in proc.stdout
