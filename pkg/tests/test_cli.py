import subprocess
import sys

import pytest

from wadg.cli import main
from wadg.harness import read_csv
from wadg.mesh import load_mesh
from wadg.solver import load_pressure


def test_projection_writes_csv(tmp_path, capsys):
    out = tmp_path / "proj.csv"
    assert main(["projection", "--n", "1..2", "--mesh", "2,4", "--out", str(out)]) == 0
    meta, header, rows = read_csv(out)
    assert meta["experiment"] == "projection" and meta["meshes"] == "2,4"
    assert header == ["N", "cells", "h", "err_uw1", "err_uw2", "err_uw3"]
    assert len(rows) == 8
    assert "rates" in capsys.readouterr().out


def test_config_file_overridden_by_flags(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("N = 3\nmesh = 2,4\n")
    out = tmp_path / "c.csv"
    assert main(["conservation", "--config", str(cfg), "--n", "1", "--out", str(out)]) == 0
    meta, _, rows = read_csv(out)
    assert meta["N"] == "1" and rows[0][0] == "1"


@pytest.mark.parametrize("argv", [["bogus"], ["projection", "--n", "0"],
                                  ["projection", "--mesh", "8,4"],
                                  ["projection", "--field", "cone:a"],
                                  ["projection", "--config", "/nonexistent/x.cfg"]])
def test_invalid_config_exit_codes(argv, capsys):
    code = None
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    expect = 4 if "--config" in argv else 2
    assert code == expect


def test_singular_quadrature_is_numerical_failure(capsys):
    argv = ["convergence-manufactured", "--n", "2", "--mesh", "2", "--quad-degree", "2",
            "--tfinal", "0.01"]
    assert main(argv) == 3
    assert "singular" in capsys.readouterr().err


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    assert main(["projection", "--n", "1", "--mesh", "2,4", "--out", str(blocker / "x.csv")]) == 4


def test_solve_dumps(tmp_path):
    d = tmp_path / "dumps"
    argv = ["solve", "--n", "2", "--mesh", "4", "--tfinal", "0.05", "--out",
            str(tmp_path / "s.csv")]
    assert main(argv + ["--dump-dir", str(d)]) == 0
    mesh = load_mesh(d / "mesh.txt")
    t, N, P = load_pressure(d / "pressure_wadg.txt")
    assert mesh.K == P.shape[0] == 32 and N == 2 and abs(t - 0.05) < 1e-14
    _, _, rows = read_csv(tmp_path / "s.csv")
    assert [r[0] for r in rows] == ["standard", "wadg"]
    # energy does not grow
    assert all(float(r[5]) <= 1e-10 for r in rows)


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "wadg.cli", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "experiment" in r.stdout
