import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from boselt import cli, functional
from boselt.errors import NumericalError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_constants_exact_golden(capsys):
    code, out, _ = run(capsys, "constants", "--d", "1", "--alpha", "1", "--K", "pi2", "--json")
    assert code == 0
    rec = json.loads(out)
    assert rec["schema"] == "boselt.constants/v1"
    assert rec["result"]["C_exact"] == "1/122880"
    assert rec["result"]["binding"] == "c1/2"


@pytest.mark.parametrize("K", ["pi^2", "pi**2", "9.869604401089358"])
def test_constants_K_forms(capsys, K):
    code, out, _ = run(capsys, "constants", "--d", "3", "--alpha", "3", "--K", K, "--sobolev", "0.00226", "--json")
    assert code == 0
    assert 4.5e-6 < json.loads(out)["result"]["C"] < 4.6e-6


def test_scattering_text_output(capsys):
    code, out, _ = run(capsys, "scattering", "--family", "reg-hom-3d", "--W0", "2", "--beta", "6", "--R", "1")
    assert code == 0
    assert "a: 0.2384058440442" in out
    assert out.startswith("schema: boselt.scattering/v1")


def test_scattering_oracle_flag(capsys):
    code, out, _ = run(capsys, "scattering", "--family", "hom-3d", "--W0", "1", "--beta", "6", "--oracle", "--json")
    res = json.loads(out)["result"]
    assert code == 0
    assert abs(res["oracle_a"] - res["a"]) < 1e-6 * res["a"]
    assert res["relative_difference"] < 1e-6


def test_output_is_deterministic(capsys, tmp_path, monkeypatch):
    monkeypatch.delenv("BOSELT_SEED", raising=False)
    args = ["dyson2d", "--random", "25", "--json"]
    outs = [run(capsys, *args)[1] for _ in range(2)]
    assert outs[0] == outs[1]
    args = ["e2", "--gamma", "1", "--n", "65", "--json"]
    assert run(capsys, *args)[1] == run(capsys, *args)[1]


def test_seed_precedence(capsys, monkeypatch):
    monkeypatch.setenv("BOSELT_SEED", "7")
    rec = json.loads(run(capsys, "dyson3d", "--random", "3", "--json")[1])
    assert rec["inputs"]["seed"] == 7
    rec = json.loads(run(capsys, "dyson3d", "--random", "3", "--seed", "2", "--json")[1])
    assert rec["inputs"]["seed"] == 2
    monkeypatch.setenv("BOSELT_SEED", "x")
    assert run(capsys, "dyson3d", "--random", "3")[0] == 1


def test_workers_do_not_change_results(capsys):
    a = json.loads(run(capsys, "dyson3d", "--random", "20", "--json")[1])
    b = json.loads(run(capsys, "dyson3d", "--random", "20", "--workers", "3", "--json")[1])
    assert a["result"] == b["result"]


def test_exit_codes(capsys, monkeypatch):
    assert run(capsys, "nonsense")[0] == 1
    assert run(capsys, "constants", "--d", "1")[0] == 1
    code, _, err = run(capsys, "scattering", "--family", "hom-3d", "--W0", "1", "--beta", "3")
    assert code == 1 and "beta > 3" in err
    # (W0/2)^{1/(beta-2)} overflows
    code, _, err = run(capsys, "scattering", "--family", "hom-2d", "--W0", "100", "--beta", "2.001")
    assert code == 2 and "numerical" in err

    def boom(args):
        raise NumericalError("did not converge", residual=1.0)
    monkeypatch.setattr(cli, "dispatch", boom)
    assert run(capsys, "constants", "--d", "1", "--alpha", "1", "--K", "1")[0] == 2


def test_parse_error_location(capsys, tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("1 4 0 1\n1 2 3\n")
    code, _, err = run(capsys, "tree", "--grid", str(p))
    assert code == 1 and "line 2, column 6" in err
    p.write_text("")
    code, _, err = run(capsys, "functional", "--family", "ll", "--eta", "1", "--grid", str(p))
    assert code == 1 and "line 1, column 1" in err
    code, _, err = run(capsys, "tree", "--grid", str(tmp_path / "missing.txt"))
    assert code == 1


def _write_grid(path, values, h=1.0):
    functional.write_rho_grid(functional.DensityGrid(np.asarray(values, float), h), path)


def test_tree_and_functional(capsys, tmp_path):
    p = tmp_path / "rho.txt"
    _write_grid(p, [3.0, 3.0, 0.25, 0.25, 0.5, 0.5, 0.25, 0.25])
    code, out, _ = run(capsys, "tree", "--grid", str(p), "--json")
    assert code == 0
    res = json.loads(out)["result"]
    assert res["problems"] == [] and res["B"] == 2 and res["leaves"] == 4
    code, out, _ = run(capsys, "functional", "--family", "ll", "--eta", "1", "--grid", str(p), "--json")
    rec = json.loads(out)
    assert code == 0 and rec["result"]["energy"] > 0


def test_functional_comparison_notes(capsys, tmp_path):
    p = tmp_path / "rho3.txt"
    _write_grid(p, np.full((4, 4, 4), 0.5))
    code, out, _ = run(capsys, "functional", "--family", "hard-sphere", "--a", "0.1", "--grid", str(p), "--json")
    assert code == 0
    assert any("comparison (not asserted)" in n for n in json.loads(out)["notes"])


def test_minimize_roundtrip(capsys, tmp_path):
    out_grid = tmp_path / "min.txt"
    code, out, _ = run(capsys, "minimize", "--family", "ll", "--eta", "1", "--N", "10", "--n", "40",
                       "--box", "10", "--out-grid", str(out_grid), "--json")
    assert code == 0
    res = json.loads(out)["result"]
    g = functional.read_rho_grid(out_grid)
    assert g.mass == pytest.approx(10.0, rel=1e-10)
    assert res["mass"] == pytest.approx(10.0, rel=1e-10)


def test_minimize_with_potential_file(capsys, tmp_path):
    pot = tmp_path / "V.txt"
    pot.write_text("1 4 0 1\n-1 0 0 2\n")
    code, out, _ = run(capsys, "minimize", "--family", "ll", "--eta", "1", "--N", "3", "--potential", str(pot), "--json")
    assert code == 0
    assert json.loads(out)["result"]["mass"] == pytest.approx(3.0)


def test_csv_and_out_files(capsys, tmp_path):
    out_json, out_csv = tmp_path / "r.json", tmp_path / "r.csv"
    code, text, _ = run(capsys, "counterexample", "homogeneous", "--beta", "1", "--points", "5",
                        "--out", str(out_json), "--csv", str(out_csv))
    assert code == 0
    rec = json.loads(out_json.read_text())
    rows = list(csv.reader(out_csv.open()))
    assert rows[0] == rec["table"]["columns"]
    assert len(rows) == 6


@pytest.mark.parametrize("argv", [
    ["bound-eval", "--family", "hard-disk", "--a", "1", "--gamma", "0.1,1,2", "--check-shape"],
    ["bound-eval", "--family", "ll", "--eta", "1", "--volume", "1,2,4"],
    ["e2", "--gamma", "1", "--levels", "17,33,65"],
    ["e2", "--family", "regularized", "--d", "2", "--W0", "1", "--beta", "2", "--R", "0.3", "--n", "8"],
    ["uncertainty", "--d", "2", "--alpha", "1", "--n", "16"],
    ["counterexample", "integrable", "--points", "4"],
    ["counterexample", "skew", "--a-W", "1", "--a", "0.1", "--points", "4"],
    ["counterexample", "homogeneous", "--beta", "4", "--trial", "bump_product", "--core", "0.05", "--points", "4"],
])
def test_subcommands_run(capsys, argv):
    code, out, err = run(capsys, *argv, "--json")
    assert code == 0, err
    assert json.loads(out)["command"].startswith(argv[0])


def test_console_script_and_module():
    r = subprocess.run([sys.executable, "-m", "boselt", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "boselt" in r.stdout
    r = subprocess.run([sys.executable, "-m", "boselt", "constants", "--d", "2", "--alpha", "3", "--K", "1"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "c5/2" in r.stdout
