import json
import os
import subprocess
import sys

import numpy as np
import pytest

from svinvopt.cli import CHECKS, csv_columns, main, scenario_from_text

HERE = os.path.dirname(__file__)
DEFAULT = os.path.join(HERE, "..", "scenarios", "default.ini")


def _write(tmp_path, text, name="s.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _read_csv(path):
    with open(path) as fh:
        first = fh.readline().strip()
        header = fh.readline().strip().split(",")
    return first, header, np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)


def test_gamma_star(capsys):
    assert main(["gamma-star", "--sigma", "1", "--mu", "1", "--kappa", "0", "--r", "1", "--k", "1", "--Q", "0.1"]) == 0
    out = capsys.readouterr().out
    assert "gamma_star 2.1046615355030762" in out and "margin 1.9109217062281840" in out


def test_gamma_star_infeasible_and_limit(capsys):
    assert main(["gamma-star", "--Q", "3"]) == 2
    assert main(["gamma-star", "--Q", "0"]) == 0
    assert "gamma_star 2.0000000000000000" in capsys.readouterr().out


def test_gamma_star_malformed():
    assert main(["gamma-star", "--Q", "abc"]) == 1
    assert main(["gamma-star", "--mu", "-1"]) == 1
    assert main([]) == 1


def test_scenario_parse_errors(tmp_path):
    for text in ("[numerics]\nm = x\n", "[bogus]\na = 1\n", "[numerics]\nfoo = 1\n", "no header\n",
                 "[initial]\npreset = nope\n", "[numerics]\nm = 0\n",
                 "[controller]\ngamma = 3\ngamma_factor = 2\n"):
        assert main(["simulate", _write(tmp_path, text)]) == 1


def test_scenario_error_names_key(tmp_path, capsys):
    main(["simulate", _write(tmp_path, "[numerics]\ndt = fast\n")])
    assert "numerics.dt" in capsys.readouterr().err


def test_scenario_infeasible(tmp_path):
    assert main(["simulate", _write(tmp_path, "[controller]\nQ = 3\n")]) == 2


def test_scenario_defaults():
    sc = scenario_from_text("")
    assert sc.m == 16 and sc.method == "rk4" and sc.checks == CHECKS
    assert sc.ctrl.gamma == pytest.approx(1.5 * 2.1046615355030762)


def test_seed_env_override(monkeypatch):
    monkeypatch.setenv("SVINVOPT_SEED", "123")
    assert scenario_from_text("[checks]\nseed = 7\n").seed == 123
    monkeypatch.delenv("SVINVOPT_SEED")
    assert scenario_from_text("[checks]\nseed = 0x10\n").seed == 16


def test_simulate_zero_init(tmp_path):
    sc = _write(tmp_path, "[initial]\npreset = zero\n[numerics]\nm = 3\nT = 1\ndt = 0.01\n")
    csv = str(tmp_path / "z.csv")
    assert main(["simulate", sc, "--csv", csv, "--json", str(tmp_path / "z.json")]) == 0
    first, header, data = _read_csv(csv)
    assert first == "# schema=1"
    assert header == csv_columns(3)
    assert header[:13] == ["t", "xi", "w", "f", "V", "W", "q", "cost_q_int", "cost_f_int",
                           "phi_L2", "phi_x_L2", "phi_xx_L2", "phi_t_L2"]
    assert not data[:, 1:].any()


def test_simulate_tank_only_V_column(tmp_path):
    sc = _write(tmp_path, "[controller]\ngamma = 4\nk = 1.5\nQ = 0\n[initial]\npreset = mode1\nxi0 = 1\nw0 = 0.3\n"
                "[numerics]\nm = 2\nT = 2\ndt = 0.001\noutput_every = 7\n")
    csv, js = str(tmp_path / "t.csv"), str(tmp_path / "t.json")
    assert main(["simulate", sc, "--csv", csv, "--json", js]) == 0
    _, header, data = _read_csv(csv)
    col = {h: i for i, h in enumerate(header)}
    xi, w, k = data[:, col["xi"]], data[:, col["w"]], 1.5
    np.testing.assert_allclose(data[:, col["V"]], 0.5 * xi**2 + (w + k * xi) ** 2 / (2 * k**2), rtol=1e-14)
    assert data[-1, 0] == 2.0
    summary = json.load(open(js))
    assert summary["scenario"]["ctrl"]["gamma"] == 4.0


def test_simulate_reproducible(tmp_path):
    sc = _write(tmp_path, "[initial]\npreset = mode1\n[numerics]\nm = 4\nT = 2\ndt = 0.001\n")
    outs = []
    for i in range(2):
        p = tmp_path / f"r{i}.csv"
        assert main(["simulate", sc, "--csv", str(p), "--json", str(tmp_path / f"r{i}.json")]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_simulate_divergence(tmp_path):
    sc = _write(tmp_path, "[initial]\nxi0 = 1\n[numerics]\nm = 2\nT = 20\n")
    assert main(["simulate", sc, "--sabotage-sign", "--csv", str(tmp_path / "d.csv")]) == 3


def test_csv_17_digits(tmp_path):
    sc = _write(tmp_path, "[initial]\nxi0 = 0.1\n[numerics]\nm = 1\nT = 0.01\ndt = 0.01\n")
    csv = tmp_path / "p.csv"
    main(["simulate", sc, "--csv", str(csv), "--json", str(tmp_path / "p.json")])
    row = csv.read_text().splitlines()[2].split(",")
    assert row[1] == "0.10000000000000001"


def test_verify_quick_suite(tmp_path):
    sc = _write(tmp_path, "[numerics]\nm = 4\nT = 20\ndt = 0.001\n[checks]\nnames = value_identity, decay, coercivity, lemma2, mode_energy\n")
    js = str(tmp_path / "rep.json")
    assert main(["verify", sc, "--json", js]) == 0
    doc = json.load(open(js))
    assert doc["seed"] == 0x5A17 and doc["scenario"]["m"] == 4
    assert all(r["passed"] for r in doc["reports"])


def test_verify_sabotaged(tmp_path):
    sc = _write(tmp_path, "[numerics]\nm = 4\n[checks]\nnames = value_identity\n")
    assert main(["verify", sc, "--sabotage-sign", "--json", str(tmp_path / "x.json")]) == 4


def test_verify_unknown_check(tmp_path, capsys):
    sc = _write(tmp_path, "[numerics]\nm = 4\n")
    assert main(["verify", sc, "--checks", "nope"]) == 1
    assert "value_identity" in capsys.readouterr().err


def test_verify_default_suite(tmp_path):
    js = str(tmp_path / "d.json")
    assert main(["verify", DEFAULT, "--json", js]) == 0
    names = {r["check_name"].split("[")[0] for r in json.load(open(js))["reports"]}
    assert {"value_identity", "energy_identity", "inverse_optimality", "gain_margin"} <= names


def test_sweep(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--factor-min", "0.6", "--factor-max", "10", "--points", "20", "--m", "8", "--out", str(out)]) == 0
    first, header, data = _read_csv(str(out))
    assert header == ["gamma", "gamma_over_gamma_star", "abscissa", "A_min", "fitted_rate"]
    assert data.shape == (20, 5) and np.all(data[:, 2] < 0) and np.all(data[:, 4] > 0)


def test_sweep_empty(tmp_path):
    out = tmp_path / "e.csv"
    assert main(["sweep", "--factor-min", "2", "--factor-max", "1", "--out", str(out)]) == 0
    assert out.read_text() == "# schema=1\ngamma,gamma_over_gamma_star,abscissa,A_min,fitted_rate\n"


def test_sweep_tank_only(tmp_path):
    out = tmp_path / "q0.csv"
    assert main(["sweep", "--Q", "0", "--gamma-min", "1.01", "--gamma-max", "10", "--points", "6", "--m", "4", "--out", str(out)]) == 0
    _, _, data = _read_csv(str(out))
    assert np.all(data[:, 2] < 0) and np.all(data[:, 4] > 0)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "svinvopt", "gamma-star"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("gamma_star")
