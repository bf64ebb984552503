import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from levyrotor.cli import main
from levyrotor.config import ConfigError, config_hash, parse_config, parse_hbar, parse_number
from levyrotor.harness import ExperimentConfig
from levyrotor.io import emit_series, manifest_path, read_series, write_csv
from levyrotor.theory import DEFAULT_HBAR, LocalizationModel, var_p0_model


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


def test_minimal_config_gets_defaults(tmp_path):
    cfg = parse_config(write_json(tmp_path / "c.json", {"alpha": 0.5, "kappa": 0.003333, "T": 10000}))
    assert cfg.K == 7.5
    assert cfg.hbar == 2 * math.pi * 577 / 13872
    assert cfg.n_realizations == 200


def test_exact_hbar_form():
    h = parse_hbar({"two_pi_times": {"num": 577, "den": 13872}})
    assert h == pytest.approx(DEFAULT_HBAR, rel=1e-15)
    with pytest.raises(ConfigError):
        parse_hbar({"two_pi_times": {"num": 1, "den": 0}})


@given(p=st.integers(1, 10_000), q=st.integers(1, 10_000))
def test_fraction_and_decimal_agree(p, q):
    a = parse_number(f"{p}/{q}")
    b = parse_number(repr(p / q))
    assert abs(a - b) <= math.ulp(b)


def test_alpha_violation_names_field(tmp_path):
    with pytest.raises(ConfigError, match="alpha.*> 0"):
        parse_config(overrides={"alpha": -1, "kappa": 0.01, "T": 10})


def test_unknown_and_missing_keys(tmp_path):
    with pytest.raises(ConfigError, match="unknown key 'beta'"):
        parse_config(overrides={"alpha": 0.5, "kappa": 0.01, "T": 10, "beta": 1})
    with pytest.raises(ConfigError, match="missing required key 'T'"):
        parse_config(overrides={"alpha": 0.5, "kappa": 0.01})
    cfg = parse_config(overrides={"dist": "deterministic", "kappa": 0.01, "T": 10})
    assert cfg.dist == "deterministic"


def test_kappa_from_W():
    cfg = parse_config(overrides={"alpha": 0.5, "W": 0.1, "T": 10})
    assert cfg.kappa == pytest.approx(0.01 / 3)
    parse_config(overrides={"alpha": 0.5, "W": 0.1, "kappa": 0.1 ** 2 / 3, "T": 10})
    with pytest.raises(ConfigError, match="kappa"):
        parse_config(overrides={"alpha": 0.5, "W": 0.1, "kappa": 0.01, "T": 10})


def test_flags_override_file_and_hash_is_stable(tmp_path):
    path = write_json(tmp_path / "c.json", {"alpha": 0.5, "kappa": "1/300", "T": 100, "seed": 3})
    a, b = parse_config(path), parse_config(path)
    assert a == b and config_hash(a) == config_hash(b)
    c = parse_config(path, {"T": 200})
    assert c.T == 200 and config_hash(c) != config_hash(a)
    assert a.base_seed == 3


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{")
    with pytest.raises(ConfigError):
        parse_config(p)


def test_emit_round_trip_is_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    t = np.arange(50)
    v = rng.standard_normal(50) * 10.0 ** rng.integers(-20, 20, 50)
    paths = emit_series((["t", "value"], [t, v]), tmp_path / "s.csv")
    back = read_series(paths[0])
    assert np.array_equal(back["t"], t) and np.array_equal(back["value"], v)
    man = json.loads(manifest_path(paths[0]).read_text())
    assert man["outputs"] == ["s.csv"]


def test_empty_series_gives_header_only(tmp_path):
    path = write_csv(tmp_path / "e.csv", ["t", "var_p", "stderr"], [np.array([], int), [], []])
    assert path.read_text() == "t,var_p,stderr\n"


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_simulate_is_deterministic(tmp_path, capsys):
    args = ["simulate", "--alpha", "0.5", "--kappa", "1/300", "--T", "60", "--n", "3", "--seed", "7", "--M", "8192"]
    assert run_cli(capsys, *args, "--out", tmp_path / "a.csv")[0] == 0
    assert run_cli(capsys, *args, "--out", tmp_path / "b.csv")[0] == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert read_series(tmp_path / "a.csv")["t"][-1] == 60


def test_simulate_grid_layout(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "simulate", "--alpha", "0.5,1.5", "--kappa", "1/300", "--T", "20",
                           "--n", "2", "--M", "4096", "--out", tmp_path / "grid")
    assert code == 0
    names = sorted(p.name for p in (tmp_path / "grid").glob("*.csv"))
    assert len(names) == 3 and "combined.csv" in names
    comb = read_series(tmp_path / "grid" / "combined.csv")
    assert set(comb["alpha"]) == {0.5, 1.5}
    cell = read_series(tmp_path / "grid" / [n for n in names if "alpha1.5" in n][0])
    np.testing.assert_array_equal(comb["var_p"][comb["alpha"] == 1.5], cell["var_p"])


def test_theory_then_compare_against_crossover(tmp_path, capsys):
    base = ["theory", "--dist", "deterministic", "--tc", "41", "--T", "2000"]
    assert run_cli(capsys, *base, "--out", tmp_path / "full.csv")[0] == 0
    assert run_cli(capsys, *base, "--model", "crossover", "--out", tmp_path / "eq4.csv")[0] == 0
    code, out, _ = run_cli(capsys, "compare", tmp_path / "full.csv", tmp_path / "eq4.csv",
                           "--window", "100", "2000", "--out", tmp_path / "dev.csv")
    assert code == 0 and json.loads(out)["passed"]
    code, out, _ = run_cli(capsys, "compare", tmp_path / "full.csv", tmp_path / "eq4.csv", "--tolerance", "0")
    assert code == 1 and not json.loads(out)["passed"]


def test_fit_eq3_on_synthetic_series(tmp_path, capsys):
    t = np.arange(0, 6001, 5)
    v = var_p0_model(LocalizationModel.from_dstar(45.28, DEFAULT_HBAR), t)
    write_csv(tmp_path / "s.csv", ["t", "var_p"], [t, v])
    code, out, _ = run_cli(capsys, "fit", tmp_path / "s.csv", "--model", "eq3")
    assert code == 0 and round(json.loads(out)["D_star"], 2) == 45.28
    code, out, _ = run_cli(capsys, "fit", tmp_path / "s.csv", "--model", "power", "--window", "5", "50")
    assert code == 0 and json.loads(out)["alpha"] == pytest.approx(1.0, abs=0.02)


def test_theory_ml_and_renewal_tables(tmp_path, capsys):
    assert run_cli(capsys, "theory", "--alpha", "0.5", "--tc", "41", "--T", "300", "--model", "ml",
                   "--out", tmp_path / "ml.csv")[0] == 0
    ml = read_series(tmp_path / "ml.csv")
    assert ml["D_ml"][0] == 1.0 and ml["D_exact"][0] == 1.0
    assert run_cli(capsys, "renewal-tables", "--alpha", "1.5", "--kappa", "1/300", "--T", "100",
                   "--out", tmp_path / "r.csv")[0] == 0
    assert list(read_series(tmp_path / "r.csv")) == ["t", "f", "Nbar", "D1"]


@pytest.mark.parametrize("argv, kind", [
    (["simulate", "--alpha", "-1", "--kappa", "0.01", "--T", "5", "--out", "x.csv"], "ConfigError"),
    (["nonsense"], "CliError"),
    (["fit", "missing.csv", "--model", "eq3"], "FileNotFoundError"),
    (["simulate", "--alpha", "0.5", "--kappa", "0.01", "--T", "40", "--M", "64", "--n", "2", "--out", "x.csv"],
     "EnsembleError"),
])
def test_errors_are_machine_readable(argv, kind, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, _, err = run_cli(capsys, *argv)
    assert code == 2
    assert json.loads(err)["error"] == kind


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "levyrotor.cli", "theory", "--alpha", "0.5", "--kappa", "1/300",
                           "--T", "50", "--out", str(tmp_path / "p.csv")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert read_series(tmp_path / "p.csv")["t"].size == 51


def test_config_file_drives_simulation(tmp_path, capsys):
    cfg = write_json(tmp_path / "c.json", {"alpha": 0.5, "kappa": "1/300", "T": 10, "n": 2, "M": 1024,
                                           "hbar": {"two_pi_times": {"num": 577, "den": 13872}}})
    assert run_cli(capsys, "simulate", "--config", cfg, "--out", tmp_path / "s.csv")[0] == 0
    man = json.loads(manifest_path(tmp_path / "s.csv").read_text())
    assert man["config_hash"] == config_hash(ExperimentConfig(**man["extra"]["config"] |
                                                              {"sample_times": None}))
