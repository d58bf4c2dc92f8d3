import csv
import io
import json
import os

import pytest

from heatlab import cli
from heatlab import experiments as ex
from heatlab.stochastic import DEFAULT_SEED
from heatlab.theta import ThetaQuery, theta

from conftest import FIXTURES


def fixture(name):
    with open(os.path.join(FIXTURES, name)) as fh:
        return fh.read()


def read_all(directory):
    out = {}
    for name in sorted(os.listdir(directory)):
        with open(os.path.join(directory, name), "rb") as fh:
            out[name] = fh.read()
    return out


# -- parsing -----------------------------------------------------------------

def test_minimal_theta_config_gets_defaults():
    cfg = cli.parse_config(fixture("minimal_theta.ini"))
    assert [name for name, _ in cfg.experiments] == ["theta_table"]
    params = cfg.experiments[0][1]
    assert set(params) == set(ex.REGISTRY["theta_table"].params)
    assert cfg.mc.seed == DEFAULT_SEED
    assert cfg.format == "both" and cfg.output == "reports"


def test_regime_violation_is_explained():
    with pytest.raises(cli.ConfigError) as info:
        cli.parse_config("[concentration_lower]\nr0 = 0.1\nt0 = 0.05\n")
    assert any("t0 <= r0^2 required" in e for e in info.value.errors)


def test_every_violation_is_reported():
    with pytest.raises(cli.ConfigError) as info:
        cli.parse_config(fixture("bad_regime.ini"))
    errs = info.value.errors
    assert any("duplicate" in e and "concentration_lower" in e for e in errs)
    assert any("bogus" in e for e in errs)
    assert any("no_such_experiment" in e for e in errs)
    assert any("t0 <= r0^2" in e for e in errs)


def test_duplicate_keys_and_bad_values():
    with pytest.raises(cli.ConfigError) as info:
        cli.parse_config("[mc]\nseed = 1\nseed = 2\nn_paths = lots\n")
    errs = info.value.errors
    assert any("duplicate" in e and "seed" in e for e in errs)
    assert any("n_paths" in e for e in errs)


def test_unknown_global_keys_and_format():
    with pytest.raises(cli.ConfigError) as info:
        cli.parse_config("[mc]\nwalkers = 3\n[output]\nformat = xml\n")
    assert len(info.value.errors) == 2


def test_mode_ranges_expand():
    cfg = cli.parse_config("[sogge_zelditch]\nmodes = circle(1..4), torus(2..6:2)\n")
    labels = [m.label for m in cfg.experiments[0][1]["modes"]]
    assert len(labels) == 7
    assert labels[0].startswith("CircleMode") and labels[-1].startswith("TorusMode")


def test_split_top_respects_parentheses():
    assert cli.split_top("torus(2,1), circle(3)") == ["torus(2,1)", "circle(3)"]


# -- running -----------------------------------------------------------------

def test_empty_config_exits_zero_without_files(tmp_path):
    reports, code = cli.run(cli.parse_config(""), out=str(tmp_path / "out"))
    assert code == cli.EXIT_OK and reports == []
    assert not (tmp_path / "out").exists()


def test_known_pass_fixture_is_byte_identical_across_runs(tmp_path):
    cfg = cli.parse_config(fixture("known_pass.ini"))
    _, code_a = cli.run(cfg, out=str(tmp_path / "a"))
    _, code_b = cli.run(cfg, out=str(tmp_path / "b"))
    assert code_a == code_b == cli.EXIT_OK
    a, b = read_all(tmp_path / "a"), read_all(tmp_path / "b")
    assert a == b and len(a) == 8
    assert all(f"_seed{cfg.mc.seed}." in name for name in a)


def test_forced_c1_fixture_exits_one(tmp_path):
    reports, code = cli.run(cli.parse_config(fixture("forced_c1.ini")), out=str(tmp_path))
    assert code == cli.EXIT_FAIL
    assert any(r.verdict == ex.FAIL for r in reports[0].rows)


def test_driver_error_aborts_only_that_experiment(tmp_path, monkeypatch):
    def boom(params, mc):
        raise RuntimeError("driver exploded")
    spec = ex.REGISTRY["sogge_zelditch"]
    monkeypatch.setitem(ex.REGISTRY, "sogge_zelditch", ex.ExperimentSpec(
        spec.name, spec.reference, spec.params, boom, spec.validate, spec.uses_mc))
    cfg = cli.parse_config("[sogge_zelditch]\n[theta_table]\n")
    reports, code = cli.run(cfg, out=str(tmp_path), log=io.StringIO())
    assert code == cli.EXIT_ABORT
    assert [r.name for r in reports] == ["theta_table"]


def test_run_subcommand_exit_codes(tmp_path):
    assert cli.main(["run", "--config", os.path.join(FIXTURES, "minimal_theta.ini"),
                     "--out", str(tmp_path)]) == cli.EXIT_OK
    assert cli.main(["run", "--config", os.path.join(FIXTURES, "forced_c1.ini"),
                     "--out", str(tmp_path)]) == cli.EXIT_FAIL
    assert cli.main(["run", "--config", os.path.join(FIXTURES, "bad_regime.ini"),
                     "--out", str(tmp_path)]) == cli.EXIT_ABORT
    assert cli.main(["run", "--config", str(tmp_path / "missing.ini")]) == cli.EXIT_ABORT


def test_seed_override_changes_file_name(tmp_path):
    cli.main(["run", "--config", os.path.join(FIXTURES, "minimal_theta.ini"), "--seed", "7",
              "--out", str(tmp_path)])
    names = sorted(os.listdir(tmp_path))
    assert names == ["theta_table_seed7.csv", "theta_table_seed7.json"]
    doc = json.loads((tmp_path / "theta_table_seed7.json").read_text())
    assert {"name", "inputs", "rows", "seed", "verdicts"} <= set(doc)
    assert doc["seed"] == 7


# -- other subcommands -------------------------------------------------------

def test_theta_subcommand(capsys):
    assert cli.main(["theta", "--n", "1", "2", "--r", "1", "--t", "0.25", "--method", "all"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows and {r["n"] for r in rows} == {"1", "2"}
    assert "monte_carlo" not in {r["method"] for r in rows}
    bessel = [r for r in rows if r["method"] == "bessel_series" and r["n"] == "1"]
    assert float(bessel[0]["value"]) == theta(ThetaQuery(1, 1.0, 0.25)).value


def test_mc_subcommand(capsys):
    assert cli.main(["mc", "--domain", "interval(0,pi)", "--x", "1.5707963", "--t", "0.5",
                     "--paths", "2000", "--dt", "1e-3"]) == 0
    row = next(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert 0 < float(row["value"]) < 1 and float(row["std_err"]) > 0


def test_mc_hit_needs_target(capsys):
    assert cli.main(["mc", "--domain", "disk(1)", "--x", "0,0", "--t", "0.1",
                     "--estimator", "hit", "--paths", "100"]) == cli.EXIT_ABORT


def test_grid_subcommand(tmp_path, capsys):
    out = tmp_path / "field.csv"
    assert cli.main(["grid", "--domain", "interval(0,pi)", "--h", "0.05", "--t", "0.1",
                     "--out", str(out)]) == 0
    assert out.read_text().count("\n") > 10
    assert "integral=" in capsys.readouterr().err


def test_list_names_every_experiment(capsys):
    assert cli.main(["list"]) == 0
    listed = capsys.readouterr().out
    assert cli.main(["--list"]) == 0
    assert capsys.readouterr().out == listed
    for name, spec in ex.REGISTRY.items():
        assert f"{name}\t{spec.reference}" in listed
