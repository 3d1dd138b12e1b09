import csv
import json

import pytest

from coopsense import cli
from coopsense.acceptance import CriterionResult
from coopsense.experiments import config_digest
from coopsense.params import load_config
from coopsense.quadrature import QuadratureError

SMALL = """
[simulation]
realizations = 30
area_km2 = 4.0
meta_outer = 4
meta_inner = 40
seed = 11

[sweep]
tau_db = [0.0, 5.0]
nc = [1, 2]
density_per_km2 = [70.0]
gamma = [0.0, 0.7, 1.0]
t_grid = [0.5, 0.8]

[numerics]
geometry_samples = 32
meta_samples = 32
replicates = 2
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("command", ["coverage", "rates", "gamma", "meta"])
def test_commands_write_csv_and_sidecar(command, config, tmp_path):
    out = tmp_path / command
    assert cli.main([command, "--config", str(config), "--engine", "both", "--out", str(out)]) == 0
    rows = read_rows(out / f"{command}.csv")
    digest = config_digest(load_config(SMALL))
    assert rows and all(r["seed"] == "11" and r["config_digest"] == digest for r in rows)
    assert {r["engine"] for r in rows} == {"analytic", "simulate"}
    side = json.loads((out / f"{command}.json").read_text())
    assert side["config_digest"] == digest and side["command"] == command
    assert "workers" not in side["config"]["simulation"]


def test_byte_stable_across_worker_counts(config, tmp_path, monkeypatch):
    outputs = []
    for workers in ("1", "2", "1"):
        monkeypatch.setenv("COOPSENSE_WORKERS", workers)
        out = tmp_path / f"w{len(outputs)}"
        assert cli.main(["coverage", "--config", str(config), "--engine", "simulate", "--out", str(out)]) == 0
        outputs.append(((out / "coverage.csv").read_bytes(), (out / "coverage.json").read_bytes()))
    assert outputs[0] == outputs[1] == outputs[2]


def test_seed_override(config, tmp_path):
    out = tmp_path / "s"
    assert cli.main(["coverage", "--config", str(config), "--seed", "99", "--out", str(out)]) == 0
    rows = read_rows(out / "coverage.csv")
    assert all(r["seed"] == "99" for r in rows)
    assert rows[0]["config_digest"] != config_digest(load_config(SMALL))


def test_abs_diff_column(config, tmp_path):
    out = tmp_path / "d"
    cli.main(["coverage", "--config", str(config), "--engine", "both", "--out", str(out)])
    rows = read_rows(out / "coverage.csv")
    by = {(r["engine"], r["n_c"], r["tau_db"]): float(r["coverage"]) for r in rows}
    r = rows[0]
    assert float(r["abs_diff"]) == pytest.approx(
        abs(by["analytic", r["n_c"], r["tau_db"]] - by["simulate", r["n_c"], r["tau_db"]]))


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("energy_split = 3.0\n")
    assert cli.main(["coverage", "--config", str(bad)]) == 2
    assert "energy_split" in capsys.readouterr().err
    assert cli.main(["coverage", "--config", str(tmp_path / "missing.toml")]) == 2


def test_non_convergence_exit_3(tmp_path):
    path = tmp_path / "q.toml"
    path.write_text(SMALL + "\n[quadrature]\nsubdivisions = 1\nrel_tol = 1e-14\nabs_tol = 1e-300\n")
    assert cli.main(["coverage", "--config", str(path), "--out", str(tmp_path / "q")]) == 3


def test_non_convergence_from_inversion_exit_3(config, tmp_path, monkeypatch):
    def boom(cfg, engine):
        raise QuadratureError("tail bound too large", 1.0)
    monkeypatch.setitem(cli.COMMANDS, "meta", boom)
    assert cli.main(["meta", "--config", str(config), "--out", str(tmp_path)]) == 3


@pytest.mark.parametrize("passed,code", [(True, 0), (False, 1)])
def test_validate_exit_codes(config, tmp_path, monkeypatch, passed, code):
    import coopsense.acceptance as acc

    def fake_run_all(ctx, criteria=None, echo=None):
        res = [CriterionResult("1", "stub", passed, 0.0, 1.0)]
        if echo:
            for r in res:
                echo(r.line())
        return res
    monkeypatch.setattr(acc, "run_all", fake_run_all)
    out = tmp_path / "v"
    assert cli.main(["validate", "--config", str(config), "--out", str(out)]) == code
    rows = read_rows(out / "validate.csv")
    assert rows[0]["passed"] == ("true" if passed else "false")


def test_unknown_engine_rejected(config):
    with pytest.raises(SystemExit):
        cli.main(["coverage", "--config", str(config), "--engine", "psychic"])
