import csv
import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from dynprice.cli import main
from dynprice.loan import COVARIATES
from dynprice.reporting import AGGREGATE_COLUMNS, TRACE_COLUMNS


def write_config(path, doc):
    path.write_text(yaml.safe_dump(doc))
    return path


GRID_DOC = {
    "env": {"scenario": "s1", "family": "logistic"},
    "policies": [{"kind": "etc"}, {"kind": "etc_ldp", "epsilon": 2.0}],
    "grid": {"d_list": [1, 2], "T_list": [300, 600], "reps": 3, "seed": 11},
    "output": {"path_stride": 100},
}


@pytest.fixture
def grid_config(tmp_path):
    return write_config(tmp_path / "grid.yaml", GRID_DOC)


@pytest.fixture
def sim_config(tmp_path):
    doc = {"env": {"scenario": "s1", "d": 2, "horizon": 800}, "policies": [{"kind": "etc"}, {"kind": "ucb"}]}
    return write_config(tmp_path / "sim.yaml", doc)


class TestSimulate:
    def test_byte_identical(self, tmp_path, sim_config):
        for out in ("a", "b"):
            assert main(["simulate", "--config", str(sim_config), "--seed", "17", "--out", str(tmp_path / out)]) == 0
        a = (tmp_path / "a" / "trace.csv").read_bytes()
        assert a == (tmp_path / "b" / "trace.csv").read_bytes()
        rows = list(csv.DictReader(a.decode().splitlines()))
        assert len(rows) == 800 and rows[0]["policy"] == "etc" and rows[0]["seed"] == "17"
        assert a.decode().splitlines()[0] == ",".join(TRACE_COLUMNS)

    def test_seed_changes_output(self, tmp_path, sim_config):
        main(["simulate", "--config", str(sim_config), "--seed", "1", "--out", str(tmp_path / "a")])
        main(["simulate", "--config", str(sim_config), "--seed", "2", "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "trace.csv").read_bytes() != (tmp_path / "b" / "trace.csv").read_bytes()

    def test_overrides(self, tmp_path, sim_config):
        assert main(["simulate", "--config", str(sim_config), "--policy", "ucb", "--d", "3", "--horizon", "50",
                     "--out", str(tmp_path)]) == 0
        rows = list(csv.DictReader(open(tmp_path / "trace.csv")))
        assert len(rows) == 50 and rows[0]["policy"] == "ucb" and rows[0]["d"] == "3"

    def test_unknown_policy_is_usage_error(self, tmp_path, sim_config, capsys):
        assert main(["simulate", "--config", str(sim_config), "--policy", "supcb", "--out", str(tmp_path)]) == 1
        assert "not in the config" in capsys.readouterr().err


class TestGrid:
    def test_outputs_and_parallel_determinism(self, tmp_path, grid_config):
        assert main(["grid", "--config", str(grid_config), "--jobs", "1", "--out", str(tmp_path / "j1")]) == 0
        assert main(["grid", "--config", str(grid_config), "--jobs", "2", "--out", str(tmp_path / "j2")]) == 0
        for name in ("aggregate.csv", "runs.csv", "paths.csv", "config.json"):
            assert (tmp_path / "j1" / name).read_bytes() == (tmp_path / "j2" / name).read_bytes()
        lines = (tmp_path / "j1" / "aggregate.csv").read_text().splitlines()
        assert lines[0] == ",".join(AGGREGATE_COLUMNS)
        assert len(lines) == 1 + 8
        assert json.loads((tmp_path / "j1" / "config.json").read_text()) == GRID_DOC

    def test_seed_flag_overrides(self, tmp_path, grid_config):
        main(["grid", "--config", str(grid_config), "--seed", "12", "--out", str(tmp_path / "a")])
        main(["grid", "--config", str(grid_config), "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "aggregate.csv").read_bytes() != (tmp_path / "b" / "aggregate.csv").read_bytes()

    def test_default_output_dir_is_relative_to_config(self, tmp_path, grid_config):
        doc = dict(GRID_DOC, output={"dir": "results", "path_stride": 300})
        cfg = write_config(tmp_path / "g2.yaml", doc)
        assert main(["grid", "--config", str(cfg)]) == 0
        assert (tmp_path / "results" / "aggregate.csv").exists()


class TestScaling:
    def test_power_law_fixture(self, tmp_path, capsys):
        path = tmp_path / "agg.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(AGGREGATE_COLUMNS)
            for d in (1, 4, 9):
                for T in (10_000, 40_000, 90_000):
                    w.writerow(["etc", "", d, T, "", "", "", 50, (d * T) ** 0.5, 1.0, 0.1])
        assert main(["scaling", str(path)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["beta_T"] == pytest.approx(0.5) and out["beta_d"] == pytest.approx(0.5)
        assert main(["scaling", str(path), "--offset", "half"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["offset"] == "half_loglog" and out["beta_T"] < 0.5

    def test_on_grid_output(self, tmp_path, grid_config, capsys):
        main(["grid", "--config", str(grid_config), "--out", str(tmp_path)])
        capsys.readouterr()
        assert main(["scaling", str(tmp_path / "aggregate.csv")]) == 1
        assert "several policies" in capsys.readouterr().err
        assert main(["scaling", str(tmp_path / "aggregate.csv"), "--policy", "etc", "--offset", "full"]) == 0
        assert set(json.loads(capsys.readouterr().out)) == {"beta0", "beta_d", "beta_T", "offset", "n_points"}


def loan_file(path, n=4000, seed=0):
    rng = np.random.default_rng(seed)
    scale = np.array([700.0, 5.0, 25_000.0, 0.2, 60.0])
    Z_raw = rng.lognormal(0, 0.7, (n, 5)) * scale
    Z = Z_raw / Z_raw.mean(axis=0)
    p = rng.uniform(0, 3, n)
    a = Z @ [0.8, -0.4, 0.5, 0.3, -0.2] - p * (Z @ [0.3, 0.1, 0.2, 0.15, 0.05])
    y = (rng.random(n) < 1 / (1 + np.exp(-a))).astype(int)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["apply", "Price", *COVARIATES])
        for i in range(n):
            w.writerow([y[i], f"{1000 * p[i]:.4f}", *(f"{v:.8g}" for v in Z_raw[i])])
    return path


class TestFitDemandAndReplay:
    def test_fit_demand(self, tmp_path, capsys):
        data = loan_file(tmp_path / "loans.csv")
        assert main(["fit-demand", str(data), "--out", str(tmp_path / "fit")]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary == json.loads((tmp_path / "fit" / "theta.json").read_text())
        assert len(summary["alpha"]) == 5 and summary["rows_in"] == 4000
        pool_rows = (tmp_path / "fit" / "pool.csv").read_text().splitlines()
        assert len(pool_rows) == 1 + summary["rows_kept"]

    def test_replay(self, tmp_path):
        data = loan_file(tmp_path / "loans.csv")
        main(["fit-demand", str(data), "--out", str(tmp_path / "fit")])
        doc = {"env": {"scenario": "replay", "price_range": [0, 10], "explore_range": [0, 3]},
               "policies": [{"kind": "etc"}, {"kind": "etc_ldp", "epsilon": 2.0}],
               "grid": {"T_list": [400], "reps": 2}}
        cfg = write_config(tmp_path / "replay.yaml", doc)
        args = ["replay", "--config", str(cfg), "--pool", str(tmp_path / "fit" / "pool.csv"),
                "--theta", str(tmp_path / "fit" / "theta.json")]
        assert main(args + ["--out", str(tmp_path / "r1")]) == 0
        assert main(args + ["--out", str(tmp_path / "r2"), "--jobs", "2"]) == 0
        assert (tmp_path / "r1" / "aggregate.csv").read_bytes() == (tmp_path / "r2" / "aggregate.csv").read_bytes()
        rows = list(csv.DictReader(open(tmp_path / "r1" / "aggregate.csv")))
        assert [r["d"] for r in rows] == ["5", "5"]

    def test_replay_fits_from_data(self, tmp_path):
        data = loan_file(tmp_path / "loans.csv")
        doc = {"env": {"scenario": "replay", "data": data.name}, "policies": [{"kind": "etc"}],
               "grid": {"T_list": [300], "reps": 1}}
        cfg = write_config(tmp_path / "replay.yaml", doc)
        assert main(["replay", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0

    def test_replay_needs_replay_scenario(self, tmp_path, grid_config):
        assert main(["replay", "--config", str(grid_config)]) == 1


class TestExitCodes:
    def test_usage_errors(self, capsys):
        assert main([]) == 1
        assert main(["frobnicate"]) == 1
        assert main(["simulate", "--seed", "-3"]) == 1
        assert main(["grid"]) == 1
        assert main(["scaling", "x.csv", "--offset", "double"]) == 1

    def test_config_error_points_to_schema(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "bad.yaml", {"env": {"scenario": "s1", "bogus": 1}, "policies": [{"kind": "etc"}]})
        assert main(["grid", "--config", str(cfg)]) == 1
        err = capsys.readouterr().err
        assert "bogus" in err and "dynprice schema" in err

    def test_runtime_errors(self, tmp_path, capsys):
        assert main(["fit-demand", str(tmp_path / "nope.csv")]) == 2
        (tmp_path / "flat.csv").write_text("apply,Price," + ",".join(COVARIATES) + "\n" + "1,1000,1,1,1,1,1\n" * 3)
        assert main(["fit-demand", str(tmp_path / "flat.csv")]) == 2

    def test_schema_command(self, capsys):
        assert main(["schema"]) == 0
        assert "additionalProperties" in capsys.readouterr().out


def test_module_entry_point(tmp_path, sim_config):
    out = subprocess.run([sys.executable, "-m", "dynprice", "simulate", "--config", str(sim_config), "--horizon", "20",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert len((tmp_path / "trace.csv").read_text().splitlines()) == 21
