import math

import numpy as np
import pytest

from dynprice.environments import make_env, simulate_run
from dynprice.harness import ExperimentGrid, mean_sd_ci, run_grid
from dynprice.policies import PolicySpec
from dynprice.reporting import (
    AGGREGATE_COLUMNS,
    TRACE_COLUMNS,
    emit_aggregate_csv,
    emit_paths_csv,
    emit_runs_csv,
    emit_trace_csv,
    fmt,
    read_aggregate_csv,
    read_csv,
    scaling_table,
)


def test_fmt():
    assert fmt(None) == "" and fmt(float("nan")) == ""
    assert fmt(1 / 3) == "0.3333333333"
    assert fmt(np.int64(7)) == "7" and fmt(True) == "1" and fmt("etc") == "etc"
    assert fmt(1e-12) == "1e-12"


def test_clairvoyant_trace(tmp_path):
    env = make_env("s1", 2, 3)
    spec = PolicySpec("clairvoyant")
    trace = simulate_run(env, spec, 42)
    n = emit_trace_csv(trace, tmp_path / "t.csv", spec, 2, 3)
    text = (tmp_path / "t.csv").read_text()
    assert n == 3
    lines = text.split("\n")
    assert lines[0] == ",".join(TRACE_COLUMNS)
    assert len(lines) == 5 and lines[-1] == ""
    rows = read_csv(tmp_path / "t.csv")
    assert [r["t"] for r in rows] == ["1", "2", "3"]
    assert rows[0]["policy"] == "clairvoyant" and rows[0]["seed"] == "42" and rows[0]["epsilon"] == ""
    assert rows[0]["phase"] == "exploit"


def test_header_only_outputs(tmp_path):
    assert emit_trace_csv(None, tmp_path / "t.csv") == 0
    assert (tmp_path / "t.csv").read_text() == ",".join(TRACE_COLUMNS) + "\n"
    assert emit_aggregate_csv(None, tmp_path / "a.csv") == 0
    assert (tmp_path / "a.csv").read_text() == ",".join(AGGREGATE_COLUMNS) + "\n"


@pytest.fixture(scope="module")
def grid_result():
    grid = ExperimentGrid((PolicySpec("etc"), PolicySpec("mle_cycle", "modified")), (2,), (400, 900), reps=4, seed=3)
    return run_grid(grid)


def test_aggregate_round_trip_with_runs(tmp_path, grid_result):
    emit_aggregate_csv(grid_result, tmp_path / "a.csv")
    emit_runs_csv(grid_result, tmp_path / "r.csv")
    agg = read_aggregate_csv(tmp_path / "a.csv")
    runs = read_csv(tmp_path / "r.csv")
    assert len(agg) == 4 and len(runs) == 16
    for row in agg:
        mine = [float(r["total_regret"]) for r in runs
                if r["policy"] == row["policy"] and (r["variant"] or None) == row["variant"] and int(r["T"]) == row["T"]]
        m, s, h = mean_sd_ci(mine)
        assert row["reps"] == len(mine) == 4
        assert row["mean_regret"] == pytest.approx(m, rel=1e-9)
        assert row["ci_half_width"] == pytest.approx(h, rel=1e-9)
        assert h == pytest.approx(3 * s / math.sqrt(4))


def test_paths_file(tmp_path, grid_result):
    n = emit_paths_csv(grid_result, tmp_path / "p.csv")
    rows = read_csv(tmp_path / "p.csv")
    assert n == len(rows) == 2 * (4 + 9)
    last = [r for r in rows if r["policy"] == "etc" and r["T"] == "900"][-1]
    assert float(last["mean_cum_regret"]) == pytest.approx(grid_result.find(policy="etc", T=900).mean, rel=1e-9)


def test_scaling_table_selection(tmp_path, grid_result):
    emit_aggregate_csv(grid_result, tmp_path / "a.csv")
    rows = read_aggregate_csv(tmp_path / "a.csv")
    with pytest.raises(ValueError):
        scaling_table(rows)
    assert [(d, T) for d, T, _ in scaling_table(rows, "etc")] == [(2, 400), (2, 900)]
    assert len(scaling_table(rows, "mle_cycle", "modified")) == 2
