"""CSV and JSON emission for traces, per-run summaries and aggregates."""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .environments import PHASES, RegretTrace
from .harness import AggregateResult, mean_sd_ci
from .policies import PolicySpec

TRACE_COLUMNS = ("run_id", "policy", "variant", "d", "T", "epsilon", "delta", "p_star_mix", "seed",
                 "t", "price", "y", "instant_regret", "cum_regret", "phase")
AGGREGATE_COLUMNS = ("policy", "variant", "d", "T", "epsilon", "delta", "p_star_mix", "reps",
                     "mean_regret", "sd_regret", "ci_half_width")
RUN_COLUMNS = ("run_id", "policy", "variant", "d", "T", "epsilon", "delta", "p_star_mix", "rep", "seed",
               "total_regret", "rounds", "error")
PATH_COLUMNS = ("policy", "variant", "d", "T", "epsilon", "delta", "p_star_mix", "t", "mean_cum_regret",
                "ci_half_width")


def fmt(v) -> str:
    """10 significant digits for floats, plain text otherwise, empty for missing."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else f"{float(v):.10g}"
    return str(v)


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _cell_fields(desc: dict) -> list:
    return [desc["policy"], desc["variant"], desc["d"], desc["T"], desc["epsilon"], desc["delta"], desc["p_star_mix"]]


def trace_rows(trace: RegretTrace, spec: PolicySpec, d: int, T: int, mixed_p=None, run_id="0"):
    cum = trace.cum_regret
    head = [run_id, spec.kind, spec.variant, d, T, spec.epsilon, spec.delta, mixed_p, trace.seed]
    for i in range(len(trace)):
        yield head + [i + 1, trace.price[i], trace.y[i], trace.instant_regret[i], cum[i], PHASES[trace.phase[i]]]


def emit_trace_csv(trace: RegretTrace | None, path, spec: PolicySpec | None = None, d: int | None = None,
                   T: int | None = None, mixed_p=None, run_id="0") -> int:
    """Write one run's per-round trace; ``trace=None`` writes the header only.  Returns data rows written."""
    n = 0
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(TRACE_COLUMNS)
        if trace is not None:
            for row in trace_rows(trace, spec, d, T, mixed_p, run_id):
                w.writerow([fmt(v) for v in row])
                n += 1
    return n


def emit_aggregate_csv(result: AggregateResult | None, path) -> int:
    """One row per cell.  ``reps`` counts the runs that finished (failed runs are in the per-run file)."""
    n = 0
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(AGGREGATE_COLUMNS)
        for c in [] if result is None else result.cells:
            mean, sd, ci = mean_sd_ci(c.regrets)
            w.writerow([fmt(v) for v in _cell_fields(c.cell.describe()) + [c.n_ok, mean, sd, ci]])
            n += 1
    return n


def emit_runs_csv(result: AggregateResult, path) -> int:
    n = 0
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(RUN_COLUMNS)
        for i, c in enumerate(result.cells):
            for rep, (R, seed, err, rounds) in enumerate(zip(c.regrets, c.seeds, c.errors, c.rounds)):
                w.writerow([fmt(v) for v in [f"c{i}r{rep}"] + _cell_fields(c.cell.describe())
                            + [rep, seed, R, rounds, err]])
                n += 1
    return n


def emit_paths_csv(result: AggregateResult, path) -> int:
    n = 0
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(PATH_COLUMNS)
        for c in result.cells:
            mean, ci = c.mean_path()
            head = _cell_fields(c.cell.describe())
            for t, m, h in zip(c.path_rounds, mean, ci):
                w.writerow([fmt(v) for v in head + [int(t), m, h]])
                n += 1
    return n


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _num(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        return float(s)


def read_aggregate_csv(path) -> list[dict]:
    rows = read_csv(path)
    out = []
    for r in rows:
        out.append({k: (v or None) if k in ("policy", "variant") else _num(v) for k, v in r.items()})
    return out


def scaling_table(rows: list[dict], policy: str | None = None, variant: str | None = None):
    """``(d, T, mean_regret)`` triples from aggregate rows, optionally for one policy."""
    kinds = {(r["policy"], r["variant"]) for r in rows}
    if policy is None and len(kinds) > 1:
        raise ValueError(f"aggregate has several policies {sorted(map(str, kinds))}; choose one")
    return [(r["d"], r["T"], r["mean_regret"]) for r in rows
            if (policy is None or r["policy"] == policy) and (variant is None or r["variant"] == variant)]


def dump_json(obj, fh) -> None:
    json.dump(obj, fh, indent=2, sort_keys=True)
    fh.write("\n")
