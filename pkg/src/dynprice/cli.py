"""Command-line front end.

Exit status: 0 on success, 1 for usage or configuration errors, 2 for
runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config, schema_help
from .environments import SimulationError, simulate_run
from .estimation import EstimationError
from .glm import ModelParams
from .harness import EnvTemplate, fit_regret_scaling, run_grid
from .loan import DEFAULT_RATE, IngestionError, SchemaError, ingest_loan_csv, read_pool_csv
from .reporting import (
    dump_json,
    emit_aggregate_csv,
    emit_paths_csv,
    emit_runs_csv,
    emit_trace_csv,
    read_aggregate_csv,
    scaling_table,
)

log = logging.getLogger("dynprice")

OFFSET_FLAGS = {"none": "none", "half": "half_loglog", "full": "loglog"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dynprice", description="Contextual dynamic pricing simulations.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="one environment, one policy, one seed -> per-round trace CSV")
    s.add_argument("--config", type=Path, help="run config (first policy is used unless --policy is given)")
    s.add_argument("--policy", help="policy kind to pick from the config")
    s.add_argument("--d", type=_positive_int, help="dimension (overrides env.d)")
    s.add_argument("--horizon", type=_positive_int, help="number of rounds (overrides env.horizon)")
    s.add_argument("--seed", type=_seed, default=0)
    s.add_argument("--out", type=Path, default=Path("."), help="output directory (writes trace.csv)")

    g = sub.add_parser("grid", help="replicated grid -> aggregate, per-run and path CSVs")
    g.add_argument("--config", type=Path, required=True)
    g.add_argument("--seed", type=_seed, help="overrides grid.seed")
    g.add_argument("--jobs", type=_positive_int, default=1)
    g.add_argument("--out", type=Path, help="overrides output.dir")

    c = sub.add_parser("scaling", help="fit ln R = b0 + b_d ln d + b_T ln T + offset from an aggregate CSV")
    c.add_argument("aggregate", type=Path)
    c.add_argument("--offset", choices=sorted(OFFSET_FLAGS), default="none",
                   help="none, half (0.5 lnln T) or full (lnln T)")
    c.add_argument("--policy")
    c.add_argument("--variant")

    f = sub.add_parser("fit-demand", help="loan CSV -> fitted logistic truth JSON and filtered pool CSV")
    f.add_argument("data", type=Path)
    f.add_argument("--rate", type=float, default=DEFAULT_RATE, help="monthly discount rate")
    f.add_argument("--quantile-norm", type=float, default=0.99)
    f.add_argument("--quantile-sens", type=float, default=0.01)
    f.add_argument("--out", type=Path, default=Path("."), help="writes theta.json and pool.csv here")

    r = sub.add_parser("replay", help="grid on contexts resampled from a pool file")
    r.add_argument("--config", type=Path, required=True)
    r.add_argument("--pool", type=Path, help="pool CSV (overrides env.pool)")
    r.add_argument("--theta", type=Path, help="theta JSON from fit-demand (overrides env.theta)")
    r.add_argument("--seed", type=_seed)
    r.add_argument("--jobs", type=_positive_int, default=1)
    r.add_argument("--out", type=Path)

    sub.add_parser("schema", help="print the run-config JSON schema")
    return p


def _load_theta(path: Path) -> ModelParams:
    try:
        doc = json.loads(path.read_text())
        return ModelParams(doc["alpha"], doc["beta"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: not a theta file ({exc})") from None


def replay_template(cfg: RunConfig, pool_path: Path | None = None, theta_path: Path | None = None) -> EnvTemplate:
    env = cfg.env
    truth = _load_theta(theta_path) if theta_path else cfg.truth()
    pool = None
    if pool_path is not None or "pool" in env:
        _, pool = read_pool_csv(pool_path or cfg.resolve(env["pool"]))
    if truth is None or pool is None:
        if "data" not in env:
            raise ConfigError("replay needs a pool and theta, or env.data to fit them from")
        ingested = ingest_loan_csv(cfg.resolve(env["data"]), rate=env.get("rate", DEFAULT_RATE))
        truth = truth if truth is not None else ingested.truth
        pool = pool if pool is not None else ingested.Z
    if truth.d != pool.shape[1]:
        raise ConfigError(f"theta has d={truth.d} but the pool has {pool.shape[1]} columns")
    return cfg.template(truth=truth, pool=pool)


def _template(cfg: RunConfig) -> EnvTemplate:
    if cfg.env["scenario"] == "replay":
        return replay_template(cfg)
    if cfg.env.get("theta") == "fit-from-data":
        return cfg.template(truth=ingest_loan_csv(cfg.resolve(cfg.env["data"]),
                                                  rate=cfg.env.get("rate", DEFAULT_RATE)).truth)
    return cfg.template()


def _write_grid(result, cfg: RunConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    emit_aggregate_csv(result, out / "aggregate.csv")
    emit_runs_csv(result, out / "runs.csv")
    emit_paths_csv(result, out / "paths.csv")
    (out / "config.json").write_text(cfg.dumps())
    log.info("wrote %s (%d cells, %d failed runs)", out, len(result.cells), result.errors)


def _progress(done, total):
    if done == total or done % max(1, total // 20) == 0:
        log.info("%d/%d runs", done, total)


def cmd_simulate(args) -> int:
    if args.config is None:
        raise UsageError("simulate needs --config")
    cfg = load_config(args.config)
    specs = cfg.policy_specs()
    if args.policy:
        specs = [s for s in specs if s.kind == args.policy]
        if not specs:
            raise UsageError(f"policy {args.policy!r} not in the config")
    spec = specs[0]
    template = _template(cfg)
    d = args.d or cfg.env.get("d") or (template.pool.shape[1] if template.pool is not None else None)
    T = args.horizon or cfg.env.get("horizon")
    if d is None or T is None:
        raise UsageError("simulate needs a dimension and horizon (env.d/--d and env.horizon/--horizon)")
    env = template.build(d, T, cfg.env.get("mixed_p"))
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "trace.csv"
    try:
        trace = simulate_run(env, spec, args.seed)
    except SimulationError as exc:
        emit_trace_csv(exc.trace, path, spec, d, T, env.mixed_p)
        raise
    emit_trace_csv(trace, path, spec, d, T, env.mixed_p)
    log.info("R_T = %.6g over %d rounds -> %s", trace.total_regret, len(trace), path)
    return 0


def cmd_grid(args) -> int:
    cfg = load_config(args.config)
    template = _template(cfg)
    d_default = template.pool.shape[1] if template.pool is not None else None
    grid = cfg.grid(seed=args.seed, jobs=args.jobs, d_default=d_default)
    result = run_grid(grid, template, progress=_progress)
    _write_grid(result, cfg, args.out or cfg.resolve(cfg.output["dir"]))
    return 0


def cmd_replay(args) -> int:
    cfg = load_config(args.config)
    if cfg.env["scenario"] != "replay":
        raise UsageError("replay needs env.scenario = replay")
    template = replay_template(cfg, args.pool, args.theta)
    grid = cfg.grid(seed=args.seed, jobs=args.jobs, d_default=template.pool.shape[1])
    if any(d != template.pool.shape[1] for d in grid.d_list):
        raise ConfigError("replay grid dimensions must match the pool")
    result = run_grid(grid, template, progress=_progress)
    _write_grid(result, cfg, args.out or cfg.resolve(cfg.output["dir"]))
    return 0


def cmd_scaling(args) -> int:
    rows = read_aggregate_csv(args.aggregate)
    try:
        table = scaling_table(rows, args.policy, args.variant)
        fit = fit_regret_scaling(table, OFFSET_FLAGS[args.offset])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    dump_json(fit.as_dict(), sys.stdout)
    return 0


def cmd_fit_demand(args) -> int:
    pool = ingest_loan_csv(args.data, rate=args.rate, quantile_norm=args.quantile_norm,
                           quantile_sens=args.quantile_sens)
    args.out.mkdir(parents=True, exist_ok=True)
    summary = pool.summary()
    with open(args.out / "theta.json", "w") as fh:
        dump_json(summary, fh)
    pool.write_csv(args.out / "pool.csv")
    dump_json(summary, sys.stdout)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "grid": cmd_grid,
    "scaling": cmd_scaling,
    "fit-demand": cmd_fit_demand,
    "replay": cmd_replay,
    "schema": lambda args: print(schema_help()) or 0,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"dynprice: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"dynprice: error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, SchemaError) as exc:
        print(f"dynprice: error: {exc}", file=sys.stderr)
        print("run `dynprice schema` to see the accepted config format", file=sys.stderr)
        return 1
    except (SimulationError, EstimationError, IngestionError, OSError, ValueError) as exc:
        print(f"dynprice: runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
