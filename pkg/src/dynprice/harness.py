"""Replicated experiment grids, aggregation with confidence intervals and the regret-scaling fit."""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .environments import EnvSpec, SimulationError, make_env, simulate_run
from .glm import GlmFamily, ModelParams, PriceRange
from .policies import PRIVATE_KINDS, PolicySpec

log = logging.getLogger(__name__)

OFFSETS = {"none": 0.0, "half_loglog": 0.5, "loglog": 1.0}
CI_MULTIPLIER = 3.0


@dataclass(frozen=True, eq=False)
class EnvTemplate:
    """Everything about the market except d, T and the non-private share."""

    scenario: str = "s1"
    family: str = "logistic"
    price_range: tuple[float, float] = (0.0, 3.0)
    explore_range: tuple[float, float] | None = None
    truth: ModelParams | None = None
    pool: np.ndarray | None = None
    delta: float = 0.5
    v: tuple | None = None
    noise_scale: float = 1.0

    def build(self, d: int, T: int, mixed_p: float | None = None) -> EnvSpec:
        return make_env(
            self.scenario, d, T,
            family=GlmFamily(self.family, self.noise_scale),
            mixed_p=mixed_p,
            truth=self.truth,
            price_range=PriceRange(*self.price_range),
            delta=self.delta,
            v=self.v,
            pool=self.pool,
            explore_range=None if self.explore_range is None else PriceRange(*self.explore_range),
        )

    def content_key(self) -> list:
        truth = None if self.truth is None else [round(float(x), 12) for x in self.truth.theta]
        pool = None
        if self.pool is not None:
            pool = hashlib.blake2b(np.ascontiguousarray(self.pool, dtype=float).tobytes(), digest_size=8).hexdigest()
        return [self.scenario, self.family, list(self.price_range),
                None if self.explore_range is None else list(self.explore_range),
                truth, pool, self.delta, None if self.v is None else list(self.v), self.noise_scale]


@dataclass(frozen=True)
class Cell:
    policy: PolicySpec
    d: int
    T: int
    epsilon: float | None = None
    delta: float | None = None
    mixed_p: float | None = None

    @property
    def spec(self) -> PolicySpec:
        return replace(self.policy, epsilon=self.epsilon, delta=self.delta)

    def describe(self) -> dict:
        return {"policy": self.policy.kind, "variant": self.policy.variant, "d": self.d, "T": self.T,
                "epsilon": self.epsilon, "delta": self.delta, "p_star_mix": self.mixed_p}


@dataclass(frozen=True)
class ExperimentGrid:
    """Cross product of policies with d, T, epsilon, delta and mixed-share values.

    Privacy levels only multiply the private policies; a policy spec that
    already fixes ``epsilon`` keeps it.
    """

    policies: tuple[PolicySpec, ...]
    d_list: tuple[int, ...]
    T_list: tuple[int, ...]
    eps_list: tuple[float, ...] = (1.0,)
    delta_list: tuple[float | None, ...] = (None,)
    mixed_p_list: tuple[float | None, ...] = (None,)
    reps: int = 10
    seed: int = 0
    jobs: int = 1
    path_stride: int = 100

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not self.policies or not self.d_list or not self.T_list:
            raise ValueError("a grid needs at least one policy, d and T")
        if self.jobs < 1 or self.path_stride < 1:
            raise ValueError("jobs and path_stride must be positive")

    def cells(self) -> list[Cell]:
        out = []
        for pol, d, T, mix in itertools.product(self.policies, self.d_list, self.T_list, self.mixed_p_list):
            if pol.kind in PRIVATE_KINDS and pol.epsilon is None:
                deltas = self.delta_list if pol.kind == "etc_ldp_approx" else (None,)
                privacy = list(itertools.product(self.eps_list, deltas))
            else:
                privacy = [(pol.epsilon, pol.delta)]
            for eps, dl in privacy:
                out.append(Cell(pol, d, T, eps, dl, mix))
        return out


def run_seed(base: int, template: EnvTemplate, cell: Cell, rep: int) -> int:
    """Stable 64-bit seed for one run.

    Depends on the market (template, d, T, mixed share) and the replicate,
    not on the policy or privacy level, so every policy in a grid sees the
    same contexts and demand noise for a given replicate.
    """
    key = json.dumps([int(base), template.content_key(), cell.d, cell.T, cell.mixed_p, int(rep)])
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "little")


@dataclass
class RunRecord:
    cell: int
    rep: int
    seed: int
    total_regret: float
    wall_time: float
    path: np.ndarray
    error: str | None = None
    rounds: int = 0


def path_rounds(T: int, stride: int) -> np.ndarray:
    idx = np.arange(stride, T + 1, stride)
    if len(idx) == 0 or idx[-1] != T:
        idx = np.append(idx, T)
    return idx


def _run_task(task) -> RunRecord:
    template, cell_index, cell, rep, seed, stride = task
    env = template.build(cell.d, cell.T, cell.mixed_p)
    rounds = path_rounds(cell.T, stride)
    try:
        trace = simulate_run(env, cell.spec, seed)
        error = None
    except SimulationError as exc:
        trace = exc.trace
        error = str(exc)
    except Exception as exc:  # noqa: BLE001 - configuration problems are recorded per run
        return RunRecord(cell_index, rep, seed, math.nan, 0.0, np.full(len(rounds), np.nan),
                         f"{type(exc).__name__}: {exc}", 0)
    cum = trace.cum_regret
    path = np.full(len(rounds), np.nan)
    ok = rounds <= len(cum)
    path[ok] = cum[rounds[ok] - 1]
    total = trace.total_regret if error is None else math.nan
    return RunRecord(cell_index, rep, seed, total, trace.wall_time, path, error, len(trace))


@dataclass
class CellResult:
    cell: Cell
    regrets: np.ndarray  # per-run R_T, NaN for failed runs
    seeds: list[int]
    wall_times: np.ndarray
    errors: list[str | None]
    path_rounds: np.ndarray
    paths: np.ndarray  # (reps, len(path_rounds))
    rounds: np.ndarray = None  # rounds completed per run

    @property
    def n_ok(self) -> int:
        return int(np.sum(np.isfinite(self.regrets)))

    @property
    def n_failed(self) -> int:
        return len(self.regrets) - self.n_ok

    @property
    def mean(self) -> float:
        return mean_sd_ci(self.regrets)[0]

    @property
    def sd(self) -> float:
        return mean_sd_ci(self.regrets)[1]

    @property
    def ci_half_width(self) -> float:
        return mean_sd_ci(self.regrets)[2]

    def mean_path(self):
        """Pointwise mean cumulative regret and CI half-width at ``path_rounds``."""
        ok = np.isfinite(self.regrets)
        P = self.paths[ok]
        n = len(P)
        if n == 0:
            nan = np.full(len(self.path_rounds), np.nan)
            return nan, nan
        sd = P.std(axis=0, ddof=1) if n > 1 else np.zeros(P.shape[1])
        return P.mean(axis=0), CI_MULTIPLIER * sd / math.sqrt(n)


def mean_sd_ci(values) -> tuple[float, float, float]:
    """Mean, sample s.d. and ``3 S / sqrt(n)`` over the finite entries."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    n = len(v)
    if n == 0:
        return math.nan, math.nan, math.nan
    mean = float(np.mean(v))
    sd = float(np.std(v, ddof=1)) if n > 1 else 0.0
    return mean, sd, CI_MULTIPLIER * sd / math.sqrt(n)


@dataclass
class AggregateResult:
    cells: list[CellResult]
    base_seed: int
    path_stride: int
    errors: int = 0

    def table(self, policy: str | None = None, variant: str | None = None) -> list[tuple[int, int, float]]:
        """``(d, T, mean R_T)`` triples, ready for :func:`fit_regret_scaling`."""
        return [(c.cell.d, c.cell.T, c.mean) for c in self.cells
                if (policy is None or c.cell.policy.kind == policy)
                and (variant is None or c.cell.policy.variant == variant)]

    def find(self, **match) -> CellResult:
        hits = [c for c in self.cells if all(v == c.cell.describe()[k] for k, v in match.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} cells match {match}")
        return hits[0]


def aggregate(cells: list[Cell], records: list[RunRecord], base_seed: int, path_stride: int) -> AggregateResult:
    """Fold per-run records into per-cell summaries (order of ``records`` is irrelevant)."""
    by_cell: dict[int, list[RunRecord]] = {i: [] for i in range(len(cells))}
    for r in records:
        by_cell[r.cell].append(r)
    out = []
    n_err = 0
    for i, cell in enumerate(cells):
        rs = sorted(by_cell[i], key=lambda r: r.rep)
        n_err += sum(r.error is not None for r in rs)
        rounds = path_rounds(cell.T, path_stride)
        paths = np.array([r.path for r in rs]) if rs else np.empty((0, len(rounds)))
        out.append(CellResult(cell, np.array([r.total_regret for r in rs]), [r.seed for r in rs],
                              np.array([r.wall_time for r in rs]), [r.error for r in rs], rounds, paths,
                              np.array([r.rounds for r in rs], dtype=int)))
    return AggregateResult(out, base_seed, path_stride, n_err)


def run_grid(grid: ExperimentGrid, template: EnvTemplate | None = None, progress=None) -> AggregateResult:
    """Run every cell ``grid.reps`` times and aggregate.

    Results do not depend on ``grid.jobs`` or on cell order.  Failed runs
    are kept (with NaN regret and their error message) instead of aborting.
    """
    template = template or EnvTemplate()
    cells = grid.cells()
    tasks = [(template, i, cell, rep, run_seed(grid.seed, template, cell, rep), grid.path_stride)
             for i, cell in enumerate(cells) for rep in range(grid.reps)]
    records: list[RunRecord] = []
    if grid.jobs == 1 or len(tasks) <= 1:
        for task in tasks:
            records.append(_run_task(task))
            if progress:
                progress(len(records), len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=grid.jobs) as pool:
            for rec in pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * grid.jobs))):
                records.append(rec)
                if progress:
                    progress(len(records), len(tasks))
    result = aggregate(cells, records, grid.seed, grid.path_stride)
    if result.errors:
        log.warning("%d of %d runs failed", result.errors, len(tasks))
    return result


@dataclass
class ScalingFit:
    beta0: float
    beta_d: float | None
    beta_T: float | None
    offset: str
    n_points: int
    residuals: np.ndarray = field(repr=False, default=None)

    def as_dict(self) -> dict:
        return {"beta0": self.beta0, "beta_d": self.beta_d, "beta_T": self.beta_T,
                "offset": self.offset, "n_points": self.n_points}


def regret_offset(T, kind: str):
    try:
        w = OFFSETS[kind]
    except KeyError:
        raise ValueError(f"offset must be one of {sorted(OFFSETS)}") from None
    return w * np.log(np.log(np.asarray(T, dtype=float)))


def fit_regret_scaling(table, offset_kind: str = "none") -> ScalingFit:
    """OLS of ``ln R - offset(T)`` on ``(1, ln d, ln T)``.

    A regressor that does not vary (one d, or one T) is dropped and its
    coefficient reported as ``None``.
    """
    rows = np.asarray([(float(d), float(T), float(R)) for d, T, R in table])
    if rows.ndim != 2 or len({(d, T) for d, T, _ in rows}) < 3:
        raise ValueError("need at least three distinct (d, T) points")
    d, T, R = rows.T
    if np.any(~np.isfinite(R)) or np.any(R <= 0):
        raise ValueError("mean regrets must be positive and finite")
    if np.any(T <= math.e):
        raise ValueError("T must exceed e for the log-log offset")
    yv = np.log(R) - regret_offset(T, offset_kind)
    cols = [np.ones_like(d)]
    names = ["beta0"]
    if len(np.unique(d)) > 1:
        cols.append(np.log(d))
        names.append("beta_d")
    if len(np.unique(T)) > 1:
        cols.append(np.log(T))
        names.append("beta_T")
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, yv, rcond=None)
    fitted = dict(zip(names, coef))
    return ScalingFit(float(fitted["beta0"]),
                      None if "beta_d" not in fitted else float(fitted["beta_d"]),
                      None if "beta_T" not in fitted else float(fitted["beta_T"]),
                      offset_kind, len(rows), yv - A @ coef)
