import math

import numpy as np
import pytest

from dynprice.glm import ModelParams
from dynprice.harness import (
    AggregateResult,
    EnvTemplate,
    ExperimentGrid,
    aggregate,
    fit_regret_scaling,
    mean_sd_ci,
    run_grid,
    run_seed,
)
from dynprice.policies import PolicySpec, Tuning


def small_grid(**kw):
    base = dict(policies=(PolicySpec("etc"), PolicySpec("etc_ldp")), d_list=(2,), T_list=(500, 800),
                reps=3, seed=7, path_stride=100)
    base.update(kw)
    return ExperimentGrid(**base)


class TestGrid:
    def test_clairvoyant_cell(self):
        res = run_grid(ExperimentGrid((PolicySpec("clairvoyant"),), (2,), (300,), reps=3))
        cell = res.cells[0]
        assert cell.mean == pytest.approx(0.0, abs=300 * 1e-6)
        assert cell.sd == pytest.approx(0.0, abs=1e-6)
        assert cell.n_ok == 3

    def test_cells_expand_privacy_only_for_private_kinds(self):
        grid = ExperimentGrid((PolicySpec("etc"), PolicySpec("etc_ldp"), PolicySpec("etc_ldp_approx")),
                              (2,), (100,), eps_list=(0.5, 1.0), delta_list=(0.1, 0.01))
        kinds = [(c.policy.kind, c.epsilon, c.delta) for c in grid.cells()]
        assert kinds.count(("etc", None, None)) == 1
        assert {k for k in kinds if k[0] == "etc_ldp"} == {("etc_ldp", 0.5, None), ("etc_ldp", 1.0, None)}
        assert len([k for k in kinds if k[0] == "etc_ldp_approx"]) == 4

    def test_seeds_ignore_policy_and_order(self):
        grid = small_grid()
        template = EnvTemplate()
        cells = grid.cells()
        etc_cell, ldp_cell = cells[0], cells[2]
        assert etc_cell.T == ldp_cell.T
        assert run_seed(7, template, etc_cell, 1) == run_seed(7, template, ldp_cell, 1)
        assert run_seed(7, template, etc_cell, 1) != run_seed(7, template, etc_cell, 2)
        assert run_seed(7, template, etc_cell, 0) != run_seed(8, template, etc_cell, 0)
        assert 0 <= run_seed(7, template, etc_cell, 0) < 2 ** 64

    def test_permuting_cells_keeps_runs(self):
        a = run_grid(small_grid())
        b = run_grid(small_grid(policies=(PolicySpec("etc_ldp"), PolicySpec("etc")), T_list=(800, 500)))
        for ca in a.cells:
            cb = b.find(**{k: v for k, v in ca.cell.describe().items()})
            assert np.array_equal(ca.regrets, cb.regrets)
            assert ca.seeds == cb.seeds

    def test_parallel_matches_serial(self):
        a = run_grid(small_grid(jobs=1))
        b = run_grid(small_grid(jobs=2))
        for ca, cb in zip(a.cells, b.cells):
            assert np.array_equal(ca.regrets, cb.regrets)
            assert np.array_equal(ca.paths, cb.paths)

    def test_ci_is_three_sigma_over_root_n(self):
        res = run_grid(small_grid(reps=5))
        for c in res.cells:
            S = np.std(c.regrets, ddof=1)
            assert c.ci_half_width == pytest.approx(3 * S / math.sqrt(5))

    def test_aggregation_is_pure_fold(self):
        res = run_grid(small_grid())
        from dynprice.harness import RunRecord
        records = [RunRecord(i, rep, c.seeds[rep], c.regrets[rep], c.wall_times[rep], c.paths[rep], c.errors[rep],
                             int(c.rounds[rep]))
                   for i, c in enumerate(res.cells) for rep in range(len(c.regrets))]
        again = aggregate([c.cell for c in res.cells], records[::-1], res.base_seed, res.path_stride)
        for x, y in zip(res.cells, again.cells):
            assert (x.mean, x.sd, x.ci_half_width) == (y.mean, y.sd, y.ci_half_width)
            assert np.array_equal(x.paths, y.paths)

    def test_paths(self):
        res = run_grid(small_grid())
        c = res.find(policy="etc", T=800)
        assert list(c.path_rounds) == [100, 200, 300, 400, 500, 600, 700, 800]
        mean, ci = c.mean_path()
        assert mean[-1] == pytest.approx(c.mean)
        assert np.all(np.diff(mean) >= -1e-9) and np.all(ci >= 0)

    def test_failures_are_recorded(self):
        # supCB with K=1 is a configuration error at construction
        grid = ExperimentGrid((PolicySpec("supcb", tuning=Tuning(K=1)), PolicySpec("etc")), (2,), (200,), reps=2)
        res = run_grid(grid)
        bad = res.find(policy="supcb")
        assert bad.n_failed == 2 and all("ConfigurationError" in e for e in bad.errors)
        assert res.find(policy="etc").n_ok == 2
        assert res.errors == 2
        assert math.isnan(bad.mean)

    def test_table(self):
        res = run_grid(small_grid())
        assert [(d, T) for d, T, _ in res.table("etc")] == [(2, 500), (2, 800)]

    def test_template_key_tracks_market(self):
        a = EnvTemplate()
        b = EnvTemplate(truth=ModelParams([1.0, 1.0], [0.5, 0.5]))
        assert a.content_key() != b.content_key()
        assert EnvTemplate().content_key() == a.content_key()

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            small_grid(reps=0)
        with pytest.raises(ValueError):
            small_grid(policies=())


class TestScaling:
    points = [(d, T) for d in (1, 4, 9) for T in (10_000, 40_000, 90_000)]

    def test_square_root_law(self):
        fit = fit_regret_scaling([(d, T, math.sqrt(d * T)) for d, T in self.points])
        assert fit.beta_d == pytest.approx(0.5) and fit.beta_T == pytest.approx(0.5)
        assert fit.beta0 == pytest.approx(0.0, abs=1e-10)

    def test_linear_in_d(self):
        fit = fit_regret_scaling([(d, T, d * math.sqrt(T)) for d, T in self.points])
        assert fit.beta_d == pytest.approx(1.0) and fit.beta_T == pytest.approx(0.5)

    @pytest.mark.parametrize("kind,w", [("half_loglog", 0.5), ("loglog", 1.0)])
    def test_offsets_are_removed(self, kind, w):
        # an offset of w lnln T is a factor (ln T)^w
        table = [(d, T, math.sqrt(d * T) * math.log(T) ** w) for d, T in self.points]
        fit = fit_regret_scaling(table, kind)
        assert fit.beta_d == pytest.approx(0.5) and fit.beta_T == pytest.approx(0.5)
        assert fit.offset == kind

    def test_single_d_drops_coefficient(self):
        fit = fit_regret_scaling([(4, T, 3 * T ** 0.6) for T in (1000, 2000, 4000)])
        assert fit.beta_d is None
        assert fit.beta_T == pytest.approx(0.6)
        assert fit.beta0 == pytest.approx(math.log(3))

    def test_errors(self):
        with pytest.raises(ValueError):
            fit_regret_scaling([(1, 100, 1.0), (2, 100, 2.0)])
        with pytest.raises(ValueError):
            fit_regret_scaling([(1, 100, 1.0), (2, 100, 0.0), (3, 200, 1.0)])
        with pytest.raises(ValueError):
            fit_regret_scaling([(d, T, 1.0) for d, T in self.points], "bogus")


def test_mean_sd_ci_skips_failures():
    m, s, h = mean_sd_ci([1.0, 2.0, 3.0, float("nan")])
    assert (m, s) == (2.0, 1.0)
    assert h == pytest.approx(3 / math.sqrt(3))
    assert all(math.isnan(x) for x in mean_sd_ci([]))
    assert mean_sd_ci([5.0]) == (5.0, 0.0, 0.0)


def test_aggregate_result_find_requires_unique():
    res = AggregateResult([], 0, 100)
    with pytest.raises(KeyError):
        res.find(policy="etc")
