"""Fit ln R = b0 + b_d ln d + b_T ln T + 0.5 lnln T for ETC on S1.

A reduced version of the acceptance grid (fewer reps, shorter horizons);
takes under half a minute.
"""

from dynprice.harness import ExperimentGrid, fit_regret_scaling, run_grid
from dynprice.policies import PolicySpec

grid = ExperimentGrid(policies=(PolicySpec("etc"),), d_list=(1, 4, 9), T_list=(5_000, 20_000, 45_000),
                      reps=8, seed=1, path_stride=5_000)
result = run_grid(grid)

print(f"{'d':>3} {'T':>7} {'mean R_T':>10} {'CI +-':>8}")
for c in result.cells:
    print(f"{c.cell.d:>3} {c.cell.T:>7} {c.mean:>10.1f} {c.ci_half_width:>8.1f}")

fit = fit_regret_scaling(result.table(), "half_loglog")
print(f"\nbeta_d = {fit.beta_d:.2f}, beta_T = {fit.beta_T:.2f}  (sqrt(dT) scaling gives 0.5, 0.5)")
