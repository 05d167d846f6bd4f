"""Regret of ETC against its private variants on S1 (d=2), paired seeds.

Mixed privacy lets 20% of customers share raw data; the rest are
privatized with the same epsilon as ETC-LDP.
"""

from dynprice.harness import ExperimentGrid, run_grid
from dynprice.policies import PolicySpec

policies = (
    PolicySpec("etc"),
    PolicySpec("etc_ldp", epsilon=2.0),
    PolicySpec("etc_ldp_approx", epsilon=2.0, delta=1e-3),
    PolicySpec("etc_ldp_mixed", epsilon=2.0),
)
grid = ExperimentGrid(policies=policies, d_list=(2,), T_list=(50_000,), mixed_p_list=(0.2,), reps=5, seed=3,
                      path_stride=5_000)
result = run_grid(grid)

base = result.find(policy="etc").mean
for c in result.cells:
    print(f"{c.cell.policy.kind:<16} mean R_T = {c.mean:9.1f} +- {c.ci_half_width:7.1f}   x{c.mean / base:5.1f}")
