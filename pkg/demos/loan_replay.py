"""Fit a logistic demand model to a loan file and replay pricing on its contexts.

Writes a synthetic loan CSV (same columns as the auto-loan data) into a
scratch directory, then runs the fit-demand and replay commands and prints
the aggregate table.  Pass a real CSV path as the first argument to use it instead.
"""

import csv
import sys
import tempfile
from pathlib import Path

import numpy as np

from dynprice.cli import main
from dynprice.loan import COVARIATES


def synthetic_loans(path: Path, n: int = 20_000, seed: int = 0) -> Path:
    rng = np.random.default_rng(seed)
    scale = np.array([700.0, 5.0, 25_000.0, 0.2, 60.0])
    raw = rng.lognormal(0.0, 0.5, (n, len(COVARIATES))) * scale
    z = raw / raw.mean(axis=0)
    price = rng.uniform(0.2, 3.0, n)
    score = z @ [0.8, -0.4, 0.5, 0.3, -0.2] - price * (z @ [0.3, 0.1, 0.2, 0.15, 0.05])
    apply = rng.random(n) < 1.0 / (1.0 + np.exp(-score))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["apply", "Price", *COVARIATES])
        for i in range(n):
            w.writerow([int(apply[i]), f"{1000 * price[i]:.2f}", *(f"{v:.6g}" for v in raw[i])])
    return path


work = Path(tempfile.mkdtemp(prefix="loan_replay_"))
data = Path(sys.argv[1]) if len(sys.argv) > 1 else synthetic_loans(work / "loans.csv")

main(["fit-demand", str(data), "--out", str(work / "fit")])

config = work / "replay.yaml"
config.write_text(
    "env: {scenario: replay, price_range: [0, 10], explore_range: [0, 3]}\n"
    "policies: [{kind: etc}, {kind: etc_ldp, epsilon: 2.0}]\n"
    "grid: {T_list: [5000, 20000], reps: 3, seed: 1}\n"
)
main(["replay", "--config", str(config), "--pool", str(work / "fit" / "pool.csv"),
      "--theta", str(work / "fit" / "theta.json"), "--out", str(work / "replay")])

print((work / "replay" / "aggregate.csv").read_text())
print(f"outputs in {work}")
