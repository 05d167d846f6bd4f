import csv

import numpy as np
import pytest

from dynprice.glm import GlmFamily, covariate, psi_derivatives
from dynprice.loan import (
    COVARIATES,
    IngestionError,
    SchemaError,
    build_pool,
    ingest_loan_csv,
    npv_price,
    read_loan_csv,
    read_pool_csv,
)

# truth in standardized units (each covariate divided by its mean)
ALPHA = np.array([0.8, -0.4, 0.5, 0.3, -0.2])
BETA = np.array([0.3, 0.1, 0.2, 0.15, 0.05])


def synthetic_rows(n, seed=0):
    rng = np.random.default_rng(seed)
    scale = np.array([700.0, 5.0, 25_000.0, 0.2, 60.0])
    # right-skewed positive covariates; the spread after mean-scaling keeps the 10 coefficients identifiable
    Z_raw = rng.lognormal(0.0, 1.0, (n, 5)) * scale
    Z = Z_raw / Z_raw.mean(axis=0)
    p = rng.uniform(0.0, 3.0, n)
    y = (rng.random(n) < psi_derivatives(GlmFamily("logistic"), covariate(Z, p) @ np.r_[ALPHA, BETA], 1)).astype(int)
    return Z_raw, p, y


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


class TestNpv:
    def test_reference_value(self):
        annuity = (1 - 1.0012 ** -36) / 0.0012
        assert npv_price(500, 36, 15_000, 0.0012) == pytest.approx((500 * annuity - 15_000) / 1000, rel=1e-12)
        assert npv_price(500, 36, 15_000, 0.0012) == pytest.approx(2.60640, abs=1e-5)

    def test_zero_rate_single_payment(self):
        assert npv_price(20_500, 1, 20_000, 0.0) == pytest.approx(0.5)

    def test_vectorized(self):
        out = npv_price([500, 500], [36, 1], [15_000, 400], 0.0012)
        assert out.shape == (2,)
        assert out[1] == pytest.approx((500 / 1.0012 - 400) / 1000)

    def test_negative_rate(self):
        with pytest.raises(ValueError):
            npv_price(1, 1, 1, -0.1)


class TestIngest:
    def test_round_trip_recovers_truth(self, tmp_path):
        Z_raw, p, y = synthetic_rows(50_000)
        header = ["apply", "Price", *COVARIATES]
        write_csv(tmp_path / "loans.csv", header,
                  [[int(y[i]), f"{1000 * p[i]:.6f}", *(f"{v:.10g}" for v in Z_raw[i])] for i in range(len(y))])
        pool = ingest_loan_csv(tmp_path / "loans.csv")
        assert np.max(np.abs(pool.truth.alpha - ALPHA)) < 0.05
        assert np.max(np.abs(pool.truth.beta - BETA)) < 0.05
        Z = Z_raw / Z_raw.mean(axis=0)
        X = covariate(Z, p)
        w = psi_derivatives(GlmFamily("logistic"), X @ np.r_[ALPHA, BETA], 2)
        se = np.sqrt(np.diag(np.linalg.inv(X.T @ (w[:, None] * X))))
        assert np.all(np.abs(pool.truth.theta - np.r_[ALPHA, BETA]) < 4 * se)
        assert pool.n_raw == 50_000
        # roughly 1% removed by each filter
        assert 0.97 * 50_000 <= len(pool) <= 0.99 * 50_000 + 1

    def test_filters(self):
        Z_raw, p, y = synthetic_rows(5000, seed=1)
        pool = build_pool(Z_raw, p, y)
        norms = np.linalg.norm(pool.Z, axis=1)
        assert norms.max() <= pool.norm_cut
        assert (pool.Z @ pool.truth.beta).min() >= pool.sensitivity_cut
        assert np.allclose(pool.means, Z_raw.mean(axis=0))

    def test_payment_columns_and_aliases(self, tmp_path):
        header = ["Apply", "Monthly Payment", "Term", "Amount", "primary fico", "competition rate", "onemonth"]
        write_csv(tmp_path / "a.csv", header, [[1, 500, 36, 15000, 700, 4.5, 0.2], [0, 400, 1, 300, 650, 5.0, 0.3]])
        Z, p, y = read_loan_csv(tmp_path / "a.csv")
        assert p[0] == pytest.approx(2.60640, abs=1e-5)
        assert list(y) == [1.0, 0.0]
        # covariate order is fixed regardless of column order
        assert list(Z[0]) == [700, 4.5, 15000, 0.2, 36]

    def test_missing_columns(self, tmp_path):
        write_csv(tmp_path / "b.csv", ["apply", "Term"], [[1, 36]])
        with pytest.raises(SchemaError, match="missing columns"):
            read_loan_csv(tmp_path / "b.csv")

    def test_bad_response(self, tmp_path):
        header = ["apply", "Price", *COVARIATES]
        write_csv(tmp_path / "c.csv", header, [[2, 1000, 1, 1, 1, 1, 1]])
        with pytest.raises(SchemaError):
            read_loan_csv(tmp_path / "c.csv")

    def test_non_numeric(self, tmp_path):
        header = ["apply", "Price", *COVARIATES]
        write_csv(tmp_path / "d.csv", header, [[1, "abc", 1, 1, 1, 1, 1]])
        with pytest.raises(SchemaError):
            read_loan_csv(tmp_path / "d.csv")

    def test_fit_failure_is_ingestion_error(self):
        Z_raw = np.ones((10, 5))
        with pytest.raises(IngestionError):
            build_pool(Z_raw, np.ones(10), np.r_[np.ones(5), np.zeros(5)])

    def test_pool_file_round_trip(self, tmp_path):
        Z_raw, p, y = synthetic_rows(3000, seed=2)
        pool = build_pool(Z_raw, p, y)
        pool.write_csv(tmp_path / "pool.csv")
        names, Z = read_pool_csv(tmp_path / "pool.csv")
        assert names == COVARIATES
        assert np.allclose(Z, pool.Z, rtol=1e-9)
        summary = pool.summary()
        assert summary["rows_kept"] == len(pool) and summary["covariates"] == list(COVARIATES)
