"""Loan-application ingestion: prices from payment streams, standardized covariates, fitted truth."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass

import numpy as np

from .estimation import Dataset, EstimationError, fit_mle
from .glm import GlmFamily, ModelParams, covariate

DEFAULT_RATE = 0.0012
COVARIATES = ("Primary_FICO", "Competition_rate", "Amount_Approved", "onemonth", "Term")
RESPONSE = "apply"
PRICE = "Price"
PAYMENT_COLUMNS = ("Monthly_Payment", "Term", "Amount_Approved")


class SchemaError(ValueError):
    pass


class IngestionError(RuntimeError):
    pass


def _norm(name: str) -> str:
    return re.sub(r"[\s_\-]+", "", name).lower()


_ALIASES = {
    _norm("Monthly_Payment"): ("monthlypayment", "payment"),
    _norm("Amount_Approved"): ("amountapproved", "amount", "loanamount"),
}


def npv_price(monthly_payment, term, amount, rate: float = DEFAULT_RATE):
    """Net present value of the payments minus the amount lent, in thousands.

    ``sum_{i=1..term} (1+rate)^-i`` is evaluated in closed form (or as
    ``term`` when the rate is zero).
    """
    m = np.asarray(monthly_payment, dtype=float)
    n = np.asarray(term, dtype=float)
    a = np.asarray(amount, dtype=float)
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    annuity = n if rate == 0 else -np.expm1(-n * np.log1p(rate)) / rate
    return (m * annuity - a) / 1000.0


@dataclass
class CovariatePool:
    """Filtered, mean-standardized covariates plus the truth fitted on the full file."""

    names: tuple[str, ...]
    Z: np.ndarray  # standardized covariates kept after filtering
    means: np.ndarray  # per-column sample means used for standardizing
    truth: ModelParams
    norm_cut: float
    sensitivity_cut: float
    n_raw: int
    prices: np.ndarray | None = None
    y: np.ndarray | None = None

    def __len__(self):
        return len(self.Z)

    @property
    def d(self) -> int:
        return self.Z.shape[1]

    def summary(self) -> dict:
        return {
            "covariates": list(self.names),
            "alpha": self.truth.alpha.tolist(),
            "beta": self.truth.beta.tolist(),
            "means": self.means.tolist(),
            "norm_cut": self.norm_cut,
            "sensitivity_cut": self.sensitivity_cut,
            "rows_in": self.n_raw,
            "rows_kept": len(self),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.names)
            for row in self.Z:
                w.writerow([f"{v:.10g}" for v in row])


def read_pool_csv(path) -> tuple[tuple[str, ...], np.ndarray]:
    """Covariate names and matrix from a pool file written by :meth:`CovariatePool.write_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty pool file")
    names = tuple(rows[0])
    try:
        Z = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric pool entry ({exc})") from None
    if Z.size == 0:
        raise SchemaError(f"{path}: pool has no rows")
    if Z.shape[1] != len(names):
        raise SchemaError(f"{path}: ragged pool rows")
    return names, Z


def _column_lookup(header: list[str]) -> dict[str, int]:
    out = {}
    for i, h in enumerate(header):
        out.setdefault(_norm(h), i)
    return out


def _find(lookup: dict[str, int], name: str) -> int | None:
    key = _norm(name)
    if key in lookup:
        return lookup[key]
    for alias in _ALIASES.get(key, ()):
        if alias in lookup:
            return lookup[alias]
    return None


def read_loan_csv(path, covariates=COVARIATES, rate: float = DEFAULT_RATE):
    """Parse the file into ``(Z_raw, price_in_thousands, y)``.

    Uses the ``Price`` column (dollars) when present, otherwise the net
    present value of monthly payment, term and amount.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    lookup = _column_lookup(header)
    missing = [c for c in (RESPONSE, *covariates) if _find(lookup, c) is None]
    price_col = _find(lookup, PRICE)
    pay_cols = [_find(lookup, c) for c in PAYMENT_COLUMNS]
    if price_col is None and any(c is None for c in pay_cols):
        missing.append(f"{PRICE} or {'/'.join(PAYMENT_COLUMNS)}")
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    width = len(header)
    if any(len(r) != width for r in rows):
        raise SchemaError(f"{path}: rows do not match the header width")
    data = np.array(rows, dtype=object).reshape(len(rows), width)

    def col(i):
        return data[:, i].astype(float)

    try:
        Z = np.column_stack([col(_find(lookup, c)) for c in covariates])
        y = col(_find(lookup, RESPONSE))
        if price_col is not None:
            p = col(price_col) / 1000.0
        else:
            p = npv_price(col(pay_cols[0]), col(pay_cols[1]), col(pay_cols[2]), rate)
    except ValueError as exc:
        raise SchemaError(f"{path}: unreadable row ({exc})") from None
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise SchemaError(f"{path}: {RESPONSE} must be 0/1")
    return Z, p, y


def build_pool(Z_raw, prices, y, names=COVARIATES, quantile_norm: float = 0.99,
               quantile_sens: float = 0.01) -> CovariatePool:
    """Standardize, fit the logistic truth on every row, then apply the quantile filters."""
    Z_raw = np.asarray(Z_raw, dtype=float)
    if len(Z_raw) == 0:
        raise IngestionError("no rows to ingest")
    if not (0 < quantile_norm <= 1 and 0 <= quantile_sens < 1):
        raise ValueError("quantiles must lie in (0, 1]")
    means = Z_raw.mean(axis=0)
    if np.any(means == 0):
        raise IngestionError("a covariate has zero mean and cannot be standardized")
    Z = Z_raw / means
    family = GlmFamily("logistic")
    try:
        truth = fit_mle(family, Dataset(covariate(Z, np.asarray(prices, dtype=float)), np.asarray(y, dtype=float)))
    except EstimationError as exc:
        raise IngestionError(f"demand fit failed: {exc}") from exc
    norms = np.linalg.norm(Z, axis=1)
    sens = Z @ truth.beta
    norm_cut = float(np.quantile(norms, quantile_norm))
    sens_cut = float(np.quantile(sens, quantile_sens))
    keep = (norms <= norm_cut) & (sens >= sens_cut)
    if not np.any(keep):
        raise IngestionError("filtering removed every row")
    return CovariatePool(tuple(names), Z[keep], means, truth, norm_cut, sens_cut, len(Z),
                         np.asarray(prices, dtype=float)[keep], np.asarray(y, dtype=float)[keep])


def ingest_loan_csv(path, rate: float = DEFAULT_RATE, quantile_norm: float = 0.99,
                    quantile_sens: float = 0.01, covariates=COVARIATES) -> CovariatePool:
    Z, p, y = read_loan_csv(path, covariates, rate)
    return build_pool(Z, p, y, covariates, quantile_norm, quantile_sens)
