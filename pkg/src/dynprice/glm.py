"""GLM demand model: link functions, demand sampling, revenue and optimal prices.

The demand of a consumer with context ``z`` offered price ``p`` follows a GLM
with natural parameter ``x'theta`` where ``x = (z, -p z)`` and
``theta = (alpha, beta)``.  Its mean is ``psi'(z'alpha - (z'beta) p)``.

Everything here is pure given the random source.  Most functions accept
arrays and broadcast, which is what the simulation loop relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

FAMILIES = ("gaussian", "logistic", "poisson")

# grid-then-golden price search
GRID_POINTS = 201
GOLDEN_TOL = 1e-8
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class GlmFamily:
    """Exponential-family demand model.

    ``noise_scale`` is the Gaussian error s.d.; it is ignored (fixed to 1)
    for the logistic and Poisson families whose noise is implied.
    """

    kind: str = "logistic"
    noise_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"unknown GLM family {self.kind!r}; expected one of {FAMILIES}")
        if self.kind != "gaussian" and self.noise_scale != 1.0:
            object.__setattr__(self, "noise_scale", 1.0)
        if not self.noise_scale >= 0:
            raise ValueError("noise_scale must be nonnegative")

    def psi(self, a, order=0):
        return psi_derivatives(self, a, order)

    def mean(self, a):
        """Inverse link ``psi'``."""
        return psi_derivatives(self, a, 1)


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Demand parameter theta = (alpha, beta), each of length d."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float)).copy()
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float)).copy()
        if alpha.ndim != 1 or alpha.shape != beta.shape or alpha.size < 1:
            raise ValueError("alpha and beta must be 1-d vectors of equal length >= 1")
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
            raise ValueError("model parameters must be finite")
        alpha.flags.writeable = False
        beta.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def d(self) -> int:
        return self.alpha.size

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta])

    @classmethod
    def from_theta(cls, theta) -> "ModelParams":
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or theta.size % 2:
            raise ValueError("theta must be a 1-d vector of even length")
        d = theta.size // 2
        return cls(theta[:d], theta[d:])

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return np.array_equal(self.alpha, other.alpha) and np.array_equal(self.beta, other.beta)

    def __hash__(self):
        return hash((self.alpha.tobytes(), self.beta.tobytes()))

    def __repr__(self):
        return f"ModelParams(alpha={self.alpha.tolist()}, beta={self.beta.tolist()})"


@dataclass(frozen=True)
class PriceRange:
    l: float
    u: float

    def __post_init__(self):
        if not (0 <= self.l < self.u) or not np.isfinite(self.u):
            raise ValueError(f"invalid price range [{self.l}, {self.u}]; need 0 <= l < u")

    @property
    def width(self) -> float:
        return self.u - self.l

    def clip(self, p):
        return np.clip(p, self.l, self.u)

    def contains(self, p, tol=0.0) -> bool:
        p = np.asarray(p)
        return bool(np.all((p >= self.l - tol) & (p <= self.u + tol)))


def as_params(theta) -> ModelParams:
    if isinstance(theta, ModelParams):
        return theta
    return ModelParams.from_theta(theta)


@dataclass(frozen=True, eq=False)
class Covariate:
    """A context and the price offered, with ``x = (z, -p z)``."""

    z: np.ndarray
    p: float

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        if z.ndim != 1:
            raise ValueError("z must be a vector")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "p", float(self.p))

    @property
    def x(self) -> np.ndarray:
        return covariate(self.z, self.p)

    def check_norm(self, bound: float = 1.0) -> None:
        if np.linalg.norm(self.z) > bound * (1 + 1e-12):
            raise ValueError(f"context norm {np.linalg.norm(self.z):.6g} exceeds {bound}")


def covariate(z, p) -> np.ndarray:
    """Return ``x = (z, -p z)``.  Broadcasts over rows of ``z`` and ``p``."""
    z = np.asarray(z, dtype=float)
    p = np.asarray(p, dtype=float)
    if z.ndim == 1:
        return np.concatenate([z, -p * z])
    return np.hstack([z, -p[:, None] * z])


def psi_derivatives(family: GlmFamily, a, order: int):
    """Evaluate the ``order``-th derivative of the family's cumulant ``psi`` at ``a``."""
    if order not in (0, 1, 2, 3) or isinstance(order, bool):
        raise ValueError(f"order must be one of 0, 1, 2, 3; got {order!r}")
    a = np.asarray(a, dtype=float)
    kind = family.kind
    if kind == "gaussian":
        if order == 0:
            out = 0.5 * a * a
        elif order == 1:
            out = a.copy()
        elif order == 2:
            out = np.ones_like(a)
        else:
            out = np.zeros_like(a)
    elif kind == "logistic":
        if order == 0:
            # log(1 + e^a) without overflow
            out = np.where(a > 0, a + np.log1p(np.exp(-np.abs(a))), np.log1p(np.exp(-np.abs(a))))
        else:
            s = special.expit(a)
            if order == 1:
                out = s
            elif order == 2:
                out = s * (1.0 - s)
            else:
                out = s * (1.0 - s) * (1.0 - 2.0 * s)
    else:
        with np.errstate(over="ignore"):
            out = np.exp(a)
    return out[()] if out.ndim == 0 else out


def _mean(family: GlmFamily, a):
    if family.kind == "logistic":
        return special.expit(a)
    if family.kind == "gaussian":
        return a
    with np.errstate(over="ignore"):
        return np.exp(a)


def draw_noise(family: GlmFamily, rng: np.random.Generator, size=None):
    """Draw the per-round randomness that :func:`demand_from_noise` turns into demand.

    Gaussian demand consumes a standard normal; logistic and Poisson demand
    consume one uniform (Bernoulli threshold and CDF inversion respectively).
    """
    if family.kind == "gaussian":
        return rng.standard_normal(size)
    return rng.random(size)


def demand_from_noise(family: GlmFamily, a, noise):
    """Map natural parameter ``a`` and pre-drawn noise to a demand draw."""
    a = np.asarray(a, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if family.kind == "gaussian":
        out = a + family.noise_scale * noise
    elif family.kind == "logistic":
        out = (noise < special.expit(a)).astype(float)
    else:
        # exact inverse-CDF sampling; P(ppf(U) = k) = pmf(k)
        with np.errstate(over="ignore"):
            mu = np.exp(a)
        out = np.where(mu > 0, stats.poisson.ppf(noise, np.maximum(mu, 1e-300)), 0.0)
        out = np.asarray(out, dtype=float)
    return out[()] if out.ndim == 0 else out


def natural_parameter(z, p, theta) -> np.ndarray:
    """``z'alpha - (z'beta) p`` for rows of ``z``."""
    theta = as_params(theta)
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != theta.d:
        raise ValueError(f"context dimension {z.shape[-1]} does not match parameter dimension {theta.d}")
    return z @ theta.alpha - (z @ theta.beta) * np.asarray(p, dtype=float)


def sample_demand(family: GlmFamily, cov: Covariate, theta, rng: np.random.Generator) -> float:
    """Draw one demand for the covariate under ``theta``."""
    a = natural_parameter(cov.z, cov.p, theta)
    return float(demand_from_noise(family, a, draw_noise(family, rng)))


def revenue_from_scores(family: GlmFamily, a0, b, p):
    """Expected revenue ``p * psi'(a0 - b p)`` given utility ``a0`` and sensitivity ``b``."""
    p = np.asarray(p, dtype=float)
    return p * _mean(family, np.asarray(a0) - np.asarray(b) * p)


def revenue(family: GlmFamily, z, p, theta):
    theta = as_params(theta)
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != theta.d:
        raise ValueError(f"context dimension {z.shape[-1]} does not match parameter dimension {theta.d}")
    return revenue_from_scores(family, z @ theta.alpha, z @ theta.beta, p)


def maximize_on_interval(f, lo, hi, n_grid: int = GRID_POINTS, tol: float = GOLDEN_TOL):
    """Vectorized maximization of ``f`` over ``[lo, hi]``.

    ``f`` maps a price array of shape ``(n, k)`` to values of the same shape.
    A uniform grid is scanned first (ties resolve to the lowest price), then
    golden-section search refines inside the bracket around the best grid
    point.  Returns ``(argmax, max)`` arrays of shape ``(n,)``.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    n = max(lo.size, hi.size)
    lo = np.broadcast_to(lo, (n,))
    hi = np.broadcast_to(hi, (n,))
    step = (hi - lo) / (n_grid - 1)
    grid = lo[:, None] + step[:, None] * np.arange(n_grid)
    vals = f(grid)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    idx = np.argmax(vals, axis=1)
    rows = np.arange(n)
    p_grid = grid[rows, idx]
    v_grid = vals[rows, idx]

    a = np.maximum(p_grid - step, lo)
    b = np.minimum(p_grid + step, hi)
    width = b - a
    with np.errstate(divide="ignore"):
        iters = np.where(width > tol, np.ceil(np.log(width / tol) / -np.log(_INVPHI)), 0)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = f(c[:, None])[:, 0]
    fd = f(d[:, None])[:, 0]
    for k in range(int(iters.max()) if n else 0):
        # rows that already reached tolerance keep their bracket
        left = (fc >= fd) & (k < iters)
        right = ~left & (k < iters)
        b = np.where(left, d, b)
        a = np.where(right, c, a)
        new_c = np.where(left, b - _INVPHI * (b - a), np.where(right, d, c))
        new_d = np.where(left, c, np.where(right, a + _INVPHI * (b - a), d))
        probe = np.where(left, new_c, new_d)
        fp = f(probe[:, None])[:, 0]
        fc, fd = np.where(left, fp, np.where(right, fd, fc)), np.where(left, fc, np.where(right, fp, fd))
        c, d = new_c, new_d
    x = 0.5 * (a + b)
    fx = f(x[:, None])[:, 0]
    better = fx > v_grid
    return np.where(better, x, p_grid), np.where(better, fx, v_grid)


def optimal_prices(family: GlmFamily, a0, b, price_range: PriceRange):
    """Revenue-maximizing prices for arrays of utilities ``a0`` and sensitivities ``b``."""
    a0 = np.atleast_1d(np.asarray(a0, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    a0, b = np.broadcast_arrays(a0, b)
    out = np.empty(a0.shape)
    if family.kind == "gaussian":
        closed = b > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            out[closed] = price_range.clip(a0[closed] / (2.0 * b[closed]))
        rest = ~closed
    else:
        rest = np.ones(a0.shape, dtype=bool)
    if np.any(rest):
        out[rest] = _solve_many(family, a0[rest], b[rest], price_range)
    return out


def _scalar_mean(kind):
    if kind == "logistic":
        def mean(a):
            if a >= 0:
                return 1.0 / (1.0 + math.exp(-a))
            e = math.exp(a)
            return e / (1.0 + e)
        return mean
    if kind == "poisson":
        def mean(a):
            try:
                return math.exp(a)
            except OverflowError:
                return math.inf
        return mean
    return lambda a: a


def maximize_scalar(f_grid, f, lo: float, hi: float):
    """Grid-then-golden maximization of a scalar function on ``[lo, hi]``.

    ``f_grid`` evaluates an array of prices (used for the 201-point scan),
    ``f`` a single float.  Returns ``(argmax, max)``.
    """
    step = (hi - lo) / (GRID_POINTS - 1)
    grid = lo + step * np.arange(GRID_POINTS)
    vals = f_grid(grid)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    i = int(np.argmax(vals))
    p_grid, v_grid = float(grid[i]), float(vals[i])
    a = max(p_grid - step, lo)
    b = min(p_grid + step, hi)
    width = b - a
    iters = int(math.ceil(math.log(width / GOLDEN_TOL) / -math.log(_INVPHI))) if width > GOLDEN_TOL else 0
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    fx = f(x)
    return (x, fx) if fx > v_grid else (p_grid, v_grid)


def _solve_one(family, a0, b, price_range):
    mean = _scalar_mean(family.kind)
    p, _ = maximize_scalar(
        lambda p: revenue_from_scores(family, a0, b, p),
        lambda p: p * mean(a0 - b * p),
        price_range.l,
        price_range.u,
    )
    return p


def _solve_many(family, a0, b, price_range, chunk=4096):
    if a0.size == 1:
        return np.array([_solve_one(family, float(a0[0]), float(b[0]), price_range)])
    out = np.empty(a0.size)
    for s in range(0, a0.size, chunk):
        ra, rb = a0[s:s + chunk, None], b[s:s + chunk, None]
        out[s:s + chunk], _ = maximize_on_interval(
            lambda p: revenue_from_scores(family, ra, rb, p),
            np.full(ra.shape[0], price_range.l),
            np.full(ra.shape[0], price_range.u),
        )
    return out


def optimal_price(family: GlmFamily, z, theta, price_range: PriceRange) -> float:
    """Greedy price ``argmax_{p in [l, u]} p psi'(z'alpha - z'beta p)`` for one context."""
    theta = as_params(theta)
    z = np.asarray(z, dtype=float)
    if z.shape != (theta.d,):
        raise ValueError(f"context dimension {z.shape} does not match parameter dimension {theta.d}")
    return float(optimal_prices(family, z @ theta.alpha, z @ theta.beta, price_range)[0])


def optimal_prices_for_contexts(family: GlmFamily, Z, theta, price_range: PriceRange) -> np.ndarray:
    theta = as_params(theta)
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    return optimal_prices(family, Z @ theta.alpha, Z @ theta.beta, price_range)
