"""Shared policy interface, configuration and helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any

import numpy as np

from ..estimation import ConvergenceError, Dataset, SingularDesignError, fit_mle
from ..glm import GlmFamily, ModelParams, PriceRange, as_params, optimal_price, optimal_prices_for_contexts
from ..privacy import PrivacyParams

PRIVACY_TAGS = ("none", "private", "nonprivate")


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ThetaBall:
    """Euclidean ball ``{theta : |theta - center| <= radius}``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center.theta if isinstance(self.center, ModelParams) else self.center, dtype=float)
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise ConfigurationError("theta_space radius must be positive")


def project_theta(theta, space: ThetaBall):
    """Euclidean projection onto the ball; returns the same type it was given."""
    as_model = isinstance(theta, ModelParams)
    th = theta.theta if as_model else np.asarray(theta, dtype=float)
    diff = th - space.center
    dist = float(np.linalg.norm(diff))
    if dist > space.radius:
        th = space.center + diff * (space.radius / dist)
    return ModelParams.from_theta(th) if as_model else th


@dataclass(frozen=True)
class Tuning:
    """Optional overrides; ``None`` means the default recipe."""

    tau: int | None = None
    k: int | None = None  # MLE-Cycle experiments per cycle (original variant)
    kappa: float | None = None  # Semi-Myopic deviation scale
    stride: int | None = None  # Semi-Myopic refit stride
    K: int | None = None
    S: int | None = None
    alpha: float | None = None
    c_l: float = 1.0  # multiplier on the SGD strong-convexity constant
    zeta_l: float | None = None
    c_g: float | None = None
    m_hat: float = 1.0  # bound on |y| used by the default truncation level
    sigma: float = 1.0
    doubling_factor: float = math.sqrt(2.0) - 1.0
    score_cap: float | None = None
    ridge: float = 1.0
    max_context_norm: float | None = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None and not v > 0:
                raise ConfigurationError(f"tuning value {f.name} must be positive, got {v!r}")


@dataclass(frozen=True)
class PolicyConfig:
    price_range: PriceRange
    d: int
    horizon: int | None = None
    family: GlmFamily = field(default_factory=GlmFamily)
    variant: str | None = None
    tuning: Tuning = field(default_factory=Tuning)
    privacy: PrivacyParams | None = None
    theta_space: ThetaBall | None = None
    explore_range: PriceRange | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ConfigurationError("d must be positive")
        if self.horizon is not None and self.horizon < 1:
            raise ConfigurationError("horizon must be positive")

    def with_tuning(self, **kw) -> "PolicyConfig":
        return replace(self, tuning=replace(self.tuning, **kw))

    @property
    def exploration_range(self) -> PriceRange:
        return self.explore_range or self.price_range


@dataclass(frozen=True)
class PolicySpec:
    """What to run: a policy kind plus its variant, overrides and privacy level.

    ``known_horizon=False`` hides T from the policy (doubling variants).
    """

    kind: str
    variant: str | None = None
    tuning: Tuning = field(default_factory=Tuning)
    epsilon: float | None = None
    delta: float | None = None
    known_horizon: bool = True

    @property
    def label(self) -> str:
        return self.kind if self.variant is None else f"{self.kind}:{self.variant}"

    @property
    def privacy(self) -> PrivacyParams | None:
        return None if self.epsilon is None else PrivacyParams(self.epsilon, self.delta)


@dataclass(frozen=True, eq=False)
class Feedback:
    z: np.ndarray
    p: float
    y: float
    privacy_tag: str = "none"

    def __post_init__(self):
        if self.privacy_tag not in PRIVACY_TAGS:
            raise ValueError(f"privacy_tag must be one of {PRIVACY_TAGS}")


@dataclass
class PolicyState:
    """Snapshot of a policy's mutable state."""

    kind: str
    phase: str
    round: int
    estimate: ModelParams | None
    design: Any = None
    stash: dict = field(default_factory=dict)


class PricingPolicy:
    """Base class.

    ``choose_price`` prices round ``t + 1`` and ``observe`` records its
    outcome.  Policies whose next ``n`` prices do not depend on outcomes
    in between report ``n`` from :meth:`block_size`; the simulator may then
    price and observe those rounds as arrays.  Random draws are consumed in
    exactly the same order either way.
    """

    kind = "base"

    def __init__(self, config: PolicyConfig, rng: np.random.Generator, privacy_rng: np.random.Generator | None = None):
        self.config = config
        self.family = config.family
        self.range = config.price_range
        self.d = config.d
        self.rng = rng
        self.privacy_rng = privacy_rng if privacy_rng is not None else rng
        self.t = 0
        self.phase = "explore"
        self.estimate: ModelParams | None = None
        self.events: list[tuple[int, str]] = []

    # per-round interface
    def choose_price(self, z) -> float:
        raise NotImplementedError

    def observe(self, fb: Feedback) -> None:
        raise NotImplementedError

    # block interface
    def block_size(self) -> int:
        return 1

    def choose_prices(self, Z) -> np.ndarray:
        raise NotImplementedError

    def observe_block(self, Z, P, Y, tags=None) -> None:
        raise NotImplementedError

    @property
    def state(self) -> PolicyState:
        return PolicyState(self.kind, self.phase, self.t + 1, self.estimate, getattr(self, "design", None), self._stash())

    def _stash(self) -> dict:
        return {}

    # helpers
    def _uniform(self, n=None):
        r = self.config.exploration_range
        return self.rng.uniform(r.l, r.u, n)

    def _greedy(self, z) -> float:
        return optimal_price(self.family, np.asarray(z, dtype=float), self.estimate, self.range)

    def _greedy_many(self, Z) -> np.ndarray:
        return optimal_prices_for_contexts(self.family, Z, self.estimate, self.range)

    def _fit(self, data: Dataset, ridge: float = 0.0, init=None) -> ModelParams | None:
        """MLE that reports failure as ``None`` and logs the event."""
        try:
            return fit_mle(self.family, data, ridge=ridge, init=init)
        except SingularDesignError:
            self.events.append((self.t, "singular"))
        except ConvergenceError:
            self.events.append((self.t, "no-convergence"))
        return None


def log_term(T: float) -> float:
    return math.log(T)


def loglog(T: float) -> float:
    """``ln ln T`` floored at 1 so tiny horizons keep positive widths."""
    return max(math.log(math.log(T)), 1.0) if T > math.e else 1.0


def l_p(price_range: PriceRange) -> float:
    """Lower bound on the smallest eigenvalue of the uniform-price second moment."""
    l, u = price_range.l, price_range.u
    return (u - l) ** 2 / (4.0 * (u * u + l * l + u * l + 3.0))


def require_horizon(config: PolicyConfig, kind: str) -> int:
    if config.horizon is None:
        raise ConfigurationError(f"{kind} needs a known horizon")
    return int(config.horizon)


def as_theta(x) -> np.ndarray:
    return as_params(x).theta
