"""Context generators, ground-truth demand and per-run regret accounting."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .glm import (
    GlmFamily,
    ModelParams,
    PriceRange,
    demand_from_noise,
    draw_noise,
    optimal_price,
    optimal_prices,
    revenue,
    revenue_from_scores,
)
from .policies import PRIVATE_KINDS, Feedback, PolicyConfig, PolicySpec, ThetaBall, make_policy
from .policies.base import ConfigurationError

CONTEXT_KINDS = ("s1", "s2", "a1", "a2", "multinomial_lb", "replay")
STREAMS = ("context", "demand", "policy", "privacy")
PHASES = ("explore", "exploit")
MAX_BLOCK = 8192


@dataclass(frozen=True, eq=False)
class ContextDistribution:
    """Where contexts come from.

    ``delta`` and ``v`` only matter for ``multinomial_lb``; ``pool`` is the
    covariate matrix sampled with replacement by ``replay``.
    """

    kind: str
    d: int
    delta: float = 0.5
    v: np.ndarray | None = None
    pool: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in CONTEXT_KINDS:
            raise ValueError(f"unknown context kind {self.kind!r}; expected one of {CONTEXT_KINDS}")
        if self.d < 1:
            raise ValueError("d must be positive")
        if self.kind in ("a1", "a2") and self.d % 2:
            raise ValueError(f"{self.kind} needs an even dimension, got d={self.d}")
        if self.kind == "multinomial_lb":
            v = np.zeros(self.d) if self.v is None else np.asarray(self.v, dtype=float)
            if v.shape != (self.d,) or not np.all(np.isin(v, (0.0, 1.0))):
                raise ValueError("v must be a 0/1 vector of length d")
            object.__setattr__(self, "v", v)
        if self.kind == "replay":
            if self.pool is None or len(self.pool) == 0:
                raise ValueError("replay needs a nonempty pool")
            pool = np.asarray(self.pool, dtype=float)
            if pool.ndim != 2 or pool.shape[1] != self.d:
                raise ValueError(f"pool must have shape (n, {self.d})")
            object.__setattr__(self, "pool", pool)

    @property
    def one_hot(self) -> bool:
        return self.kind in ("s2", "multinomial_lb")

    @property
    def keyed(self) -> bool:
        """Contexts take finitely many values indexed by an integer key."""
        return self.one_hot or self.kind == "replay"

    @property
    def max_norm(self) -> float:
        if self.kind == "s1":
            return 2.0
        if self.one_hot:
            return 1.0
        if self.kind in ("a1", "a2"):
            return math.sqrt((9.0 + 2.25) / 2.0)
        return float(np.max(np.linalg.norm(self.pool, axis=1)))

    def key_context(self, key: int) -> np.ndarray:
        if self.one_hot:
            z = np.zeros(self.d)
            z[key] = 1.0
            return z
        return self.pool[key]

    def draw_many(self, n: int, rng: np.random.Generator, horizon: int | None = None, start: int = 1):
        """Contexts for rounds ``start .. start + n - 1`` as ``(Z, keys)``; keys is None when unkeyed."""
        d = self.d
        if self.kind == "s1":
            return rng.uniform(1.0 / math.sqrt(d), 2.0 / math.sqrt(d), (n, d)), None
        if self.one_hot:
            keys = rng.integers(0, d, n)
            Z = np.zeros((n, d))
            Z[np.arange(n), keys] = 1.0
            return Z, keys
        if self.kind == "replay":
            keys = rng.integers(0, len(self.pool), n)
            return self.pool[keys], keys
        h = d // 2
        star = rng.uniform(0.0, 3.0, (n, h))
        fixed = np.full((n, h), 1.5)
        Z = np.hstack([star, fixed])
        if self.kind == "a1":
            if horizon is None:
                raise ValueError("a1 switches regime at T/2 and needs the horizon")
            t = start + np.arange(n)
            late = t > horizon / 2
            Z[late] = np.hstack([fixed[late], star[late]])
        return Z / math.sqrt(d), None


def draw_context(dist: ContextDistribution, t: int, rng: np.random.Generator, horizon: int | None = None) -> np.ndarray:
    """A single context for round ``t`` (1-based)."""
    if t < 1:
        raise ValueError("rounds are numbered from 1")
    Z, _ = dist.draw_many(1, rng, horizon, start=t)
    return Z[0]


@dataclass(frozen=True, eq=False)
class EnvSpec:
    """A simulated market.

    ``theta_radius`` is the radius of the parameter ball handed to policies
    that need one (default ``sqrt(d)`` around the truth).  With
    ``perturb_center`` the ball's center is drawn per run uniformly from the
    unit ball around the truth.
    """

    context: ContextDistribution
    family: GlmFamily
    truth: ModelParams
    price_range: PriceRange = field(default_factory=lambda: PriceRange(0.0, 3.0))
    horizon: int = 10_000
    mixed_p: float | None = None
    explore_range: PriceRange | None = None
    theta_radius: float | None = None
    perturb_center: bool = False
    scenario: str | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.truth.d != self.context.d:
            raise ValueError("truth dimension does not match the context dimension")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.mixed_p is not None and not (0.0 <= self.mixed_p <= 1.0):
            raise ValueError("mixed_p must lie in [0, 1]")

    @property
    def d(self) -> int:
        return self.context.d

    def with_horizon(self, T: int) -> "EnvSpec":
        return replace(self, horizon=T, _cache={})

    def optimal_price_for_key(self, key: int) -> float:
        cache = self._cache.setdefault("p_star", {})
        if key not in cache:
            cache[key] = optimal_price(self.family, self.context.key_context(key), self.truth, self.price_range)
        return cache[key]

    def key_optimal_prices(self) -> np.ndarray:
        """Optimal price per key for keyed contexts (cached)."""
        if "p_star_keys" not in self._cache:
            if self.context.one_hot:
                Z = np.eye(self.d)
            else:
                Z = self.context.pool
            self._cache["p_star_keys"] = optimal_prices(self.family, Z @ self.truth.alpha, Z @ self.truth.beta,
                                                        self.price_range)
        return self._cache["p_star_keys"]


def s1_truth(d: int) -> ModelParams:
    return ModelParams(1.6 * np.ones(d) / math.sqrt(d), np.ones(d) / math.sqrt(d))


def lower_bound_truth(d: int, delta: float, v) -> ModelParams:
    v = np.asarray(v, dtype=float)
    return ModelParams(2.0 * np.ones(d) + delta * v, np.ones(d) + delta * v)


def make_env(scenario: str, d: int, T: int, family: str | GlmFamily = "logistic", mixed_p: float | None = None,
             truth: ModelParams | None = None, price_range: PriceRange | None = None, delta: float = 0.5,
             v=None, pool=None, explore_range: PriceRange | None = None, noise_scale: float = 1.0) -> EnvSpec:
    """Build one of the named simulation scenarios.

    s1, a1, a2: alpha = 1.6/sqrt(d), beta = 1/sqrt(d).  s2: alpha = beta = 1.
    multinomial_lb: gaussian demand with alpha = 2 + delta v, beta = 1 + delta v.
    replay: pool contexts with a supplied (fitted) truth and a perturbed ball center.
    """
    fam = family if isinstance(family, GlmFamily) else GlmFamily(family, noise_scale)
    price_range = price_range or PriceRange(0.0, 3.0)
    ctx = ContextDistribution(scenario, d, delta=delta, v=v, pool=pool)
    if truth is None:
        if scenario in ("s1", "a1", "a2"):
            truth = s1_truth(d)
        elif scenario == "s2":
            truth = ModelParams(np.ones(d), np.ones(d))
        elif scenario == "multinomial_lb":
            truth = lower_bound_truth(d, delta, ctx.v)
            fam = GlmFamily("gaussian", 1.0)
        else:
            raise ValueError("replay needs a fitted truth")
    return EnvSpec(ctx, fam, truth, price_range, T, mixed_p, explore_range,
                   perturb_center=scenario == "replay", scenario=scenario)


def instant_regret(env: EnvSpec, z, p: float) -> float:
    """``r(p*) - r(p)`` under the truth, with ``p*`` cached per one-hot context."""
    z = np.asarray(z, dtype=float)
    if env.context.one_hot and np.count_nonzero(z) == 1 and z.max() == 1.0:
        p_star = env.optimal_price_for_key(int(np.argmax(z)))
    else:
        p_star = optimal_price(env.family, z, env.truth, env.price_range)
    return float(revenue(env.family, z, p_star, env.truth) - revenue(env.family, z, p, env.truth))


@dataclass
class RegretTrace:
    """Per-round record of one run plus its summary."""

    price: np.ndarray
    y: np.ndarray
    instant_regret: np.ndarray
    phase: np.ndarray  # indices into PHASES
    privacy: np.ndarray  # indices into PRIVACY_TAGS
    keys: np.ndarray | None
    wall_time: float = 0.0
    seed: int | None = None
    events: list = field(default_factory=list)
    error: str | None = None
    policy_state: object = None

    @property
    def horizon(self) -> int:
        return len(self.price)

    def __len__(self):
        return len(self.price)

    @property
    def cum_regret(self) -> np.ndarray:
        return np.cumsum(self.instant_regret)

    @property
    def total_regret(self) -> float:
        return float(np.sum(self.instant_regret))

    def phase_tags(self) -> list[str]:
        return [PHASES[i] for i in self.phase]

    def path(self, stride: int = 100) -> tuple[np.ndarray, np.ndarray]:
        """Cumulative regret at rounds ``stride, 2 stride, ...`` (and the last round)."""
        cum = self.cum_regret
        idx = np.arange(stride, len(cum) + 1, stride)
        if len(cum) and (len(idx) == 0 or idx[-1] != len(cum)):
            idx = np.append(idx, len(cum))
        return idx, cum[idx - 1]


class SimulationError(RuntimeError):
    def __init__(self, message, trace: RegretTrace):
        super().__init__(message)
        self.trace = trace


def streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators for contexts, demand noise, policy and privacy randomness."""
    return {name: np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(i,))))
            for i, name in enumerate(STREAMS)}


def policy_config(env: EnvSpec, spec: PolicySpec, center: np.ndarray | None = None) -> PolicyConfig:
    tuning = spec.tuning
    if tuning.max_context_norm is None:
        tuning = replace(tuning, max_context_norm=env.context.max_norm)
    radius = env.theta_radius or math.sqrt(env.d)
    space = ThetaBall(env.truth.theta if center is None else center, radius)
    return PolicyConfig(
        price_range=env.price_range,
        d=env.d,
        horizon=env.horizon if spec.known_horizon else None,
        family=env.family,
        variant=spec.variant,
        tuning=tuning,
        privacy=spec.privacy,
        theta_space=space,
        explore_range=env.explore_range,
    )


def _scalar_demand(family: GlmFamily, a: float, noise: float) -> float:
    if family.kind == "logistic":
        return 1.0 if noise < (1.0 / (1.0 + math.exp(-a)) if a >= 0 else math.exp(a) / (1.0 + math.exp(a))) else 0.0
    return float(demand_from_noise(family, a, noise))


def simulate_run(env: EnvSpec, spec: PolicySpec, seed: int, batched: bool = True, keep_log: bool = False,
                 keep_policy: bool = False) -> RegretTrace:
    """Run one policy on one environment for ``env.horizon`` rounds.

    All randomness comes from ``seed`` through four substreams, so two
    policies run with the same seed see the same contexts, privacy
    preferences and demand noise.
    """
    if spec.kind == "etc_ldp_mixed" and env.mixed_p is None:
        raise ConfigurationError("etc_ldp_mixed needs an environment with mixed_p")
    if env.context.kind == "a1" and env.horizon is None:
        raise ConfigurationError("a1 needs a horizon")
    started = time.perf_counter()
    T = env.horizon
    rs = streams(seed)
    Z, keys = env.context.draw_many(T, rs["context"], T)
    nonprivate = rs["context"].random(T) < env.mixed_p if env.mixed_p is not None else None
    center = None
    if env.perturb_center:
        dim = 2 * env.d
        v = rs["context"].standard_normal(dim)
        center = env.truth.theta + rs["context"].random() ** (1.0 / dim) * v / np.linalg.norm(v)
    noise = draw_noise(env.family, rs["demand"], T)
    a0 = Z @ env.truth.alpha
    b = Z @ env.truth.beta
    if keys is not None:
        p_star = env.key_optimal_prices()[keys]
    else:
        p_star = optimal_prices(env.family, a0, b, env.price_range)
    r_star = revenue_from_scores(env.family, a0, b, p_star)

    if spec.kind in PRIVATE_KINDS:
        if nonprivate is not None and spec.kind == "etc_ldp_mixed":
            privacy = np.where(nonprivate, 2, 1).astype(np.int8)
        else:
            privacy = np.ones(T, dtype=np.int8)
    else:
        privacy = np.zeros(T, dtype=np.int8)
    tag_names = ("none", "private", "nonprivate")

    extra = {}
    if spec.kind == "clairvoyant":
        extra["truth"] = env.truth
    if keep_log and spec.kind in PRIVATE_KINDS:
        extra["keep_log"] = True
    policy = make_policy(spec.kind, policy_config(env, spec, center), rs["policy"], rs["privacy"], **extra)

    P = np.empty(T)
    Y = np.empty(T)
    phase = np.zeros(T, dtype=np.int8)
    fam = env.family
    t = 0
    error = None
    try:
        while t < T:
            k = min(policy.block_size(), T - t, MAX_BLOCK) if batched else 1
            if k <= 1:
                p = float(policy.choose_price(Z[t]))
                y = _scalar_demand(fam, a0[t] - b[t] * p, noise[t])
                P[t], Y[t] = p, y
                phase[t] = PHASES.index(policy.phase)
                policy.observe(Feedback(Z[t], p, y, tag_names[privacy[t]]))
                t += 1
            else:
                sl = slice(t, t + k)
                Pk = np.asarray(policy.choose_prices(Z[sl]), dtype=float)
                Yk = demand_from_noise(fam, a0[sl] - b[sl] * Pk, noise[sl])
                P[sl], Y[sl] = Pk, Yk
                phase[sl] = PHASES.index(policy.phase)
                policy.observe_block(Z[sl], Pk, Yk, [tag_names[i] for i in privacy[sl]])
                t += k
    except Exception as exc:  # noqa: BLE001 - reported with the partial trace
        error = f"{type(exc).__name__}: {exc}"

    inst = r_star[:t] - revenue_from_scores(fam, a0[:t], b[:t], P[:t])
    trace = RegretTrace(P[:t], Y[:t], inst, phase[:t], privacy[:t], None if keys is None else keys[:t],
                        time.perf_counter() - started, seed, list(policy.events), error,
                        policy if keep_policy else None)
    if error is not None:
        raise SimulationError(f"run aborted at round {t + 1}: {error}", trace)
    return trace
