"""Privacy-preserving ETC: private SGD during exploration, greedy afterwards."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from ..glm import ModelParams, covariate, psi_derivatives
from ..privacy import gaussian_mechanism, l2_ball, truncate_gradient
from .base import ConfigurationError, Feedback, PricingPolicy, ThetaBall, l_p, project_theta

UNBOUNDED = 1 << 40


def ldp_tau(d: int, T: int, epsilon: float) -> int:
    """Default exploration ``ceil(2 d sqrt(T) ln T / eps)``, capped at T."""
    return min(T, math.ceil(2.0 * d * math.sqrt(T) * math.log(T) / epsilon))


def ldp_doubling_tau(d: int, Tq: int, epsilon: float) -> int:
    return min(Tq, math.ceil(d * math.sqrt(2.0 * Tq) * math.log(Tq) / epsilon))


def mixed_tau(d: int, T: int, epsilon: float, p_hat: float) -> int:
    """Exploration length ``ceil(2 sqrt(dT) ln T / sqrt(p + (1-p) eps^2 / d))``."""
    return math.ceil(2.0 * math.sqrt(d * T) * math.log(T) / math.sqrt(p_hat + (1.0 - p_hat) * epsilon ** 2 / d))


def sample_in_ball(space: ThetaBall, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the ball."""
    dim = space.center.size
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    return space.center + space.radius * rng.random() ** (1.0 / dim) * v


def default_c_g(config, tau: int) -> float:
    tuning = config.tuning
    if tuning.c_g is not None:
        return tuning.c_g
    u = config.exploration_range.u
    if config.family.kind == "logistic":
        zmax = tuning.max_context_norm if tuning.max_context_norm is not None else 1.0
        return zmax * math.sqrt(1.0 + u * u)
    return 2.0 * math.sqrt(1.0 + u * u) * (tuning.m_hat + tuning.sigma * math.sqrt(math.log(max(tau, 2))))


class PrivateSGD:
    """Projected SGD on privatized log-likelihood gradients.

    Only the privatized vector and the public step size reach the iterate;
    the raw record is dropped once ``step`` returns.
    """

    def __init__(self, theta0, zeta: float, c_g: float, space: ThetaBall, mechanism: str,
                 epsilon: float, delta: float | None, family, rng, keep_log: bool = False):
        self.theta = np.asarray(theta0, dtype=float).copy()
        self.zeta = zeta
        self.c_g = c_g
        self.space = space
        self.mechanism = mechanism
        self.epsilon = epsilon
        self.delta = delta
        self.family = family
        self.rng = rng
        self.log: list[tuple[float, np.ndarray]] | None = [] if keep_log else None

    def privatize(self, x, y) -> np.ndarray:
        g = (y - float(psi_derivatives(self.family, x @ self.theta, 1))) * x
        g = truncate_gradient(g, self.c_g)
        if self.mechanism == "gaussian":
            return gaussian_mechanism(g, self.c_g, self.epsilon, self.delta, self.rng).w
        return l2_ball(g, self.c_g, self.epsilon, self.rng).w

    def apply(self, w, eta: float) -> None:
        self.theta = project_theta(self.theta + eta * w, self.space)
        if self.log is not None:
            self.log.append((eta, w))

    def step(self, x, y, eta: float) -> None:
        self.apply(self.privatize(x, y), eta)


def replay_sgd(theta0, log, space: ThetaBall) -> np.ndarray:
    """Rebuild the iterate from logged ``(eta, w)`` pairs alone."""
    theta = np.asarray(theta0, dtype=float).copy()
    for eta, w in log:
        theta = project_theta(theta + eta * w, space)
    return theta


class ETCLDP(PricingPolicy):
    """ETC-LDP; ``variant="approx"`` swaps in the Gaussian mechanism.

    With no horizon it runs on doubling episodes ``T_q = 2^q`` and carries
    the estimate across episodes while restarting the step counter.
    """

    kind = "etc_ldp"

    def __init__(self, config, rng, privacy_rng=None, keep_log: bool = False):
        super().__init__(config, rng, privacy_rng)
        if config.privacy is None:
            raise ConfigurationError(f"{self.kind} needs privacy parameters")
        if config.theta_space is None:
            raise ConfigurationError(f"{self.kind} needs a theta_space")
        self.variant = config.variant or "pure"
        if self.variant not in ("pure", "approx"):
            raise ConfigurationError(f"unknown ETC-LDP variant {self.variant!r}")
        if self.variant == "approx" and config.privacy.delta is None:
            raise ConfigurationError("the approx variant needs delta")
        self.epsilon = config.privacy.epsilon
        self.space = config.theta_space
        tuning = config.tuning
        self.zeta = tuning.zeta_l or tuning.c_l * l_p(config.exploration_range) / self.d
        self.keep_log = keep_log
        self.theta0 = sample_in_ball(self.space, self.rng)
        self.doubling = config.horizon is None
        if self.doubling:
            self.episode = 0
            self.window_end = 0
            self._start_episode(self.theta0)
        else:
            T = int(config.horizon)
            self.tau = min(T, tuning.tau or ldp_tau(self.d, T, self.epsilon))
            self.explore_start = 0
            self.explore_end = self.tau
            self.window_end = UNBOUNDED
            self.sgd = self._new_sgd(self.theta0, self.tau)

    def _new_sgd(self, theta0, tau: int) -> PrivateSGD:
        mech = "gaussian" if self.variant == "approx" else "l2ball"
        return PrivateSGD(theta0, self.zeta, default_c_g(self.config, tau), self.space, mech,
                          self.epsilon, self.config.privacy.delta, self.family, self.privacy_rng, self.keep_log)

    def _start_episode(self, theta0) -> None:
        self.episode += 1
        Tq = 2 ** self.episode
        tau = self.config.tuning.tau or ldp_doubling_tau(self.d, Tq, self.epsilon)
        tau = min(tau, Tq)
        self.explore_start = self.t
        self.explore_end = self.t + tau
        self.window_end = self.t + Tq
        self.sgd = self._new_sgd(theta0, tau)

    @property
    def c_g(self) -> float:
        return self.sgd.c_g

    def _exploring(self) -> bool:
        return self.t < self.explore_end

    def block_size(self) -> int:
        if self._exploring():
            return 1
        return max(1, self.window_end - self.t)

    def choose_price(self, z) -> float:
        if self._exploring():
            self.phase = "explore"
            return float(self._uniform())
        self.phase = "exploit"
        return self._greedy(z)

    def choose_prices(self, Z) -> np.ndarray:
        self.phase = "exploit"
        return self._greedy_many(Z)

    def observe(self, fb: Feedback) -> None:
        if self.phase == "explore":
            step = self.t + 1 - self.explore_start
            self.sgd.step(covariate(fb.z, fb.p), fb.y, 1.0 / (self.zeta * step))
        self.t += 1
        self._advance()

    def observe_block(self, Z, P, Y, tags=None) -> None:
        self.t += len(P)
        self._advance()

    def _advance(self) -> None:
        if self.t == self.explore_end:
            self.estimate = ModelParams.from_theta(self.sgd.theta)
        if self.doubling and self.t >= self.window_end:
            self._start_episode(self.sgd.theta)

    def _stash(self) -> dict:
        return {"sgd_theta": self.sgd.theta.copy(), "explore_end": self.explore_end}


class ETCLDPApprox(ETCLDP):
    kind = "etc_ldp_approx"

    def __init__(self, config, rng, privacy_rng=None, keep_log: bool = False):
        if config.variant not in (None, "approx"):
            raise ConfigurationError("etc_ldp_approx has no variants")
        super().__init__(replace(config, variant="approx"), rng, privacy_rng, keep_log)


class ETCLDPMixed(PricingPolicy):
    """Mixed population: private consumers feed private SGD, others are stored raw.

    Stage I runs ``tau_1 = ceil(sqrt(dT))`` rounds, estimates the
    non-private share, sets ``tau_2`` and keeps exploring; the stored raw
    records then get one non-private SGD pass before exploitation.
    """

    kind = "etc_ldp_mixed"

    def __init__(self, config, rng, privacy_rng=None, keep_log: bool = False):
        super().__init__(config, rng, privacy_rng)
        if config.privacy is None:
            raise ConfigurationError("etc_ldp_mixed needs privacy parameters")
        if config.theta_space is None:
            raise ConfigurationError("etc_ldp_mixed needs a theta_space")
        if config.horizon is None:
            raise ConfigurationError("etc_ldp_mixed needs a known horizon")
        self.T = int(config.horizon)
        self.epsilon = config.privacy.epsilon
        self.space = config.theta_space
        tuning = config.tuning
        self.zeta = tuning.zeta_l or tuning.c_l * l_p(config.exploration_range) / self.d
        self.tau1 = min(self.T, math.ceil(math.sqrt(self.d * self.T)))
        self.tau2: int | None = None
        self.p_hat: float | None = None
        self.explore_end = self.tau1
        theta0 = sample_in_ball(self.space, self.rng)
        self.sgd = PrivateSGD(theta0, self.zeta, default_c_g(config, self.tau1), self.space, "l2ball",
                              self.epsilon, None, self.family, self.privacy_rng, keep_log)
        self.raw_X: list[np.ndarray] = []
        self.raw_y: list[float] = []

    def block_size(self) -> int:
        return 1 if self.t < self.explore_end else UNBOUNDED

    def choose_price(self, z) -> float:
        if self.t < self.explore_end:
            self.phase = "explore"
            return float(self._uniform())
        self.phase = "exploit"
        return self._greedy(z)

    def choose_prices(self, Z) -> np.ndarray:
        self.phase = "exploit"
        return self._greedy_many(Z)

    def observe(self, fb: Feedback) -> None:
        if self.phase == "explore":
            x = covariate(fb.z, fb.p)
            if fb.privacy_tag == "nonprivate":
                self.raw_X.append(x)
                self.raw_y.append(fb.y)
            else:
                n_private = self.t + 1 - len(self.raw_X)
                self.sgd.step(x, fb.y, 1.0 / (self.zeta * n_private))
        self.t += 1
        if self.t == self.tau1 and self.tau2 is None:
            self.p_hat = len(self.raw_X) / self.tau1
            self.tau2 = min(self.T, max(self.tau1, mixed_tau(self.d, self.T, self.epsilon, self.p_hat)))
            self.explore_end = self.tau2
        if self.tau2 is not None and self.t == self.tau2:
            self._finish()

    def observe_block(self, Z, P, Y, tags=None) -> None:
        self.t += len(P)

    def _finish(self) -> None:
        theta = self.sgd.theta
        n_private = self.tau2 - len(self.raw_X)
        offset = n_private * self.epsilon ** 2 / self.d
        for k, (x, y) in enumerate(zip(self.raw_X, self.raw_y), start=1):
            g = (y - float(psi_derivatives(self.family, x @ theta, 1))) * x
            theta = project_theta(theta + g / (self.zeta * (offset + k)), self.space)
        self.estimate = ModelParams.from_theta(theta)

    def _stash(self) -> dict:
        return {"tau1": self.tau1, "tau2": self.tau2, "p_hat": self.p_hat, "nonprivate": len(self.raw_X)}
