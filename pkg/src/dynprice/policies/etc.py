"""Explore-then-commit family: ETC, ETC-Doubling, MLE-Cycle and Semi-Myopic."""

from __future__ import annotations

import math

import numpy as np

from ..estimation import DataBuffer
from ..glm import covariate
from .base import ConfigurationError, Feedback, PricingPolicy, require_horizon

UNBOUNDED = 1 << 40


def etc_tau(d: int, T: int) -> int:
    """Default exploration length ``ceil(sqrt(d T ln T))``."""
    return math.ceil(math.sqrt(d * T * math.log(T))) if T > 1 else 1


def doubling_tau(d: int, E: int, factor: float = math.sqrt(2.0) - 1.0) -> int:
    """Per-episode exploration ``min(E, ceil(factor * sqrt(d E ln E)))``."""
    return min(E, math.ceil(factor * math.sqrt(d * E * math.log(E))))


def modified_cycle_k(d: int, c: int) -> int:
    return math.ceil(math.sqrt(d * math.log(2 * c)))


class _Explorer(PricingPolicy):
    """Alternates uniform-price exploration windows and greedy windows.

    Subclasses set ``self.explore_end`` (absolute round count where the
    current exploration window ends) and ``self.window_end`` (where the
    current greedy window ends) and react in :meth:`_after_explore`.
    """

    def __init__(self, config, rng, privacy_rng=None):
        super().__init__(config, rng, privacy_rng)
        self.data = DataBuffer(2 * self.d)
        self.explore_end = 0
        self.window_end = UNBOUNDED

    def _exploring(self) -> bool:
        return self.t < self.explore_end or self.estimate is None

    def block_size(self) -> int:
        if self.t < self.explore_end:
            return self.explore_end - self.t
        return max(1, self.window_end - self.t)

    def choose_price(self, z) -> float:
        if self._exploring():
            self.phase = "explore"
            return float(self._uniform())
        self.phase = "exploit"
        return self._greedy(z)

    def choose_prices(self, Z) -> np.ndarray:
        if self._exploring():
            self.phase = "explore"
            return self._uniform(len(Z))
        self.phase = "exploit"
        return self._greedy_many(Z)

    def observe(self, fb: Feedback) -> None:
        exploring = self.phase == "explore"
        if exploring:
            self.data.append(covariate(fb.z, fb.p), fb.y)
        self.t += 1
        self._advance(exploring)

    def observe_block(self, Z, P, Y, tags=None) -> None:
        exploring = self.phase == "explore"
        if exploring:
            self.data.extend(covariate(np.asarray(Z), np.asarray(P)), Y)
        self.t += len(P)
        self._advance(exploring)

    def _advance(self, exploring: bool) -> None:
        if exploring and self.t == self.explore_end:
            self._after_explore()
        elif self.t >= self.window_end:
            self._after_window()

    def _after_explore(self) -> None:
        raise NotImplementedError

    def _after_window(self) -> None:
        pass

    def _refit_or_extend(self, limit: int = UNBOUNDED) -> None:
        est = self._fit(self.data.view(), init=self.estimate)
        if est is None:
            # keep exploring for 2d more rounds, then retry
            self.explore_end = min(self.t + 2 * self.d, limit)
            self.events.append((self.t, "extend-exploration"))
        else:
            self.estimate = est

    def _stash(self) -> dict:
        return {"experiments": len(self.data), "explore_end": self.explore_end}


class ETC(_Explorer):
    kind = "etc"

    def __init__(self, config, rng, privacy_rng=None):
        super().__init__(config, rng, privacy_rng)
        T = require_horizon(config, "ETC")
        self.tau = config.tuning.tau or etc_tau(self.d, T)
        self.explore_end = self.tau

    def _after_explore(self) -> None:
        self._refit_or_extend()


class ETCDoubling(_Explorer):
    """ETC restarted on episodes of length 2, 4, 8, ...; experiments accumulate."""

    kind = "etc_doubling"

    def __init__(self, config, rng, privacy_rng=None):
        super().__init__(config, rng, privacy_rng)
        self.episode = 0
        self._start_episode()

    def _start_episode(self) -> None:
        self.episode += 1
        E = 2 ** self.episode
        self.window_end = self.t + E
        self.explore_end = self.t + doubling_tau(self.d, E, self.config.tuning.doubling_factor)
        self.estimate_valid = False

    def _exploring(self) -> bool:
        return self.t < self.explore_end or self.estimate is None

    def _advance(self, exploring: bool) -> None:
        if exploring and self.t == self.explore_end:
            self._refit_or_extend(limit=self.window_end)
        if self.t >= self.window_end:
            self._start_episode()

    def _stash(self) -> dict:
        return {**super()._stash(), "episode": self.episode}


class MLECycle(_Explorer):
    """Cycle ``c``: ``k_c`` uniform experiments, refit, ``c`` greedy rounds.

    If the refit fails, that cycle's greedy rounds are played as uniform
    experiments instead (and recorded).
    """

    kind = "mle_cycle"

    def __init__(self, config, rng, privacy_rng=None):
        super().__init__(config, rng, privacy_rng)
        self.variant = config.variant or "original"
        if self.variant not in ("original", "modified"):
            raise ConfigurationError(f"unknown MLE-Cycle variant {self.variant!r}")
        self.cycle = 0
        self.experiments_per_cycle: list[int] = []
        self._start_cycle()

    def cycle_k(self, c: int) -> int:
        if self.variant == "modified":
            return modified_cycle_k(self.d, c)
        return self.config.tuning.k or 2

    def _start_cycle(self) -> None:
        self.cycle += 1
        k = self.cycle_k(self.cycle)
        self.experiments_per_cycle.append(k)
        self.explore_end = self.t + k
        self.window_end = self.explore_end + self.cycle
        self.fit_ok = False

    def _exploring(self) -> bool:
        return self.t < self.explore_end or not self.fit_ok

    def block_size(self) -> int:
        return (self.explore_end if self.t < self.explore_end else self.window_end) - self.t

    def _advance(self, exploring: bool) -> None:
        if self.t == self.explore_end:
            est = self._fit(self.data.view(), init=self.estimate)
            self.fit_ok = est is not None
            if est is not None:
                self.estimate = est
        if self.t >= self.window_end:
            self._start_cycle()

    def _stash(self) -> dict:
        return {**super()._stash(), "cycle": self.cycle}


class SemiMyopic(PricingPolicy):
    """Greedy price plus a Rademacher deviation ``kappa t^{-1/4}``, clipped to the range."""

    kind = "semi_myopic"

    def __init__(self, config, rng, privacy_rng=None):
        super().__init__(config, rng, privacy_rng)
        self.variant = config.variant or "original"
        if self.variant not in ("original", "modified"):
            raise ConfigurationError(f"unknown Semi-Myopic variant {self.variant!r}")
        tuning = config.tuning
        if tuning.kappa is not None:
            self.kappa = tuning.kappa
        else:
            self.kappa = 1.0 if self.variant == "original" else self.d ** 0.25
        self.stride = tuning.stride or 5
        self.data = DataBuffer(2 * self.d)

    def deviation(self, t, sign):
        return self.kappa * np.power(t, -0.25) * sign

    def block_size(self) -> int:
        return self.stride - self.t % self.stride

    def choose_price(self, z) -> float:
        if self.estimate is None:
            self.phase = "explore"
            return float(self._uniform())
        self.phase = "exploit"
        sign = 1.0 if self.rng.random() < 0.5 else -1.0
        return float(self.range.clip(self._greedy(z) + self.deviation(self.t + 1, sign)))

    def choose_prices(self, Z) -> np.ndarray:
        n = len(Z)
        if self.estimate is None:
            self.phase = "explore"
            return self._uniform(n)
        self.phase = "exploit"
        sign = np.where(self.rng.random(n) < 0.5, 1.0, -1.0)
        t = self.t + 1 + np.arange(n)
        return self.range.clip(self._greedy_many(Z) + self.deviation(t, sign))

    def observe(self, fb: Feedback) -> None:
        self.data.append(covariate(fb.z, fb.p), fb.y)
        self.t += 1
        self._maybe_refit()

    def observe_block(self, Z, P, Y, tags=None) -> None:
        self.data.extend(covariate(np.asarray(Z), np.asarray(P)), Y)
        self.t += len(P)
        self._maybe_refit()

    def _maybe_refit(self) -> None:
        if self.t % self.stride == 0:
            est = self._fit(self.data.view(), init=self.estimate)
            if est is not None:
                self.estimate = est

    def _stash(self) -> dict:
        return {"observations": len(self.data), "kappa": self.kappa, "stride": self.stride}
