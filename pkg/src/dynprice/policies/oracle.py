"""Reference policies that need no learning."""

from __future__ import annotations

import numpy as np

from ..glm import ModelParams, optimal_price, optimal_prices_for_contexts
from .base import ConfigurationError, Feedback, PricingPolicy

UNBOUNDED = 1 << 40


class Clairvoyant(PricingPolicy):
    """Plays the optimal price under the true parameter."""

    kind = "clairvoyant"

    def __init__(self, config, rng, privacy_rng=None, truth: ModelParams | None = None):
        super().__init__(config, rng, privacy_rng)
        if truth is None:
            raise ConfigurationError("the clairvoyant policy needs the true parameter")
        self.estimate = truth
        self.phase = "exploit"

    def block_size(self) -> int:
        return UNBOUNDED

    def choose_price(self, z) -> float:
        return optimal_price(self.family, np.asarray(z, dtype=float), self.estimate, self.range)

    def choose_prices(self, Z) -> np.ndarray:
        return optimal_prices_for_contexts(self.family, Z, self.estimate, self.range)

    def observe(self, fb: Feedback) -> None:
        self.t += 1

    def observe_block(self, Z, P, Y, tags=None) -> None:
        self.t += len(P)


class FixedPrice(PricingPolicy):
    """Always the same price (defaults to the lower end of the range)."""

    kind = "fixed_price"

    def __init__(self, config, rng, privacy_rng=None, price: float | None = None):
        super().__init__(config, rng, privacy_rng)
        self.price = float(self.range.l if price is None else price)
        self.phase = "exploit"

    def block_size(self) -> int:
        return UNBOUNDED

    def choose_price(self, z) -> float:
        return self.price

    def choose_prices(self, Z) -> np.ndarray:
        return np.full(len(Z), self.price)

    def observe(self, fb: Feedback) -> None:
        self.t += 1

    def observe_block(self, Z, P, Y, tags=None) -> None:
        self.t += len(P)
