"""Optimistic pricing for adversarial contexts: ridge MLE plus a Mahalanobis bonus."""

from __future__ import annotations

import math

import numpy as np

from ..estimation import DataBuffer, DesignMatrix
from ..glm import _scalar_mean, covariate, maximize_scalar, psi_derivatives
from .base import Feedback, PricingPolicy, loglog, project_theta


def default_ucb_alpha(d: int, T: float) -> float:
    return math.sqrt(d * math.log(T)) * loglog(T) / 10.0


class UCB(PricingPolicy):
    """Each round: ridge MLE, then maximize ``p psi'(x(p)'theta + alpha |x(p)|_{V^-1})``.

    Without a known horizon the bonus scale uses ``T = max(t, 3)``.
    """

    kind = "ucb"

    def __init__(self, config, rng, privacy_rng=None):
        super().__init__(config, rng, privacy_rng)
        tuning = config.tuning
        self.ridge = tuning.ridge
        self.score_cap = tuning.score_cap
        self.data = DataBuffer(2 * self.d)
        self.design = DesignMatrix(2 * self.d, self.ridge)
        self._theta = np.zeros(2 * self.d)
        self._fitted_on = 0
        self._mean = _scalar_mean(self.family.kind)
        self.phase = "exploit"

    def alpha_at(self, t: int) -> float:
        if self.config.tuning.alpha is not None:
            return self.config.tuning.alpha
        T = self.config.horizon if self.config.horizon is not None else max(t, 3)
        return default_ucb_alpha(self.d, max(T, 3))

    def current_estimate(self) -> np.ndarray:
        n = len(self.data)
        if n != self._fitted_on:
            est = self._fit(self.data.view(), ridge=self.ridge, init=self._theta)
            if est is not None:
                self._theta = est.theta
                self.estimate = est
            self._fitted_on = n
        theta = self._theta
        if self.config.theta_space is not None:
            theta = project_theta(theta, self.config.theta_space)
        return theta

    def ucb_scores(self, z, theta, alpha):
        """Coefficients of the optimistic score ``a0 - b p + alpha sqrt(qa - 2 qb p + qc p^2)``."""
        d = self.d
        vi = self.design.v_inv
        return (float(z @ theta[:d]), float(z @ theta[d:]), alpha,
                float(z @ vi[:d, :d] @ z), float(z @ vi[:d, d:] @ z), float(z @ vi[d:, d:] @ z))

    def choose_price(self, z) -> float:
        z = np.asarray(z, dtype=float)
        theta = self.current_estimate()
        a0, b, alpha, qa, qb, qc = self.ucb_scores(z, theta, self.alpha_at(self.t + 1))
        cap = self.score_cap if self.score_cap is not None else math.inf
        mean = self._mean

        def score_vec(p):
            q = np.maximum(qa - 2.0 * qb * p + qc * p * p, 0.0)
            return p * psi_derivatives(self.family, np.minimum(a0 - b * p + alpha * np.sqrt(q), cap), 1)

        def score(p):
            q = max(qa - 2.0 * qb * p + qc * p * p, 0.0)
            return p * mean(min(a0 - b * p + alpha * math.sqrt(q), cap))

        p, _ = maximize_scalar(score_vec, score, self.range.l, self.range.u)
        return float(p)

    def observe(self, fb: Feedback) -> None:
        x = covariate(fb.z, fb.p)
        self.data.append(x, fb.y)
        self.design.update(x)
        self.t += 1

    @property
    def theta_hat(self) -> np.ndarray:
        return self._theta

    def _stash(self) -> dict:
        return {"observations": len(self.data)}
