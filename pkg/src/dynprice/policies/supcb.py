"""Staged confidence-bound pricing over a discretized price grid (supCB + CB-GLM)."""

from __future__ import annotations

import math

import numpy as np

from ..estimation import DataBuffer, DesignMatrix
from ..glm import covariate, psi_derivatives
from .base import ConfigurationError, Feedback, PricingPolicy, loglog, require_horizon


def supcb_parameters(d: int, T: int) -> tuple[int, int, int]:
    """Default ``(K, S, tau)``; K is kept at 2 or more so the grid spans the range."""
    K = max(2, math.ceil(math.sqrt(T / d) / math.log(T)))
    S = max(1, int(math.floor(math.log2(T))))
    tau = math.ceil(math.sqrt(d * T))
    return K, S, tau


def default_alpha(T: int, K: int, S: int) -> float:
    return loglog(T) * math.sqrt(math.log(3.0 * T ** 1.5 * K * S))


class _Stage:
    """Data and cached fit for one stage: its exploration block plus the rounds it selected."""

    def __init__(self, dim: int, ridge: float):
        self.data = DataBuffer(dim)
        self.design = DesignMatrix(dim, ridge)
        self.ridge = ridge
        self.fitted_on = -1
        self.theta = None
        self.ok = False

    def add(self, x, y):
        self.data.append(x, y)
        self.design.update(x)

    def add_many(self, X, Y):
        self.data.extend(X, Y)
        self.design.update_many(X)


class SupCB(PricingPolicy):
    kind = "supcb"

    def __init__(self, config, rng, privacy_rng=None):
        super().__init__(config, rng, privacy_rng)
        self.mode = config.variant or "stochastic"
        if self.mode not in ("stochastic", "adversarial"):
            raise ConfigurationError(f"unknown supCB mode {self.mode!r}")
        T = require_horizon(config, "supCB")
        self.T = T
        K, S, tau = supcb_parameters(self.d, T)
        tuning = config.tuning
        self.K = tuning.K or K
        self.S = tuning.S or S
        if self.K < 2:
            raise ConfigurationError("supCB needs at least two price points")
        self.tau = 0 if self.mode == "adversarial" else (tuning.tau or tau)
        self.alpha = tuning.alpha or default_alpha(T, self.K, self.S)
        ridge = tuning.ridge if self.mode == "adversarial" else 0.0
        self.grid = np.linspace(self.range.l, self.range.u, self.K)
        self.stages = [None] + [_Stage(2 * self.d, ridge) for _ in range(self.S)]
        # label of each round: -s for exploration block s, s >= 0 for the set Psi_s
        self.labels: list[int] = []
        # (round, stage, arms before, arms kept, empirical-best arm) when record_eliminations is set
        self.eliminations: list[tuple[int, int, np.ndarray, np.ndarray, int]] = []
        self.record_eliminations = False
        self._pending: int | None = None
        self.last_stage_count = 0

    @property
    def explore_rounds(self) -> int:
        return self.S * self.tau

    def block_size(self) -> int:
        if self.t < self.explore_rounds:
            return self.tau - self.t % self.tau
        return 1

    def _grid_price(self, n=None):
        return self.grid[self.rng.integers(0, self.K, n)]

    def choose_prices(self, Z) -> np.ndarray:
        # only reachable inside an exploration block
        self.phase = "explore"
        self._pending = -(self.t // self.tau + 1)
        return self._grid_price(len(Z))

    def observe_block(self, Z, P, Y, tags=None) -> None:
        s = -self._pending
        self.stages[s].add_many(covariate(np.asarray(Z), np.asarray(P)), Y)
        self.labels.extend([self._pending] * len(P))
        self.t += len(P)

    def _stage_fit(self, s: int):
        st = self.stages[s]
        n = len(st.data)
        if st.fitted_on != n:
            st.fitted_on = n
            if n == 0 and st.ridge > 0:
                st.theta, st.ok = np.zeros(2 * self.d), True
            else:
                est = self._fit(st.data.view(), ridge=st.ridge, init=st.theta)
                st.ok = est is not None and st.design.v_inv is not None
                if est is not None:
                    st.theta = est.theta
        return st.ok

    def cb_glm(self, z, arms: np.ndarray, s: int):
        """Estimated revenues ``r_a`` and widths ``w_a`` for the arms at stage ``s``."""
        st = self.stages[s]
        d = self.d
        p = self.grid[arms]
        alpha, beta = st.theta[:d], st.theta[d:]
        a = z @ alpha - (z @ beta) * p
        r = p * psi_derivatives(self.family, a, 1)
        vi = st.design.v_inv
        qa = z @ vi[:d, :d] @ z
        qb = z @ vi[:d, d:] @ z
        qc = z @ vi[d:, d:] @ z
        q = np.maximum(qa - 2.0 * p * qb + p * p * qc, 0.0)
        return r, self.alpha * np.sqrt(q)

    def choose_price(self, z) -> float:
        z = np.asarray(z, dtype=float)
        if self.t < self.explore_rounds:
            self.phase = "explore"
            self._pending = -(self.t // self.tau + 1)
            return float(self._grid_price())
        self.phase = "exploit"
        arms = np.arange(self.K)
        thresh = 1.0 / math.sqrt(self.T)
        s = 1
        while True:
            if not self._stage_fit(s):
                self._pending = s
                self.phase = "explore"
                self.last_stage_count = s
                return float(self._grid_price())
            r, w = self.cb_glm(z, arms, s)
            level = 2.0 ** (-s)
            if np.any(w > level):
                self._pending = s
                self.last_stage_count = s
                return float(self.grid[arms[int(np.argmax(w))]])
            if np.all(w <= thresh) or s == self.S:
                # at s == S every width is <= 2^-S < 1/sqrt(T), so this is step III
                self._pending = 0
                self.last_stage_count = s
                return float(self.grid[arms[int(np.argmax(r))]])
            keep = r >= r.max() - 2.0 * level
            if self.record_eliminations:
                self.eliminations.append((self.t + 1, s, arms.copy(), arms[keep].copy(), int(arms[np.argmax(r)])))
            arms = arms[keep]
            s += 1

    def observe(self, fb: Feedback) -> None:
        x = covariate(fb.z, fb.p)
        label = self._pending
        if label < 0:
            self.stages[-label].add(x, fb.y)
        elif label > 0:
            self.stages[label].add(x, fb.y)
        self.labels.append(label)
        self.t += 1

    def _stash(self) -> dict:
        return {"K": self.K, "S": self.S, "tau": self.tau, "alpha": self.alpha,
                "stage_sizes": [len(st.data) for st in self.stages[1:]]}
