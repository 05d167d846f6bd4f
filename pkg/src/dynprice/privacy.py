"""Local differential privacy primitives: truncation, L2-ball and Gaussian mechanisms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float | None = None

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be a positive finite number")
        if self.delta is not None and not (0 < self.delta <= 1):
            raise ValueError("delta must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class PrivatizedVector:
    w: np.ndarray
    mechanism: str


def truncate_gradient(g, c_g: float) -> np.ndarray:
    """Project ``g`` onto the Euclidean ball of radius ``c_g``."""
    if not c_g > 0:
        raise ValueError("c_g must be positive")
    g = np.asarray(g, dtype=float)
    norm = np.linalg.norm(g)
    if norm <= c_g:
        return g.copy()
    return g * (c_g / norm)


def r_eps_d(epsilon: float, dim: float) -> float:
    """Radius factor ``sqrt(pi) (e^eps+1)/(e^eps-1) * d Gamma(d+1/2) / Gamma(d+1)``.

    With ``dim = d`` this is the factor that makes the L2-ball mechanism
    unbiased for vectors in R^{2d}; see :func:`sphere_radius`.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not dim > 0:
        raise ValueError("dim must be positive")
    ratio = 1.0 / math.tanh(epsilon / 2.0)  # (e^eps + 1) / (e^eps - 1)
    return math.sqrt(math.pi) * ratio * dim * math.exp(math.lgamma(dim + 0.5) - math.lgamma(dim + 1.0))


def sphere_radius(c_g: float, epsilon: float, length: int) -> float:
    """Output norm of the L2-ball mechanism for a vector of the given length.

    A gradient of length 2d is privatized with radius ``c_g * r_eps_d(eps, d)``.
    Odd lengths use the same Gamma-ratio formula at ``length / 2``.
    """
    return c_g * r_eps_d(epsilon, length / 2.0)


def _upper_probability(epsilon: float) -> float:
    return 1.0 / (1.0 + math.exp(-epsilon))


def l2_ball_from_noise(g, c_g: float, epsilon: float, u_flip: float, u_side: float, direction) -> np.ndarray:
    """Deterministic core of the L2-ball mechanism for one vector.

    ``u_flip`` and ``u_side`` are uniforms on [0, 1) and ``direction`` a
    standard-normal vector of the same length as ``g``.
    """
    g = np.asarray(g, dtype=float)
    norm = float(np.linalg.norm(g))
    if norm > c_g * (1 + 1e-12):
        raise ValueError(f"|g| = {norm:.6g} exceeds c_g = {c_g:.6g}; truncate first")
    b = u_flip < 0.5 + norm / (2.0 * c_g)
    x_tilde = g if b else -g
    w = np.asarray(direction, dtype=float)
    w = w / np.linalg.norm(w)
    if norm > 0:
        upper = u_side < _upper_probability(epsilon)
        s = float(w @ x_tilde)
        # s == 0 belongs to the closed lower hemisphere
        if (upper and s <= 0) or (not upper and s > 0):
            w = -w
    return sphere_radius(c_g, epsilon, g.size) * w


def l2_ball_rows_from_noise(G, c_g: float, epsilon: float, u_flip, u_side, directions) -> np.ndarray:
    """Row-wise :func:`l2_ball_from_noise` (one ``u_flip``/``u_side`` per row)."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    norm = np.linalg.norm(G, axis=1)
    if np.any(norm > c_g * (1 + 1e-12)):
        raise ValueError(f"|g| = {norm.max():.6g} exceeds c_g = {c_g:.6g}; truncate first")
    b = np.asarray(u_flip) < 0.5 + norm / (2.0 * c_g)
    x_tilde = np.where(b[:, None], G, -G)
    W = np.asarray(directions, dtype=float)
    W = W / np.linalg.norm(W, axis=1, keepdims=True)
    upper = np.asarray(u_side) < _upper_probability(epsilon)
    s = np.einsum("ij,ij->i", W, x_tilde)
    flip = (norm > 0) & ((upper & (s <= 0)) | (~upper & (s > 0)))
    return sphere_radius(c_g, epsilon, G.shape[1]) * np.where(flip[:, None], -W, W)


def l2_ball(g, c_g: float, epsilon: float, rng: np.random.Generator) -> PrivatizedVector:
    """Privatize a truncated vector with the epsilon-LDP L2-ball mechanism."""
    g = np.asarray(g, dtype=float)
    u = rng.random(2)
    direction = rng.standard_normal(g.size)
    return PrivatizedVector(l2_ball_from_noise(g, c_g, epsilon, u[0], u[1], direction), "l2ball")


def l2_ball_many(G, c_g: float, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Privatize each row of ``G``; the draws differ from repeated :func:`l2_ball` calls."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    n = G.shape[0]
    u = rng.random((n, 2))
    return l2_ball_rows_from_noise(G, c_g, epsilon, u[:, 0], u[:, 1], rng.standard_normal(G.shape))


def gaussian_noise_variance(c_g: float, epsilon: float, delta: float) -> float:
    if not (0 < delta <= 1):
        raise ValueError("delta must lie in (0, 1]")
    if not (epsilon > 0 and c_g > 0):
        raise ValueError("epsilon and c_g must be positive")
    return 2.0 * c_g ** 2 * math.log(1.25 / delta) / epsilon ** 2


def gaussian_mechanism(g, c_g: float, epsilon: float, delta: float, rng: np.random.Generator) -> PrivatizedVector:
    """``g + xi`` with i.i.d. N(0, 2 c_g^2 ln(1.25/delta) / eps^2) coordinates."""
    sigma = math.sqrt(gaussian_noise_variance(c_g, epsilon, delta))
    g = np.asarray(g, dtype=float)
    if np.linalg.norm(g) > c_g * (1 + 1e-12):
        raise ValueError("gradient norm exceeds c_g; truncate first")
    return PrivatizedVector(g + sigma * rng.standard_normal(g.size), "gaussian")
