import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dynprice.privacy import (
    PrivacyParams,
    gaussian_mechanism,
    gaussian_noise_variance,
    l2_ball,
    l2_ball_from_noise,
    l2_ball_many,
    l2_ball_rows_from_noise,
    r_eps_d,
    sphere_radius,
    truncate_gradient,
)


def random_configs(n, seed=99):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        dim = 2 * int(rng.integers(1, 6))
        c_g = float(rng.uniform(0.5, 3.0))
        eps = float(rng.uniform(0.5, 4.0))
        g = rng.normal(size=dim)
        g *= rng.uniform(0.0, 1.0) * c_g / np.linalg.norm(g)
        yield g, c_g, eps


class TestTruncation:
    def test_examples(self):
        assert np.array_equal(truncate_gradient([1.0, 1.0], 10.0), [1.0, 1.0])
        assert np.allclose(truncate_gradient([3.0, 4.0], 2.5), [1.5, 2.0])
        assert np.array_equal(truncate_gradient([0.0, 0.0], 1.0), [0.0, 0.0])

    @settings(max_examples=100, deadline=None)
    @given(arrays(float, 5, elements=st.floats(-1e6, 1e6)), st.floats(1e-3, 1e3))
    def test_idempotent_and_bounded(self, g, c):
        once = truncate_gradient(g, c)
        assert np.linalg.norm(once) <= c * (1 + 1e-12)
        assert np.allclose(truncate_gradient(once, c), once, rtol=1e-12, atol=0)


class TestRadius:
    def test_reference_values(self):
        assert r_eps_d(1.0, 1) == pytest.approx(3.3991, abs=1e-3)
        assert r_eps_d(1.0, 1) == pytest.approx(math.pi / 2 * (math.e + 1) / (math.e - 1), rel=1e-12)
        assert r_eps_d(1.0, 2) == pytest.approx(5.0988, abs=1e-3)

    def test_decreasing_in_epsilon(self):
        vals = [r_eps_d(e, 3) for e in (0.1, 0.5, 1.0, 2.0, 8.0)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_large_dimension_finite(self):
        r = r_eps_d(1.0, 5000)
        # d Gamma(d+1/2)/Gamma(d+1) ~ sqrt(d)
        assert math.isfinite(r) and r == pytest.approx(math.sqrt(math.pi) * 2.16395 * math.sqrt(5000), rel=1e-3)


class TestL2Ball:
    def test_norm_invariant_every_draw(self, rng):
        for g, c_g, eps in random_configs(20):
            target = sphere_radius(c_g, eps, g.size)
            assert target == pytest.approx(c_g * r_eps_d(eps, g.size // 2))
            for _ in range(20):
                w = l2_ball(g, c_g, eps, rng).w
                assert abs(np.linalg.norm(w) - target) <= 1e-9 * target
            W = l2_ball_many(np.tile(g, (500, 1)), c_g, eps, rng)
            assert np.max(np.abs(np.linalg.norm(W, axis=1) - target)) <= 1e-9 * target

    def test_rejects_untruncated(self, rng):
        with pytest.raises(ValueError):
            l2_ball([3.0, 4.0], 1.0, 1.0, rng)

    def test_rows_agree_with_single(self, rng):
        G = rng.normal(size=(50, 4)) * 0.2
        u = rng.random((50, 2))
        D = rng.normal(size=(50, 4))
        rows = l2_ball_rows_from_noise(G, 1.0, 1.3, u[:, 0], u[:, 1], D)
        single = np.array([l2_ball_from_noise(G[i], 1.0, 1.3, u[i, 0], u[i, 1], D[i]) for i in range(50)])
        assert np.allclose(rows, single, rtol=1e-13, atol=1e-13)

    def test_zero_input_is_centered(self):
        rng = np.random.default_rng(3)
        W = l2_ball_many(np.zeros((100_000, 4)), 1.0, 1.0, rng)
        se = W.std(axis=0, ddof=1) / math.sqrt(len(W))
        assert np.all(np.abs(W.mean(axis=0)) < 4 * se)

    def test_unbiased_single_example(self):
        rng = np.random.default_rng(4)
        W = l2_ball_many(np.tile([0.6, 0.0], (200_000, 1)), 1.0, 1.0, rng)
        se = W.std(axis=0, ddof=1) / math.sqrt(len(W))
        assert np.all(np.abs(W.mean(axis=0) - [0.6, 0.0]) < 4 * se)

    def test_hemisphere_frequency_given_flip(self):
        rng = np.random.default_rng(5)
        n = 200_000
        g = np.array([0.3, -0.4, 0.1, 0.2])
        for eps in (0.5, 1.0, 3.0):
            u_flip, u_side = rng.random(n), rng.random(n)
            W = l2_ball_rows_from_noise(np.tile(g, (n, 1)), 1.0, eps, u_flip, u_side, rng.normal(size=(n, 4)))
            kept = u_flip < 0.5 + np.linalg.norm(g) / 2.0
            frac = np.mean(W[kept] @ g > 0)
            p = math.exp(eps) / (1 + math.exp(eps))
            assert abs(frac - p) < 4 * math.sqrt(p * (1 - p) / kept.sum())


class TestGaussianMechanism:
    def test_variance_formula(self):
        assert gaussian_noise_variance(1.0, 1.0, 0.05) == pytest.approx(2 * math.log(25))
        assert gaussian_noise_variance(1.0, 1.0, 0.05) == pytest.approx(6.4378, abs=1e-4)
        assert gaussian_noise_variance(1.0, 1.0, 1.25 / math.e ** 2) == pytest.approx(4.0)

    def test_delta_domain(self, rng):
        for bad in (0.0, 1.25, -0.1):
            with pytest.raises(ValueError):
                gaussian_mechanism([0.1], 1.0, 1.0, bad, rng)
        assert gaussian_noise_variance(1.0, 1.0, 1.0) > 0

    def test_monotone_in_delta(self):
        assert gaussian_noise_variance(1.0, 1.0, 0.01) > gaussian_noise_variance(1.0, 1.0, 0.1)

    def test_empirical_moments(self):
        rng = np.random.default_rng(6)
        g = np.array([0.2, -0.5, 0.1])
        draws = np.array([gaussian_mechanism(g, 1.0, 1.0, 0.05, rng).w for _ in range(100_000)])
        var = gaussian_noise_variance(1.0, 1.0, 0.05)
        assert np.all(np.abs(draws.var(axis=0, ddof=1) / var - 1) < 0.05)
        assert np.all(np.abs(draws.mean(axis=0) - g) < 4 * math.sqrt(var / len(draws)))


def test_privacy_params_validation():
    with pytest.raises(ValueError):
        PrivacyParams(0.0)
    with pytest.raises(ValueError):
        PrivacyParams(1.0, 1.5)
    assert PrivacyParams(1.0, 1.0).delta == 1.0
