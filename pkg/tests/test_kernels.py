import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from prmix.exceptions import ConfigurationError, InvalidParameterError
from prmix.kernels import (
    GaussianKernel,
    UniformKernel,
    gaussian_kernel,
    kernel_from_name,
    mixture_density,
    uniform_kernel,
)
from prmix.measure import MixingMeasure, SupportInterval, trapezoid_weights


def random_measure(rng, support, grid_size=300):
    atoms = rng.dirichlet(np.ones(3))
    grid = support.grid(grid_size)
    dens = rng.gamma(0.5, size=grid_size)
    dens *= atoms[2] / np.dot(trapezoid_weights(grid), dens)
    return MixingMeasure(support, atoms[0], atoms[1], grid, dens)


def brute_force_uniform_mixture(P, x):
    """m_P(x) by adaptive quadrature of the piecewise-linear density times 1/u."""
    s = P.support
    atoms = (P.atom_lower / s.lower if 0 <= x <= s.lower else 0.0) + (
        P.atom_upper / s.upper if 0 <= x <= s.upper else 0.0
    )
    start = max(x, s.lower)
    if x < 0 or start >= s.upper:
        return atoms
    knots = P.grid[P.grid > start]
    pts = np.concatenate([[start], knots])
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        total += integrate.quad(lambda u: np.interp(u, P.grid, P.density) / u, a, b, epsabs=1e-14, epsrel=1e-12)[0]
    return atoms + total


class TestUniformKernel:
    k = uniform_kernel()

    @pytest.mark.parametrize("x,u,expected", [(0.5, 2.0, 0.5), (3.0, 2.0, 0.0), (2.0, 2.0, 0.5), (0.0, 2.0, 0.5)])
    def test_values(self, x, u, expected):
        assert self.k.evaluate(x, u) == expected

    def test_negative_x(self):
        assert self.k.evaluate(-0.1, 2.0) == 0.0

    @pytest.mark.parametrize("u", [0.0, -1.0])
    def test_invalid_u(self, u):
        with pytest.raises(InvalidParameterError):
            self.k.evaluate(0.5, u)
        with pytest.raises(InvalidParameterError):
            self.k.observation_support(u)

    def test_support(self):
        assert self.k.observation_support(2.0) == (0.0, 2.0)

    @pytest.mark.parametrize("u", [0.01, 0.7, 3.0])
    def test_integrates_to_one(self, u):
        val, _ = integrate.quad(lambda x: self.k.evaluate(x, u), 0, u)
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_grid_weights_match_quadrature(self, rng):
        grid = SupportInterval(1e-3, 4.0).grid(60)
        for x in np.concatenate([rng.uniform(0, 4, 10), [0.0, 1e-3, grid[5], 4.0]]):
            w = self.k.grid_weights(x, grid)
            for j in (0, 5, 30, 59):
                hat = np.zeros_like(grid)
                hat[j] = 1.0
                lo = max(x, grid[0])
                oracle = 0.0 if lo >= grid[-1] else integrate.quad(
                    lambda u: np.interp(u, grid, hat) / u, lo, grid[-1], points=grid[max(j - 1, 0):j + 2],
                    epsabs=1e-13, limit=200)[0]
                assert w[j] == pytest.approx(oracle, rel=1e-9, abs=1e-12)

    def test_column_provider_matches_grid_weights(self, rng):
        grid = SupportInterval(1e-5, 6.0).grid(400)
        columns = self.k.column_provider(grid)
        for x in np.concatenate([rng.uniform(-1, 7, 200), grid[[0, 1, -2, -1]], [0.0, 5e-6]]):
            start, head, tail, tail_c = columns(x)
            dense = np.zeros_like(grid)
            dense[start:start + head.size] = head
            dense[start + head.size:] = tail
            np.testing.assert_allclose(dense, self.k.grid_weights(x, grid), rtol=1e-12, atol=1e-15)
            np.testing.assert_allclose(tail_c * trapezoid_weights(grid)[start + head.size:], tail, rtol=1e-12)


class TestGaussianKernel:
    def test_mode(self):
        assert gaussian_kernel(1.0).evaluate(0.3, 0.3) == pytest.approx(0.3989422804, abs=1e-9)

    def test_one_sd(self):
        assert gaussian_kernel(1.0).evaluate(1.3, 0.3) == pytest.approx(0.2419707245, abs=1e-9)

    def test_symmetry(self, rng):
        k = gaussian_kernel(0.7)
        for x, u in rng.normal(size=(100, 2)) * 3:
            assert k.evaluate(x, u) == k.evaluate(u, x)

    @pytest.mark.parametrize("sigma", [0.0, -1.0, float("nan")])
    def test_invalid(self, sigma):
        with pytest.raises(InvalidParameterError):
            gaussian_kernel(sigma)

    def test_support_and_integral(self):
        k = gaussian_kernel(0.5)
        assert k.observation_support(1.0) == (-math.inf, math.inf)
        val, _ = integrate.quad(lambda x: k.evaluate(x, 1.0), -np.inf, np.inf)
        assert val == pytest.approx(1.0, abs=1e-6)


class TestNames:
    def test_from_name(self):
        assert kernel_from_name("uniform") == UniformKernel()
        assert kernel_from_name("gaussian", sigma=2.0) == GaussianKernel(2.0)
        assert kernel_from_name("gaussian", sigma=2.0) != GaussianKernel(1.0)
        assert hash(GaussianKernel(2.0)) == hash(GaussianKernel(2.0))

    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            kernel_from_name("laplace")


class TestMixtureDensity:
    k = uniform_kernel()
    support = SupportInterval(0.1, 2.0)

    def test_atom_at_upper(self):
        P = MixingMeasure(self.support, 0.0, 1.0, self.support.grid(100), np.zeros(100))
        for x in (0.0, 0.05, 1.0, 2.0):
            assert mixture_density(self.k, P, x) == pytest.approx(0.5, abs=1e-15)
        assert mixture_density(self.k, P, 2.0001) == 0.0

    def test_exponential_williamson(self):
        # u e^{-u} on [0.001, 20] mixes Unif(0, u) into e^{-x}
        s = SupportInterval(0.001, 20.0)
        P = MixingMeasure.from_density(s, lambda u: u * np.exp(-u), 1000)
        P = P.scaled(1.0 / P.total_mass)
        assert mixture_density(self.k, P, 1.0) == pytest.approx(math.exp(-1.0), abs=1e-3)

    def test_scalar_and_array(self, rng):
        P = random_measure(rng, self.support)
        assert isinstance(mixture_density(self.k, P, 0.5), float)
        assert mixture_density(self.k, P, np.array([0.5, 1.0])).shape == (2,)

    def test_matches_brute_force(self, rng):
        P = random_measure(rng, self.support, 40)
        for x in np.concatenate([rng.uniform(0, 2.2, 20), [0.0, 0.1, 2.0, P.grid[7]]]):
            assert mixture_density(self.k, P, x) == pytest.approx(brute_force_uniform_mixture(P, x), rel=1e-9, abs=1e-12)

    def test_constant_below_lower(self, rng):
        P = random_measure(rng, self.support)
        vals = mixture_density(self.k, P, np.linspace(0, 0.1, 50))
        assert np.ptp(vals) <= 1e-12 * vals[0]

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_non_increasing(self, seed):
        P = random_measure(np.random.default_rng(seed), self.support)
        vals = mixture_density(self.k, P, np.linspace(0, 2.0, 3001))
        assert np.all(np.diff(vals) <= 1e-12 * vals[0])

    def test_integrates_to_one_uniform(self, rng):
        for _ in range(5):
            P = random_measure(rng, self.support)
            x = np.union1d(np.linspace(0, 2.0, 20001), [0.1, np.nextafter(0.1, 1)])
            total = np.dot(trapezoid_weights(x), mixture_density(self.k, P, x))
            assert total == pytest.approx(1.0, abs=1e-4)

    def test_integrates_to_one_gaussian(self, rng):
        k = gaussian_kernel(0.3)
        P = random_measure(rng, self.support)
        x = np.linspace(-3, 5, 8001)
        assert np.dot(trapezoid_weights(x), mixture_density(k, P, x)) == pytest.approx(1.0, abs=1e-4)

    def test_gaussian_matches_loop(self, rng):
        k = gaussian_kernel(0.4)
        P = random_measure(rng, self.support, 50)
        xs = rng.uniform(-1, 3, 10)
        fast = mixture_density(k, P, xs)
        slow = super(GaussianKernel, k).mixture_values(xs, P)
        np.testing.assert_allclose(fast, slow, rtol=1e-12)

    @pytest.mark.parametrize("kernel", [uniform_kernel(), gaussian_kernel(0.5)])
    def test_linear_in_measure(self, rng, kernel):
        P, Q = random_measure(rng, self.support), random_measure(rng, self.support)
        alpha = 0.3
        mix = P.replace(
            alpha * P.atom_lower + (1 - alpha) * Q.atom_lower,
            alpha * P.atom_upper + (1 - alpha) * Q.atom_upper,
            alpha * P.density + (1 - alpha) * Q.density,
        )
        x = np.linspace(0, 2.5, 200)
        lhs = mixture_density(kernel, mix, x)
        rhs = alpha * mixture_density(kernel, P, x) + (1 - alpha) * mixture_density(kernel, Q, x)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)
