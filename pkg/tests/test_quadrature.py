import math
from unittest import TestCase

import numpy as np
from scipy import stats

from vlcov.geometry import Disk, Region, area, ring_region
from vlcov.quadrature import QuadratureSpec, SlowDecayError, adaptive_gauss, gauss_legendre, gil_pelaez_cdf, \
    integrate_radial, integrate_region, oscillatory_tail_integral


class GaussLegendreTest(TestCase):

    def test_rule(self) -> None:
        nodes, weights = gauss_legendre(16)
        self.assertEqual(nodes.size, 16)
        self.assertAlmostEqual(float(weights.sum()), 2.0, places=13)
        # exact for polynomials up to degree 31
        self.assertAlmostEqual(float(weights @ nodes ** 30), 2 / 31, places=13)


class AdaptiveGaussTest(TestCase):

    def test_sine(self) -> None:
        result = adaptive_gauss(np.sin, 0.0, math.pi)
        self.assertAlmostEqual(result.value.real, 2.0, places=10)
        self.assertTrue(result.converged)

    def test_batched(self) -> None:
        def f(x: np.ndarray) -> np.ndarray:
            return np.stack([np.sin(x), np.cos(x), np.ones_like(x)])

        result = adaptive_gauss(f, 0.0, math.pi)
        np.testing.assert_allclose(result.value.real, [2.0, 0.0, math.pi], atol=1e-10)

    def test_breakpoint(self) -> None:
        result = adaptive_gauss(lambda x: np.abs(x - 1), 0.0, 3.0, breakpoints=[1.0])
        self.assertAlmostEqual(result.value.real, 2.5, places=12)

    def test_oscillating(self) -> None:
        result = adaptive_gauss(lambda x: np.exp(1j * 200 * x), 0.0, 1.0, QuadratureSpec(rel_tol=1e-10))
        expected = (np.exp(200j) - 1) / 200j
        self.assertAlmostEqual(abs(result.value - expected), 0.0, places=9)

    def test_depth_exhausted(self) -> None:
        result = adaptive_gauss(lambda x: 1 / np.sqrt(x), 0.0, 1.0, QuadratureSpec(rel_tol=1e-12, max_depth=3))
        self.assertFalse(result.converged)
        self.assertAlmostEqual(result.value.real, 2.0, delta=0.1)

    def test_empty_interval(self) -> None:
        result = adaptive_gauss(np.sin, 1.0, 1.0)
        self.assertEqual(result.value, 0j)
        self.assertEqual(result.panels, 0)


class RadialTest(TestCase):

    def test_area(self) -> None:
        region = ring_region(0, (0.0, 0.0), 9.0).clipped(Disk((0.0, 0.0), 10.0))
        result = integrate_radial(lambda r: np.ones_like(r), region)
        self.assertAlmostEqual(result.value.real / area(region), 1.0, places=5)

    def test_ring_area(self) -> None:
        region = ring_region(2, (9.0, 4.0), 9.0)
        result = integrate_radial(lambda r: np.ones_like(r), region)
        self.assertAlmostEqual(result.value.real / (8 * 324.0), 1.0, places=5)

    def test_lower_radius(self) -> None:
        region = ring_region(0, (0.0, 0.0), 9.0)
        result = integrate_radial(lambda r: np.ones_like(r), region, r_min=5.0)
        self.assertAlmostEqual(result.value.real, 324.0 - 25 * math.pi, delta=1e-3)

    def test_matches_region_integral(self) -> None:
        region = ring_region(0, (3.0, 4.0), 9.0).clipped(Disk((0.0, 0.0), 12.0))
        radial = integrate_radial(lambda r: np.exp(-r * r / 100), region).value.real
        planar = integrate_region(lambda p: np.exp(-np.sum(p * p, axis=1) / 100), region).real
        self.assertAlmostEqual(planar / radial, 1.0, delta=1e-3)

    def test_region_without_disk(self) -> None:
        region = ring_region(1, (0.0, 0.0), 9.0)
        planar = integrate_region(lambda p: p[:, 0] ** 2, region, QuadratureSpec(rel_tol=1e-10))
        # two squares at x in [9, 27] and [-27, -9], two at x in [-9, 9]
        expected = 2 * 18 * (27 ** 3 - 9 ** 3) / 3 + 2 * 18 * (2 * 9 ** 3) / 3
        self.assertAlmostEqual(planar.real / expected, 1.0, places=9)


class RegionIntegralTest(TestCase):

    spec = QuadratureSpec(rel_tol=1e-10, abs_tol=1e-14)

    def setUp(self) -> None:
        self.rng = np.random.default_rng(17)

    def _random_region(self) -> Region:
        y = tuple(self.rng.uniform(-9.0, 9.0, 2))
        return ring_region(1, y, 9.0).clipped(Disk((0.0, 0.0), float(self.rng.uniform(10.0, 30.0))))

    def test_linear(self) -> None:
        for _ in range(5):
            region = self._random_region()
            width = float(self.rng.uniform(20.0, 200.0))
            a, b = complex(*self.rng.normal(size=2)), complex(*self.rng.normal(size=2))

            def first(p: np.ndarray) -> np.ndarray:
                return np.exp(-np.sum(p * p, axis=1) / width)

            def second(p: np.ndarray) -> np.ndarray:
                return 1 / (1 + np.sum(p * p, axis=1)) ** 2 + 1j * p[:, 0] / 100

            combined = integrate_region(lambda p: a * first(p) + b * second(p), region, self.spec)
            one, two = integrate_region(first, region, self.spec), integrate_region(second, region, self.spec)
            self.assertLessEqual(abs(combined - a * one - b * two), 1e-7 * (abs(a * one) + abs(b * two)))

    def test_additive(self) -> None:
        def f(p: np.ndarray) -> np.ndarray:
            return np.exp(-np.sum(p * p, axis=1) / 300) * (2 + np.cos(p[:, 1]))

        for _ in range(5):
            region = self._random_region()
            whole = integrate_region(f, region, self.spec)
            parts = sum(integrate_region(f, Region(squares=(square,), clip_disk=region.clip_disk), self.spec)
                        for square in region.squares)
            self.assertLessEqual(abs(whole - parts), 1e-7 * abs(whole))

    def test_depth_exhausted_warns(self) -> None:
        spec = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-14, panel_order=2, max_depth=1)
        region = ring_region(0, (0.0, 0.0), 9.0)
        with self.assertLogs("vlcov.quadrature", "WARNING") as logs:
            value = integrate_region(lambda p: np.exp(-np.sum(p * p, axis=1)), region, spec)
        self.assertIn("stopped at depth 1", logs.output[0])
        self.assertTrue(math.isfinite(value.real))


class TailIntegralTest(TestCase):

    def test_damped_cosine(self) -> None:
        result = oscillatory_tail_integral(lambda t: np.exp(-t) * np.cos(t), 0.0, QuadratureSpec(abs_tol=1e-10))
        self.assertAlmostEqual(result.value.real, 0.5, places=9)

    def test_from_positive_start(self) -> None:
        result = oscillatory_tail_integral(lambda t: 1 / t ** 2, 1.0, QuadratureSpec(abs_tol=1e-9))
        self.assertAlmostEqual(result.value.real, 1.0, delta=1e-8)

    def test_no_decay(self) -> None:
        with self.assertRaises(SlowDecayError) as context:
            oscillatory_tail_integral(np.ones_like, 0.0)
        self.assertEqual(context.exception.error, math.inf)


class GilPelaezTest(TestCase):

    def test_exponential(self) -> None:
        s = np.array([0.1, 0.5, 1.0, 2.0, 5.0])
        cdf = gil_pelaez_cdf(lambda t: 1 / (1 - 1j * t), s, QuadratureSpec(rel_tol=1e-8, abs_tol=1e-7))
        np.testing.assert_allclose(cdf, 1 - np.exp(-s), atol=1e-6)

    def test_scalar_threshold(self) -> None:
        cdf = gil_pelaez_cdf(lambda t: 1 / (1 - 1j * t), 1.0, QuadratureSpec(rel_tol=1e-8, abs_tol=1e-7))
        self.assertIsInstance(cdf, float)
        self.assertAlmostEqual(cdf, 1 - math.exp(-1), delta=1e-6)

    def test_point_mass(self) -> None:
        cdf = gil_pelaez_cdf(lambda t: np.exp(2j * t), np.array([1.9, 2.0, 2.1]), damping=0.01)
        self.assertLess(cdf[0], 1e-4)
        self.assertAlmostEqual(cdf[1], 0.5, delta=1e-4)
        self.assertGreater(cdf[2], 1 - 1e-4)

    def test_compound_poisson(self) -> None:
        mean = 2.0

        def cf(t: np.ndarray) -> np.ndarray:
            return np.exp(mean * (np.exp(1j * t) - 1))

        s = np.array([0.5, 1.5, 2.5])
        expected = np.cumsum([math.exp(-mean) * mean ** n / math.factorial(n) for n in range(3)])
        cdf = gil_pelaez_cdf(cf, s, damping=0.01)
        np.testing.assert_allclose(cdf, expected, atol=1e-4)

    def test_random_compound_poisson(self) -> None:
        # N ~ Poisson(mean) jumps with integer sizes: the CDF between lattice points is exact
        rng = np.random.default_rng(5)
        for _ in range(20):
            mean = float(rng.uniform(0.5, 3.0))
            sizes = rng.choice(np.arange(1, 5), size=int(rng.integers(1, 4)), replace=False)
            probabilities = rng.dirichlet(np.ones(sizes.size))

            def cf(t: np.ndarray) -> np.ndarray:
                jumps = sum(p * np.exp(1j * size * t) for p, size in zip(probabilities, sizes))
                return np.exp(mean * (jumps - 1))

            jump_pmf = np.zeros(sizes.max() + 1)
            jump_pmf[sizes] = probabilities
            top = 12
            pmf = np.zeros(top + 1)
            convolution = np.zeros(top + 1)
            convolution[0] = 1.0
            for n in range(60):
                pmf += stats.poisson.pmf(n, mean) * convolution
                convolution = np.convolve(convolution, jump_pmf)[:top + 1]
            s = np.arange(top) + 0.5
            cdf = gil_pelaez_cdf(cf, s, damping=0.01)
            np.testing.assert_allclose(cdf, np.cumsum(pmf)[:top], atol=1e-4, err_msg=f"mean {mean}, sizes {sizes}")
            self.assertTrue(np.all(np.diff(cdf) >= -1e-4))

    def test_monotone(self) -> None:
        s = np.linspace(0.05, 6.0, 40)
        cdf = gil_pelaez_cdf(lambda t: (1 - 1j * t) ** -2.5, s, QuadratureSpec(rel_tol=1e-8, abs_tol=1e-7))
        np.testing.assert_allclose(cdf, stats.gamma.cdf(s, 2.5), atol=1e-6)
        self.assertTrue(np.all(np.diff(cdf) >= 0))
        self.assertTrue(np.all((cdf >= 0) & (cdf <= 1)))
