import math
from unittest import TestCase

import numpy as np
from scipy import stats

from vlcov.analytic import CoverageCurve, CoverageKind, Method
from vlcov.channel import NetworkParams, derive_constants
from vlcov.geometry import lowest_ring_order
from vlcov.simulator import TYPICAL, McEstimate, Mode, NetworkRealization, count_covering_transmitters, \
    empirical_interference_cdf, estimate_coverage, estimate_interference_cdf, estimate_median_rate, \
    estimate_rate_coverage, evaluate_sinr, median_rate_from_curve, run_trials, sample_network


def _realization(points: list, orders: list) -> NetworkRealization:
    return NetworkRealization(positions=np.array(points, dtype=float).reshape(-1, 2),
                              orders=np.array(orders, dtype=int), seed=0)


class SampleNetworkTest(TestCase):

    def setUp(self) -> None:
        self.params = NetworkParams()

    def test_counts(self) -> None:
        draws = [sample_network(self.params, 1, Mode.INDEPENDENT, 11, trial) for trial in range(2000)]
        self.assertAlmostEqual(np.mean([draw.count(0) for draw in draws]), 32.4, delta=0.5)
        self.assertAlmostEqual(np.mean([draw.count(1) for draw in draws]), 129.6, delta=1.0)

    def test_line_of_sight_stays_in_room(self) -> None:
        draw = sample_network(self.params, 0, Mode.INDEPENDENT, 3)
        self.assertEqual(draw.count(0), len(draw))
        self.assertTrue(np.all(np.abs(draw.positions) <= self.params.a))

    def test_rings(self) -> None:
        draw = sample_network(self.params, 2, Mode.INDEPENDENT, 5)
        for (x, y), k in draw.transmitters:
            self.assertEqual(lowest_ring_order((x, y), (0.0, 0.0), self.params.a), k)

    def test_mirrored(self) -> None:
        for trial in range(20):
            draw = sample_network(self.params, 1, Mode.MIRRORED, 9, trial)
            self.assertEqual(draw.count(1), 4 * draw.count(0))
            for (x, y), k in draw.transmitters:
                self.assertEqual(lowest_ring_order((x, y), (0.0, 0.0), self.params.a), k)

    def test_mirror_images(self) -> None:
        draw = sample_network(self.params, 1, Mode.MIRRORED, 4)
        room = {(round(x, 9), round(y, 9)) for (x, y), k in draw.transmitters if k == 0}
        for (x, y), k in draw.transmitters:
            if k == 1 and abs(x) > self.params.a:
                original = (round(math.copysign(18.0, x) - x, 9), round(y, 9))
                self.assertIn(original, room)

    def test_deterministic(self) -> None:
        first = sample_network(self.params, 1, Mode.INDEPENDENT, 42, 7)
        second = sample_network(self.params, 1, Mode.INDEPENDENT, 42, 7)
        np.testing.assert_array_equal(first.positions, second.positions)
        other = sample_network(self.params, 1, Mode.INDEPENDENT, 42, 8)
        self.assertFalse(first.positions.shape == other.positions.shape
                         and np.array_equal(first.positions, other.positions))

    def test_uniform_in_room(self) -> None:
        positions = np.concatenate([sample_network(self.params, 0, Mode.INDEPENDENT, 1, trial).positions
                                    for trial in range(300)])
        for axis in range(2):
            result = stats.kstest(positions[:, axis], stats.uniform(loc=-9.0, scale=18.0).cdf)
            self.assertGreater(result.pvalue, 0.001)

    def test_ring_counts_are_poisson(self) -> None:
        draws = [sample_network(self.params, 1, Mode.INDEPENDENT, 21, trial) for trial in range(10_000)]
        for k, mean in ((0, 32.4), (1, 129.6)):
            counts = np.array([draw.count(k) for draw in draws])
            low, high = int(stats.poisson.ppf(0.005, mean)), int(stats.poisson.ppf(0.995, mean))
            inner = np.arange(low + 1, high)
            observed = np.concatenate([[np.sum(counts <= low)], [np.sum(counts == n) for n in inner],
                                       [np.sum(counts >= high)]])
            probabilities = np.concatenate([[stats.poisson.cdf(low, mean)], stats.poisson.pmf(inner, mean),
                                            [stats.poisson.sf(high - 1, mean)]])
            result = stats.chisquare(observed, probabilities * counts.size)
            self.assertGreater(result.pvalue, 0.01, f"ring {k}")


class EvaluateSinrTest(TestCase):

    def setUp(self) -> None:
        self.consts = derive_constants(NetworkParams())

    def test_single_transmitter(self) -> None:
        sinr, serving = evaluate_sinr(_realization([(0.0, 0.0)], [0]), (0.0, 0.0), self.consts, 0.07)
        self.assertEqual(serving, 0)
        self.assertAlmostEqual(sinr / (self.consts.peak_pathloss() / self.consts.sigma2), 1.0, places=12)

    def test_equidistant_noiseless(self) -> None:
        realization = _realization([(3.0, 0.0), (-3.0, 0.0)], [0, 0])
        sinr, _ = evaluate_sinr(realization, (0.0, 0.0), self.consts.noiseless(), 0.07)
        self.assertAlmostEqual(sinr, 1.0, places=12)

    def test_reflection_serves(self) -> None:
        # a first order image right above the receiver beats a far room transmitter
        realization = _realization([(8.0, 8.0), (0.0, 0.0)], [0, 1])
        _, serving = evaluate_sinr(realization, (0.0, 0.0), self.consts, 0.07)
        self.assertEqual(serving, 1)

    def test_empty_network(self) -> None:
        self.assertEqual(evaluate_sinr(_realization([], []), (0.0, 0.0), self.consts, 0.07), (0.0, None))

    def test_covering_transmitters(self) -> None:
        realization = _realization([(0.0, 0.0), (7.0, 7.0)], [0, 0])
        self.assertEqual(count_covering_transmitters(realization, (0.0, 0.0), self.consts, 0.07, 1.0), 1)
        self.assertEqual(count_covering_transmitters(realization, (3.5, 3.5), self.consts.noiseless(), 0.07, 0.5),
                         2)
        self.assertEqual(count_covering_transmitters(_realization([], []), (0.0, 0.0), self.consts, 0.07, 1.0), 0)


class EstimateTest(TestCase):

    def setUp(self) -> None:
        self.params = NetworkParams()

    def test_confidence_interval(self) -> None:
        estimate = McEstimate.from_successes(50_000, 100_000)
        self.assertAlmostEqual(estimate.ci_halfwidth, 0.0031, delta=1e-4)
        self.assertEqual(McEstimate.from_successes(0, 10).ci_halfwidth, 0.0)

    def test_tiny_threshold(self) -> None:
        curve = estimate_coverage(self.params, (0.0, 0.0), [1e-12], 1, Mode.INDEPENDENT, 500, 0)
        # only trials without a transmitter miss
        self.assertGreater(curve.values[0], 0.99)
        self.assertEqual(curve.method, Method.MONTE_CARLO)
        assert curve.ci_halfwidth is not None

    def test_worker_count_does_not_matter(self) -> None:
        single = run_trials(self.params, (4.0, -2.0), 1, Mode.INDEPENDENT, 12_000, 5, workers=1)
        double = run_trials(self.params, (4.0, -2.0), 1, Mode.INDEPENDENT, 12_000, 5, workers=2)
        for first, second in zip(single, double):
            np.testing.assert_array_equal(first, second)

    def test_typical_location(self) -> None:
        sinr, interference = run_trials(self.params, TYPICAL, 0, Mode.INDEPENDENT, 200, 1)
        self.assertEqual(sinr.shape, (200,))
        self.assertTrue(np.all(interference >= 0))

    def test_monotone(self) -> None:
        curve = estimate_coverage(self.params, (9.0, 9.0), [1.0, 2.0, 4.0, 8.0], 1, Mode.INDEPENDENT, 1000, 2)
        self.assertTrue(all(b <= a for a, b in zip(curve.values, curve.values[1:])))

    def test_rate_coverage(self) -> None:
        curve = estimate_rate_coverage(self.params, (0.0, 0.0), [1.0, 1e8, 1e9], 1, Mode.INDEPENDENT, 1000, 3)
        self.assertEqual(curve.kind, CoverageKind.RATE)
        self.assertGreater(curve.values[0], 0.99)
        self.assertTrue(all(b <= a for a, b in zip(curve.values, curve.values[1:])))

    def test_interference_cdf(self) -> None:
        estimates = estimate_interference_cdf(self.params, (0.0, 0.0), [0.0, 1.0], 1, Mode.INDEPENDENT, 500, 4)
        self.assertEqual(estimates[0].value, 0.0)
        self.assertEqual(estimates[1].value, 1.0)

    def test_empty_networks_count_at_zero(self) -> None:
        estimates = empirical_interference_cdf(np.array([0.0, 0.0, 1e-6, 3e-6]), [0.0, 1e-6, 1e-5])
        self.assertEqual([estimate.value for estimate in estimates], [0.5, 0.5, 1.0])
        sparse = NetworkParams(density=0.002)
        void = estimate_interference_cdf(sparse, (0.0, 0.0), [0.0], 0, Mode.INDEPENDENT, 4000, 8)[0]
        self.assertAlmostEqual(void.value, math.exp(-0.002 * 324), delta=4 * void.ci_halfwidth)

    def test_median_rate(self) -> None:
        median = estimate_median_rate(self.params, (0.0, 0.0), 1, Mode.INDEPENDENT, 2000, 6)
        curve = estimate_rate_coverage(self.params, (0.0, 0.0), [median], 1, Mode.INDEPENDENT, 2000, 6)
        self.assertAlmostEqual(curve.values[0], 0.5, delta=0.01)


class MedianFromCurveTest(TestCase):

    def test_interpolation(self) -> None:
        curve = CoverageCurve(thresholds=(1e6, 1e7, 1e8), values=(0.9, 0.7, 0.3), kind=CoverageKind.RATE,
                              method=Method.MONTE_CARLO)
        median = median_rate_from_curve(curve)
        assert median is not None
        self.assertAlmostEqual(math.log10(median), 7.5, places=12)

    def test_no_crossing(self) -> None:
        curve = CoverageCurve(thresholds=(1e6, 1e7), values=(0.9, 0.7), kind=CoverageKind.RATE,
                              method=Method.ANALYTIC)
        self.assertIsNone(median_rate_from_curve(curve))
