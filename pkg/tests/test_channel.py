import math
from unittest import TestCase

import numpy as np

from vlcov.channel import NetworkParams, ParameterError, cosine_geometry, dc_gain, derive_constants, pathloss, \
    pathloss_from_squared_distance, received_power


class DeriveConstantsTest(TestCase):

    def setUp(self) -> None:
        self.params = NetworkParams()
        self.consts = derive_constants(self.params)

    def test_table_defaults(self) -> None:
        self.assertAlmostEqual(self.consts.m, 1.0, places=12)
        self.assertAlmostEqual(self.consts.beta, 4.0, places=12)
        self.assertAlmostEqual(self.consts.alpha, 0.0350936, delta=1e-6)
        self.assertAlmostEqual(self.consts.sigma2 / 1.6201e-12, 1.0, delta=1e-4)

    def test_noiseless(self) -> None:
        self.assertEqual(self.consts.noiseless().sigma2, 0.0)
        self.assertEqual(self.consts.noiseless().alpha, self.consts.alpha)

    def test_degenerate_semi_angle(self) -> None:
        for psi in (0.0, 90.0):
            with self.assertRaises(ParameterError) as context:
                NetworkParams(psi_half=psi)
            self.assertEqual(context.exception.name, "psi_half")

    def test_invalid_parameters(self) -> None:
        for changes, name in [({"a": -1.0}, "a"), ({"density": 0.0}, "lambda"), ({"eta": 1.5}, "eta"),
                              ({"h": -0.1}, "h"), ({"max_order": -1}, "k")]:
            with self.assertRaises(ParameterError) as context:
                NetworkParams(**changes)  # type: ignore
            self.assertEqual(context.exception.name, name)

    def test_zero_height_has_infinite_noise(self) -> None:
        consts = derive_constants(NetworkParams(h=0.0))
        self.assertEqual(consts.sigma2, math.inf)
        self.assertEqual(consts.noiseless().peak_pathloss(), math.inf)


class PathlossTest(TestCase):

    def setUp(self) -> None:
        self.consts = derive_constants(NetworkParams())

    def test_nadir(self) -> None:
        self.assertAlmostEqual(pathloss((1.0, 2.0), (1.0, 2.0), self.consts) / 3.5 ** -8, 1.0, places=12)
        self.assertAlmostEqual(self.consts.peak_pathloss() / 4.4407e-5, 1.0, delta=1e-4)

    def test_reflection_attenuation(self) -> None:
        direct = pathloss((4.0, 0.0), (0.0, 0.0), self.consts)
        reflected = pathloss((4.0, 0.0), (0.0, 0.0), self.consts, k=1, eta=0.07)
        self.assertAlmostEqual(reflected / direct, 0.07, places=12)
        self.assertAlmostEqual(direct, (16 + 12.25) ** -4, places=18)

    def test_vectorized(self) -> None:
        d2 = np.array([0.0, 1.0, 4.0])
        np.testing.assert_allclose(pathloss_from_squared_distance(d2, self.consts), (d2 + 12.25) ** -4.0)

    def test_zero_height(self) -> None:
        consts = derive_constants(NetworkParams(h=0.0)).noiseless()
        self.assertEqual(pathloss((0.0, 0.0), (0.0, 0.0), consts), math.inf)
        self.assertAlmostEqual(pathloss((2.0, 0.0), (0.0, 0.0), consts), 2.0 ** -8, places=15)

    def test_scale_law(self) -> None:
        rng = np.random.default_rng(3)
        for c in (0.5, 2.0, 3.7):
            scaled = derive_constants(NetworkParams(h=c * 3.5))
            for _ in range(5):
                x, y = tuple(rng.uniform(-9, 9, 2)), tuple(rng.uniform(-9, 9, 2))
                for k in (0, 1, 2):
                    loss = pathloss(x, y, self.consts, k, 0.07)
                    stretched = pathloss((c * x[0], c * x[1]), (c * y[0], c * y[1]), scaled, k, 0.07)
                    self.assertAlmostEqual(stretched / loss * c ** (2 * self.consts.beta), 1.0, places=9)

    def test_symmetric(self) -> None:
        rng = np.random.default_rng(4)
        for _ in range(10):
            x, y = tuple(rng.uniform(-27, 27, 2)), tuple(rng.uniform(-9, 9, 2))
            self.assertEqual(pathloss(x, y, self.consts, 1, 0.07), pathloss(y, x, self.consts, 1, 0.07))

    def test_noise_is_linear(self) -> None:
        params = NetworkParams()
        sigma2 = derive_constants(params).sigma2
        for factor in (0.1, 2.0, 10.0):
            noisier = derive_constants(params.with_changes(noise_power=factor * params.noise_power)).sigma2
            stronger = derive_constants(params.with_changes(tx_power=factor * params.tx_power)).sigma2
            self.assertAlmostEqual(noisier / sigma2, factor, places=12)
            self.assertAlmostEqual(stronger / sigma2, 1 / factor, places=12)


class LambertianTest(TestCase):

    def setUp(self) -> None:
        self.params = NetworkParams()
        self.consts = derive_constants(self.params)

    def test_cosines(self) -> None:
        cos_tx, cos_rx = cosine_geometry(0.0, 3.5)
        self.assertEqual((cos_tx, cos_rx), (1.0, 1.0))

    def test_gain_matches_pathloss(self) -> None:
        for d in (0.0, 2.0, 7.5):
            gain = dc_gain(d, self.params, self.consts)
            expected = self.consts.alpha * (d * d + 3.5 ** 2) ** (-self.consts.beta / 2)
            self.assertAlmostEqual(gain / expected, 1.0, places=12)
            squared = gain ** 2
            self.assertAlmostEqual(squared / (self.consts.alpha ** 2 * pathloss((d, 0.0), (0.0, 0.0), self.consts)),
                                   1.0, places=12)

    def test_received_power(self) -> None:
        power = received_power((0.0, 0.0), (0.0, 0.0), self.params, self.consts)
        self.assertAlmostEqual(power / (self.consts.alpha ** 2 * 3.5 ** -8), 1.0, places=12)
        noise_ratio = power / self.params.noise_power
        self.assertAlmostEqual(noise_ratio / (3.5 ** -8 / self.consts.sigma2), 1.0, places=12)
