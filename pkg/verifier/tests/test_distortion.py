# verifier/tests/test_distortion.py
import math

import numpy as np
from django.test import SimpleTestCase

from verifier.distortion import (
    INFINITY, CurvatureDimension, ExtendedReal, blowup_threshold, coefficient, sigma, sin_kn,
    sin_power_integral, tau,
)


class CurvatureDimensionTests(SimpleTestCase):
    def test_rejects_infinite_K_and_small_N(self):
        with self.assertRaises(ValueError):
            CurvatureDimension(math.inf, 2)
        with self.assertRaises(ValueError):
            CurvatureDimension(1.0, 0.5)

    def test_infinite_dimension(self):
        self.assertTrue(CurvatureDimension(1.0, math.inf).infinite_dimension)
        self.assertFalse(CurvatureDimension(1.0, 3).infinite_dimension)


class ExtendedRealTests(SimpleTestCase):
    def test_infinity_absorbs_sums_and_products(self):
        self.assertTrue((INFINITY + 1.0).infinite)
        self.assertTrue((2.0 * INFINITY).infinite)
        self.assertEqual((ExtendedReal(1.5) + 2.0).value, 3.5)

    def test_infinity_cannot_become_a_float(self):
        with self.assertRaises(ValueError):
            float(INFINITY)
        self.assertEqual(INFINITY.report_value(), math.inf)


class SinKNTests(SimpleTestCase):
    def test_three_branches(self):
        self.assertAlmostEqual(sin_kn(2.0, 2.0, 0.7), math.sin(0.7), places=12)
        self.assertAlmostEqual(sin_kn(-2.0, 2.0, 0.7), math.sinh(0.7), places=12)
        self.assertEqual(sin_kn(0.0, 3.0, 0.7), 0.7)

    def test_small_curvature_has_no_cancellation(self):
        self.assertAlmostEqual(sin_kn(1e-14, 2.0, 1.0), 1.0, places=12)

    def test_array_input(self):
        out = sin_kn(1.0, 1.0, np.array([0.0, math.pi / 2]))
        np.testing.assert_allclose(out, [0.0, 1.0], atol=1e-14)

    def test_rejects_infinite_N(self):
        with self.assertRaises(ValueError):
            sin_kn(1.0, math.inf, 1.0)


class CoefficientTests(SimpleTestCase):
    def test_flat_sigma_is_t_exactly(self):
        cd = CurvatureDimension(0.0, 3.0)
        for t in (0.0, 0.1, 0.5, 0.9, 1.0):
            self.assertEqual(sigma(t, 2.5, cd).value, t)

    def test_flat_tau_is_t(self):
        cd = CurvatureDimension(0.0, 4.0)
        for t in (0.1, 0.33, 0.8):
            self.assertAlmostEqual(tau(t, 1.7, cd).value, t, delta=1e-12)

    def test_blowup_threshold_is_detected(self):
        K, N = 1.0, 2.0
        threshold = blowup_threshold(K, N)
        self.assertAlmostEqual(threshold, math.pi * math.sqrt(2.0))
        cd = CurvatureDimension(K, N)
        self.assertTrue(sigma(0.5, threshold + 1e-9, cd).infinite)
        self.assertTrue(sigma(0.5, threshold - 1e-9, cd).finite)

    def test_endpoints_stay_finite_past_the_threshold(self):
        cd = CurvatureDimension(1.0, 2.0)
        self.assertEqual(sigma(1.0, 10.0, cd).value, 1.0)
        self.assertEqual(tau(0.0, 10.0, cd).value, 0.0)

    def test_tau_on_a_line_with_positive_K(self):
        self.assertTrue(tau(0.5, 1.0, CurvatureDimension(1.0, 1.0)).infinite)

    def test_sigma_below_tau(self):
        rng = np.random.default_rng(1)
        for _ in range(10_000):
            K = rng.uniform(0.01, 3.0)
            N = rng.uniform(1.05, 10.0)
            theta = rng.uniform(1e-3, 0.99) * math.pi * math.sqrt((N - 1) / K)
            t = rng.uniform(0.0, 1.0)
            cd = CurvatureDimension(K, N)
            s, tt = sigma(t, theta, cd), tau(t, theta, cd)
            self.assertTrue(s.finite and tt.finite)
            self.assertLessEqual(s.value, tt.value + 1e-12)

    def test_dispatch(self):
        cd = CurvatureDimension(0.5, 3.0)
        self.assertEqual(coefficient("sigma", 0.3, 1.0, cd), sigma(0.3, 1.0, cd))
        with self.assertRaises(ValueError):
            coefficient("gamma", 0.3, 1.0, cd)

    def test_infinite_dimension_is_refused(self):
        with self.assertRaises(ValueError):
            sigma(0.5, 1.0, CurvatureDimension(1.0, math.inf))


class SinPowerIntegralTests(SimpleTestCase):
    def test_round_sphere_profile(self):
        self.assertAlmostEqual(sin_power_integral(1.0, 2.0, math.pi), 2.0, places=10)

    def test_flat_profile(self):
        self.assertAlmostEqual(sin_power_integral(0.0, 3.0, 2.0), 8.0 / 3.0)
        self.assertEqual(sin_power_integral(1.0, 1.0, 0.4), 0.4)
