# verifier/tests/test_geometry.py
import math

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings

from verifier import geometry
from verifier.exceptions import ConjugatePoint, LeavesChart


class DistanceTests(SimpleTestCase):
    def test_interval_and_circle(self):
        self.assertEqual(geometry.distance(geometry.interval(0, 3), [0.5], [2.0]), 1.5)
        circle = geometry.circle(2 * math.pi)
        self.assertAlmostEqual(geometry.distance(circle, [0.1], [2 * math.pi - 0.1]), 0.2)

    def test_sphere_antipodes(self):
        sphere = geometry.sphere2(2.0)
        d = geometry.distance(sphere, [0.3, 0.0], [math.pi - 0.3, math.pi])
        self.assertAlmostEqual(d, 2.0 * math.pi, places=9)

    def test_pairwise_matches_pointwise(self):
        torus = geometry.flat_torus2(2.0, 3.0)
        xs = np.array([[0.1, 0.2], [1.9, 2.9]])
        D = geometry.pairwise_distance(torus, xs, xs)
        self.assertAlmostEqual(D[0, 1], geometry.distance(torus, xs[0], xs[1]))
        self.assertAlmostEqual(D[0, 1], math.hypot(0.2, 0.3))


class GeodesicTests(SimpleTestCase):
    def test_equator_is_a_geodesic(self):
        sphere = geometry.sphere2()
        geo = geometry.geodesic_shoot(sphere, [math.pi / 2, 0.0], [0.0, 1.0])
        np.testing.assert_allclose(geo.points[:, 0], math.pi / 2, atol=1e-12)
        self.assertAlmostEqual(geo.speed, 1.0)
        self.assertAlmostEqual(geo.at(1.0)[1], 1.0)

    def test_log_map_inverts_the_shot(self):
        sphere = geometry.sphere2()
        x, y = np.array([1.0, 0.5]), np.array([2.0, 1.5])
        v = geometry.log_map(sphere, x, y)
        end = geometry.geodesic_shoot(sphere, x, v).at(1.0)
        self.assertLess(geometry.distance(sphere, end, y), 1e-9)

    def test_interval_geodesic_may_not_leave_the_chart(self):
        with self.assertRaises(LeavesChart):
            geometry.geodesic_shoot(geometry.interval(0, 1), [0.5], [1.0])

    def test_circle_wraps(self):
        circle = geometry.circle(1.0)
        geo = geometry.geodesic_shoot(circle, [0.9], [0.3])
        self.assertAlmostEqual(float(geo.points[-1][0]), 0.2)

    def test_reversed_path(self):
        geo = geometry.geodesic_shoot(geometry.interval(0, 2), [0.5], [1.0])
        back = geo.reversed()
        np.testing.assert_allclose(back.points[0], geo.points[-1])
        np.testing.assert_allclose(back.initial_velocity, [-1.0])

    def test_sphere_geodesics_are_checked_for_energy_drift(self):
        sphere = geometry.sphere2(2.0)
        geo = geometry.geodesic_shoot(sphere, [0.4, 1.0], [1.1, -0.7])
        self.assertLess(geo.energy_drift, 1e-12)
        self.assertAlmostEqual(geo.speed, 2.0 * math.hypot(1.1, math.sin(0.4) * 0.7), places=12)
        with override_settings(CDVERIFY=dict(settings.CDVERIFY, ENERGY_DRIFT_TOL=-1.0)):
            with self.assertLogs("verifier.geometry", "WARNING") as logs:
                geometry.geodesic_shoot(sphere, [0.4, 1.0], [1.1, -0.7])
        self.assertIn("energy drift", logs.output[0])

    def test_still_geodesic_has_no_drift(self):
        geo = geometry.geodesic_shoot(geometry.sphere2(), [1.0, 1.0], [0.0, 0.0])
        self.assertEqual(geo.energy_drift, 0.0)


class CurvatureTests(SimpleTestCase):
    def test_sphere_ricci_closed_form_matches_finite_differences(self):
        sphere = geometry.sphere2(1.5)
        x, v = np.array([1.1, 0.4]), np.array([0.3, 0.7])
        closed = geometry.ricci_at(sphere, x, v)
        generic = geometry.generic_ricci(sphere, x, v)
        self.assertAlmostEqual(closed, generic, delta=1e-4 * (1 + abs(closed)))

    def test_flat_models_have_zero_ricci(self):
        self.assertEqual(geometry.ricci_at(geometry.flat_torus2(), [1.0, 1.0], [1.0, 0.0]), 0.0)


class JacobiTests(SimpleTestCase):
    def test_sphere_jacobi_determinant(self):
        sphere = geometry.sphere2()
        theta = 1.2
        geo = geometry.geodesic_shoot(sphere, [math.pi / 2, 0.0], [0.0, theta])
        jac = geometry.jacobi_evolve(sphere, geo, np.eye(2), np.zeros((2, 2)))
        # transverse block solves a'' + theta^2 a = 0, the tangential one is constant
        expected = np.log(np.abs(np.cos(theta * geo.t)))
        np.testing.assert_allclose(jac.detlog, expected, atol=1e-8)

    def test_conjugate_point_is_raised(self):
        sphere = geometry.sphere2()
        geo = geometry.geodesic_shoot(sphere, [math.pi / 2, 0.0], [0.0, 2.0])
        A0prime = np.diag([1.0, 0.0])
        with self.assertRaises(ConjugatePoint):
            geometry.jacobi_evolve(sphere, geo, np.eye(2), A0prime)

    def test_flat_jacobi_is_linear(self):
        torus = geometry.flat_torus2()
        geo = geometry.geodesic_shoot(torus, [1.0, 1.0], [0.5, 0.2])
        jac = geometry.jacobi_evolve(torus, geo, np.eye(2), -0.5 * np.eye(2))
        np.testing.assert_allclose(jac.detlog, 2 * np.log(1 - 0.5 * geo.t), atol=1e-10)
