# verifier/tests/test_fields.py
import math

import numpy as np
from django.test import SimpleTestCase

from verifier import fields, geometry
from verifier.fields import MINUS_INFINITY


class FieldSpecTests(SimpleTestCase):
    def test_finite_difference_jacobian_matches_closed_form(self):
        field, _ = fields.gradient_of_polynomial([0.0, 0.0, 0.5, 0.25])
        no_jac = fields.FieldSpec(Z=field.Z, name="fd")
        x = np.array([0.7])
        np.testing.assert_allclose(no_jac.jacobian(x), field.jacobian(x), atol=1e-7)

    def test_scaled(self):
        field = fields.ou_drift(2.0).scaled(0.5)
        np.testing.assert_allclose(field.at([3.0]), [-3.0])
        np.testing.assert_allclose(field.jacobian([3.0]), [[-1.0]])

    def test_gradient_sign_convention(self):
        plus, V = fields.gradient_of_polynomial([0.0, 0.0, 0.5], sign=1)
        minus, _ = fields.gradient_of_polynomial([0.0, 0.0, 0.5], sign=-1)
        self.assertAlmostEqual(V(np.array([2.0])), 2.0)
        np.testing.assert_allclose(plus.at([2.0]), [2.0])
        np.testing.assert_allclose(minus.at([2.0]), [-2.0])

    def test_zero_field(self):
        self.assertTrue(fields.zero_field(2).is_zero)
        self.assertFalse(fields.constant_drift(1.0).is_zero)


class LineIntegralTests(SimpleTestCase):
    def test_constant_drift_on_a_segment(self):
        space = geometry.interval(0, 4)
        geo = geometry.geodesic_shoot(space, [0.5], [2.0])
        field = fields.constant_drift(1.5)
        self.assertAlmostEqual(fields.line_integral(geo, field, 1.0), 3.0, places=10)
        self.assertAlmostEqual(fields.line_integral(geo, field, 0.5), 1.5, places=10)

    def test_gradient_field_integrates_to_a_potential_difference(self):
        field, V = fields.gradient_of_polynomial([0.0, 0.0, 0.5])
        geo = geometry.geodesic_shoot(geometry.interval(-3, 3), [-1.0], [2.5])
        expected = V(np.array([1.5])) - V(np.array([-1.0]))
        self.assertAlmostEqual(fields.line_integral(geo, field), expected, places=8)

    def test_killing_field_along_the_equator(self):
        sphere = geometry.sphere2()
        geo = geometry.geodesic_shoot(sphere, [math.pi / 2, 0.0], [0.0, 1.0])
        # <alpha d/dphi, d/dphi> = alpha sin^2(theta) = alpha on the equator
        self.assertAlmostEqual(fields.line_integral(geo, fields.rotation_field(0.5)), 0.5, places=8)


class BakryEmeryTests(SimpleTestCase):
    def test_ou_drift_has_ric_infinity_one(self):
        space = geometry.interval(-4, 4)
        report = fields.lower_bound_scan(space, fields.ou_drift(1.0), math.inf, n_points=41, n_dirs=1)
        self.assertAlmostEqual(report.inf_estimate, 1.0, places=12)
        self.assertTrue(report.certifies(1.0))
        self.assertFalse(report.certifies(1.3))

    def test_dimension_at_most_n_forbids_transverse_drift(self):
        space = geometry.interval(0, 1)
        value = fields.bakry_emery_at(space, fields.constant_drift(1.0), 1.0, [0.5], [1.0])
        self.assertIs(value, MINUS_INFINITY)
        zero = fields.bakry_emery_at(space, fields.zero_field(1), 1.0, [0.5], [1.0])
        self.assertEqual(zero, 0.0)

    def test_finite_dimension_subtracts_the_drift_square(self):
        space = geometry.interval(0, 1)
        value = fields.bakry_emery_at(space, fields.constant_drift(2.0), 3.0, [0.5], [1.0])
        self.assertAlmostEqual(value, -2.0)

    def test_unit_vectors_only(self):
        with self.assertRaises(ValueError):
            fields.bakry_emery_at(geometry.interval(0, 1), fields.zero_field(1), 2.0, [0.5], [2.0])

    def test_intro_form_relabels_the_dimension(self):
        space = geometry.interval(0, 1)
        a = fields.bakry_emery_intro_form(space, fields.constant_drift(1.0), 2.0, [0.5], [1.0])
        b = fields.bakry_emery_at(space, fields.constant_drift(1.0), 3.0, [0.5], [1.0])
        self.assertEqual(a, b)

    def test_rotation_field_is_killing(self):
        sphere = geometry.sphere2()
        field = fields.rotation_field(1.0)
        x = np.array([1.0, 0.3])
        for v in fields.direction_fan(sphere, x, 6):
            self.assertAlmostEqual(fields.symmetric_derivative(sphere, field, x, v), 0.0, places=10)

    def test_rotation_kappa(self):
        kappa = fields.kappa_scan(geometry.sphere2(), fields.rotation_field(1.0))
        self.assertAlmostEqual(kappa, 1.0, places=6)

    def test_sup_norm(self):
        self.assertAlmostEqual(fields.sup_norm(geometry.interval(-2, 2), fields.ou_drift(1.0)), 2.0)
