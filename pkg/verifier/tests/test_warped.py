# verifier/tests/test_warped.py
import math

import numpy as np
from django.test import SimpleTestCase

from verifier import fields, geometry, warped
from verifier.exceptions import ConditionViolated, DegenerateWarp


def flat_cylinder_spec(N=2.0):
    f, grad_f, hess_f = warped.constant_warp(1.0)
    return warped.WarpedSpec(
        base=geometry.interval(0.0, 1.0), fiber=geometry.circle(2 * math.pi), f=f, grad_f=grad_f,
        hess_f=hess_f, N=N, fiber_field=fields.zero_field(1), name="cylinder",
    )


class SphereExampleTests(SimpleTestCase):
    def test_cd_n_n_plus_one_without_drift(self):
        for N in (3.0, 5.0, 10.0):
            with self.subTest(N=N):
                bundle = warped.sphere_example(N, sample_n=100, rng=np.random.default_rng(int(N)))
                self.assertTrue(bundle.verdict.passed, bundle.verdict.witnesses)
                self.assertAlmostEqual(bundle.fiber_inf, 1.0, places=9)
                self.assertAlmostEqual(bundle.K_F, 1.0 / (N - 1), places=9)
                # the product formula is an identity for f = sin / sqrt(N - 1)
                self.assertLess(abs(bundle.warped.margin), 1e-6 * (1 + N))
                self.assertAlmostEqual(bundle.space.diameter, math.pi)
                self.assertTrue(bundle.bonnet_myers.passed)

    def test_rotation_field_lowers_the_fiber_bound(self):
        bundle = warped.sphere_example(3.0, alpha=0.25, kappa=1.0, sample_n=100, rng=np.random.default_rng(3))
        self.assertTrue(bundle.verdict.passed, bundle.verdict.witnesses)
        self.assertLess(bundle.fiber_inf, 1.0)
        self.assertGreaterEqual(bundle.fiber_inf, 1.0 - 0.25**2 - 1e-9)
        self.assertAlmostEqual(bundle.verdict.extras["field_sup"], 0.25, places=6)

    def test_admissible_parameters(self):
        with self.assertRaises(ValueError):
            warped.sphere_example_spec(2.0, alpha=0.1)
        with self.assertRaises(ValueError):
            warped.sphere_example_spec(1.5)
        with self.assertRaises(ValueError):
            warped.sphere_example_spec(3.0, alpha=-0.1)
        with self.assertRaises(ValueError):
            warped.sphere_example_spec(3.0, alpha=2.0)
        with self.assertRaises(ValueError):
            warped.sphere_example_spec(5.0, alpha=0.75, kappa=1.0)

    def test_invariant_density(self):
        spec, _, _ = warped.sphere_example_spec(3.0)
        density = warped.invariant_density(spec)
        self.assertAlmostEqual(density(np.array([math.pi / 2, 1.0, 0.5])), 0.5 ** 1.5, places=9)


class WarpedProductTests(SimpleTestCase):
    def test_flat_cylinder(self):
        spec = flat_cylinder_spec()
        space, lifted = warped.build_warped(spec)
        self.assertTrue(lifted.is_zero)
        self.assertAlmostEqual(space.diameter, math.hypot(1.0, math.pi))
        self.assertEqual(space.weight_at(np.array([0.5, 1.0])), 1.0)
        verdict = warped.warped_ricci_check(spec, 0.0, K_F=0.0, sample_n=50, rng=np.random.default_rng(0))
        self.assertTrue(verdict.passed)
        self.assertAlmostEqual(verdict.margin, 0.0, places=9)

    def test_product_formula_matches_the_chart_ricci(self):
        spec, _, _ = warped.sphere_example_spec(3.0)
        space, _ = warped.build_warped(spec)
        x = np.array([1.0, 1.2, 0.4])
        w = np.array([0.0, 0.0, 1.0])
        w = w / space.norm(x, w)
        # with N = n_F the two readings coincide on zero drift
        spec2 = warped.WarpedSpec(
            base=spec.base, fiber=spec.fiber, f=spec.f, grad_f=spec.grad_f, hess_f=spec.hess_f,
            N=2.0, fiber_field=spec.fiber_field,
        )
        self.assertAlmostEqual(
            warped.product_bakry_emery(spec2, x, w[:1], w[1:]), space.ricci_form(x, w), places=9)

    def test_sign_changing_warp_is_degenerate(self):
        f, grad_f, hess_f = warped.sine_warp()
        spec = warped.WarpedSpec(
            base=geometry.interval(0.0, 2 * math.pi), fiber=geometry.sphere2(), f=f, grad_f=grad_f,
            hess_f=hess_f, N=3.0, fiber_field=fields.zero_field(2),
        )
        with self.assertRaises(DegenerateWarp):
            warped.build_warped(spec)

    def test_base_conditions_are_enforced(self):
        spec, _, _ = warped.sphere_example_spec(3.0)
        with self.assertRaises(ConditionViolated):
            warped.warped_ricci_check(spec, 2.0, K_F=0.5, sample_n=10, rng=np.random.default_rng(0))

    def test_unmet_fiber_hypothesis_is_vacuous(self):
        spec, _, _ = warped.sphere_example_spec(3.0)
        verdict = warped.warped_ricci_check(spec, 0.0, K_F=2.0, sample_n=10, rng=np.random.default_rng(0))
        self.assertTrue(verdict.passed)
        self.assertEqual(verdict.note, "hypothesis unmet")


class ConvexDomainTests(SimpleTestCase):
    def test_split_bound_for_the_ou_drift(self):
        space = geometry.interval(-2.0, 2.0)
        verdict = warped.convex_domain_check(space, fields.ou_drift(1.0), 2.0, n_points=41, n_dirs=1)
        self.assertTrue(verdict.passed)
        self.assertAlmostEqual(verdict.K, -1.0, places=9)
        self.assertEqual(verdict.N, 3.0)
        self.assertAlmostEqual(verdict.extras["small_drift_K"], -2.0, places=9)
