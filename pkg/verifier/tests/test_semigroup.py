# verifier/tests/test_semigroup.py
import math
from types import SimpleNamespace

import numpy as np
from django.test import SimpleTestCase

from verifier import entropy, fields, geometry, semigroup
from verifier.semigroup import FlowState

TWO_PI = 2 * math.pi


def uniform(a, b, cells=8):
    edges = np.linspace(a, b, cells + 1)
    return entropy.cell_measure(edges, np.full(cells, 1.0 / cells))


class GeneratorTests(SimpleTestCase):
    def test_rows_sum_to_zero_with_nonnegative_links(self):
        gen = semigroup.build_generator(geometry.interval(-4, 4), fields.ou_drift(1.0), 64)
        np.testing.assert_allclose(gen.L.sum(axis=1), 0.0, atol=1e-9)
        off = gen.L - np.diag(np.diag(gen.L))
        self.assertGreaterEqual(off.min(), 0.0)
        np.testing.assert_allclose(gen.Lstar, gen.L.T)

    def test_arguments(self):
        with self.assertRaises(ValueError):
            semigroup.build_generator(geometry.sphere2(), fields.zero_field(2), 32)
        with self.assertRaises(ValueError):
            semigroup.build_generator(geometry.interval(0, 1), fields.zero_field(1), 8)
        with self.assertRaises(ValueError):
            semigroup.build_generator(geometry.interval(0, 1), fields.zero_field(1), 32, scheme="spectral")
        with self.assertRaises(ValueError):
            semigroup.build_generator(geometry.interval(0, 1, weight=lambda x: 1.0), fields.zero_field(1), 32)
        with self.assertRaises(ValueError):
            semigroup.build_generator(geometry.interval(0, 1), fields.constant_drift(100.0), 16, scheme="central")

    def test_circle_drift_keeps_the_uniform_density(self):
        gen = semigroup.build_generator(geometry.circle(TWO_PI), fields.constant_drift(1.0), 32)
        np.testing.assert_allclose(gen.L.sum(axis=1), 0.0, atol=1e-9)
        np.testing.assert_allclose(semigroup.stationary_density(gen), 1.0 / 32, atol=1e-12)

    def test_ou_stationary_density_is_gaussian(self):
        gen = semigroup.build_generator(geometry.interval(-4, 4), fields.ou_drift(1.0), 128)
        p = semigroup.stationary_density(gen)
        gauss = np.exp(-gen.nodes**2 / 2)
        np.testing.assert_allclose(p, gauss / gauss.sum(), atol=2e-3)

    def test_dirichlet_form_of_the_heat_generator(self):
        gen = semigroup.build_generator(geometry.circle(TWO_PI), fields.zero_field(1), 64)
        u, v = np.sin(gen.nodes), np.cos(2 * gen.nodes)
        self.assertGreater(semigroup.dirichlet_form(gen, u, u), 0.0)
        self.assertAlmostEqual(semigroup.dirichlet_form(gen, u, v), semigroup.dirichlet_form(gen, v, u), places=10)
        self.assertAlmostEqual(semigroup.dirichlet_form(gen, np.ones(64), u), 0.0, places=10)


class EvolveTests(SimpleTestCase):
    def setUp(self):
        self.gen = semigroup.build_generator(geometry.interval(-4, 4), fields.ou_drift(1.0), 64)
        self.state = self.gen.state_from(uniform(-1.0, 0.0))

    def test_dual_flow_keeps_mass(self):
        out = semigroup.evolve(self.gen, self.state, 0.5)
        self.assertAlmostEqual(out.density.sum(), 1.0, places=10)
        self.assertGreaterEqual(out.density.min(), 0.0)
        self.assertEqual(out.t, 0.5)

    def test_zero_time_is_the_identity(self):
        out = semigroup.evolve(self.gen, self.state, 0.0)
        np.testing.assert_array_equal(out.density, self.state.density)

    def test_primal_flow_fixes_constants(self):
        out = semigroup.evolve(self.gen, FlowState(0.0, function=np.ones(64)), 0.3, dual=False)
        np.testing.assert_allclose(out.function, 1.0, atol=1e-10)

    def test_arguments(self):
        with self.assertRaises(ValueError):
            semigroup.evolve(self.gen, self.state, -1.0)
        with self.assertRaises(ValueError):
            semigroup.evolve(self.gen, self.state, 0.1, dual=False)

    def test_split_halves_the_masses(self):
        fine = self.state.split()
        self.assertEqual(len(fine.density), 128)
        self.assertAlmostEqual(fine.density.sum(), 1.0)
        np.testing.assert_allclose(self.gen.refined().masses_of(uniform(-1.0, 0.0)), fine.density, atol=1e-12)


class FlowEstimateTests(SimpleTestCase):
    def test_constant_drift_on_a_circle_does_not_contract(self):
        gen = semigroup.build_generator(geometry.circle(TWO_PI), fields.constant_drift(1.0), 64)
        verdict = semigroup.contraction_check(gen, uniform(1.0, 2.0), uniform(3.5, 4.5), 0.1, [0.1, 0.5])
        self.assertFalse(verdict.passed)
        self.assertEqual(verdict.condition, "Contraction")
        self.assertLess(verdict.margin, 0.0)

    def test_gradient_estimate_on_the_flat_circle(self):
        gen = semigroup.build_generator(geometry.circle(TWO_PI), fields.zero_field(1), 128)
        f = np.sin(gen.nodes)
        self.assertTrue(semigroup.gradient_estimate_check(gen, f, 0.0, [0.1, 0.5, 1.0]).passed)
        refuted = semigroup.gradient_estimate_check(gen, f, 1.0, [0.5])
        self.assertFalse(refuted.passed)
        self.assertIn("e^{-2Kt}", refuted.note)

    def test_gradient_estimate_needs_one_value_per_cell(self):
        gen = semigroup.build_generator(geometry.circle(TWO_PI), fields.zero_field(1), 32)
        with self.assertRaises(ValueError):
            semigroup.gradient_estimate_check(gen, np.zeros(31), 0.0, [0.1])

    def test_stationary_measure_has_zero_speed(self):
        gen = semigroup.build_generator(geometry.circle(TWO_PI), fields.zero_field(1), 32)
        verdict = semigroup.kuwada_speed_check(gen, uniform(0.0, TWO_PI, cells=32), [0.1], richardson=False)
        self.assertTrue(verdict.passed)
        self.assertAlmostEqual(verdict.witnesses[0].lhs, 0.0, places=8)

    def test_heat_flow_evi_on_the_flat_circle(self):
        gen = semigroup.build_generator(geometry.circle(TWO_PI), fields.zero_field(1), 64)
        verdict = semigroup.evi_check(gen, uniform(1.0, 2.0), uniform(3.0, 4.0), 0.0, [0.5, 0.6], richardson=False)
        self.assertTrue(verdict.passed, verdict.witnesses)
        self.assertIn("plus_reading_margins", verdict.extras)

    def test_kuwada_tolerates_empty_cells(self):
        gen = semigroup.build_generator(geometry.interval(-4, 4), fields.zero_field(1), 256)
        mu = entropy.cell_measure([-4.0, -3.95], [1.0])
        verdict = semigroup.kuwada_speed_check(gen, mu, [1e-4], richardson=False)
        self.assertTrue(math.isfinite(verdict.margin))
        self.assertTrue(math.isfinite(verdict.witnesses[0].rhs))


class LogDensityGradientTests(SimpleTestCase):
    def test_one_sided_at_the_edge_of_the_support(self):
        g = SimpleNamespace(h=1.0, periodic=False)
        grad = semigroup._log_density_gradient(g, np.array([0.0, 0.0, 0.2, 0.3, 0.5, 0.0]))
        expected = [0.0, 0.0, math.log(1.5), 0.5 * math.log(2.5), math.log(0.5 / 0.3), 0.0]
        np.testing.assert_allclose(grad, expected, atol=1e-12)

    def test_periodic_grid_wraps_around(self):
        g = SimpleNamespace(h=0.5, periodic=True)
        p = np.array([0.1, 0.2, 0.3, 0.4])
        grad = semigroup._log_density_gradient(g, p)
        log_rho = np.log(p / 0.5)
        np.testing.assert_allclose(grad, (np.roll(log_rho, -1) - np.roll(log_rho, 1)) / 1.0, atol=1e-12)


class OrnsteinUhlenbeckFlowTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.space = geometry.interval(-4, 4)
        cls.ou = fields.ou_drift(1.0)
        cls.mu = uniform(-1.0, 0.0, cells=16)
        cls.nu = uniform(0.5, 1.5, cells=16)

    def test_richardson_slack_shrinks_with_the_grid(self):
        slacks = []
        for m in (64, 128):
            gen = semigroup.build_generator(self.space, self.ou, m)
            verdict = semigroup.contraction_check(gen, self.mu, self.nu, 1.0, [0.2, 0.5])
            slacks.append(max(verdict.extras["slack"]))
        self.assertGreater(slacks[0], 0.0)
        self.assertLess(slacks[1], 0.75 * slacks[0])

    def test_translates_contract_at_rate_one_and_no_faster(self):
        gen = semigroup.build_generator(self.space, self.ou, 256)
        self.assertTrue(semigroup.contraction_check(gen, self.mu, self.nu, 1.0, [0.2, 0.5]).passed)
        refuted = semigroup.contraction_check(gen, self.mu, self.nu, 1.3, [0.2, 0.5])
        self.assertFalse(refuted.passed)
        self.assertLess(refuted.margin, -0.1)
