# verifier/tests/test_transport.py
import math

import numpy as np
from django.test import SimpleTestCase

from verifier import entropy, fields, geometry, transport
from verifier.exceptions import NonMapPlan, SizeExceeded


def cells(edges, weights=None):
    edges = np.asarray(edges, dtype=float)
    if weights is None:
        weights = np.full(len(edges) - 1, 1.0 / (len(edges) - 1))
    return entropy.cell_measure(edges, weights)


class QuantileCouplingTests(SimpleTestCase):
    def test_translated_uniforms_on_an_interval(self):
        space = geometry.interval(0.0, 4.0)
        mu, nu = cells(np.linspace(0, 1, 9)), cells(np.linspace(2, 3, 5))
        plan = transport.ot_1d(mu, nu, space)
        self.assertAlmostEqual(plan.w2, 2.0, places=12)
        a, b = plan.marginals()
        np.testing.assert_allclose(a, mu.weights, atol=1e-12)
        np.testing.assert_allclose(b, nu.weights, atol=1e-12)

    def test_quantile_function_of_atoms_is_flat(self):
        q = transport.quantile_function(entropy.atoms([[2.0], [1.0]], [0.5, 0.5]))
        self.assertEqual(float(q(0.25)), 1.0)
        self.assertEqual(float(q(0.75)), 2.0)

    def test_circle_picks_the_short_way_round(self):
        circle = geometry.circle(2 * math.pi)
        mu = cells([1.0, 1.2, 1.4])
        nu = cells([1.5, 1.7, 1.9])
        self.assertAlmostEqual(transport.w2_1d(mu, nu, circle), 0.5, places=6)
        wrapped = cells([2 * math.pi - 0.3, 2 * math.pi - 0.1])
        self.assertAlmostEqual(transport.w2_1d(cells([0.1, 0.3]), wrapped, circle), 0.4, places=6)

    def test_pushforward_is_a_translate(self):
        space = geometry.interval(0.0, 4.0)
        plan = transport.ot_1d(cells([0.0, 1.0]), cells([2.0, 3.0]), space)
        mid = transport.pushforward_density_1d(plan, 0.5)
        self.assertAlmostEqual(mid.edges[0], 1.0)
        self.assertAlmostEqual(mid.edges[-1], 2.0)
        self.assertAlmostEqual(mid.total, 1.0)


class ExactTransportTests(SimpleTestCase):
    def test_network_simplex_on_atoms(self):
        space = geometry.interval(0.0, 4.0)
        mu = entropy.atoms([[0.0], [1.0]], [0.5, 0.5])
        nu = entropy.atoms([[2.0], [3.0]], [0.5, 0.5])
        plan = transport.ot_exact(mu, nu, space)
        self.assertAlmostEqual(plan.cost, 4.0)
        self.assertTrue(plan.is_map())

    def test_size_cap(self):
        space = geometry.interval(0.0, 1.0)
        big = entropy.atoms(np.linspace(0, 1, 401)[:, None], np.full(401, 1 / 401))
        with self.assertRaises(SizeExceeded):
            transport.ot_exact(big, big, space)

    def test_birkhoff_splits_a_branching_plan(self):
        space = geometry.interval(0.0, 4.0)
        mu = entropy.atoms([[1.0]], [1.0])
        nu = entropy.atoms([[0.0], [2.0]], [0.5, 0.5])
        plan = transport.ot_exact(mu, nu, space)
        self.assertFalse(plan.is_map())
        subplans = transport.birkhoff_decompose(plan)
        self.assertEqual(len(subplans), 2)
        with self.assertRaises(NonMapPlan):
            transport.birkhoff_decompose(plan, cap=1)


class DisplacementPathTests(SimpleTestCase):
    def test_exact_path_of_a_translation_keeps_the_entropy(self):
        space = geometry.interval(0.0, 4.0)
        mu, nu = cells(np.linspace(0, 1, 9)), cells(np.linspace(2, 3, 9))
        ref = entropy.lebesgue_reference(transport.default_grid(space, 64))
        dyn, path = transport.displacement_path(transport.ot_1d(mu, nu, space), space, 5, ref=ref)
        self.assertEqual(path.mode, "exact")
        self.assertTrue(path.ac.all())
        for t in path.t_grid:
            self.assertAlmostEqual(entropy.ent_along(dyn, path, ref, t), 0.0, places=9)
        self.assertAlmostEqual(dyn.w2_squared, 4.0, places=9)

    def test_binned_path_on_the_sphere(self):
        sphere = geometry.sphere2()
        mu = entropy.atoms([[1.0, 0.5], [1.2, 0.7]], [0.5, 0.5])
        nu = entropy.atoms([[2.0, 1.5], [2.1, 1.9]], [0.5, 0.5])
        plan = transport.ot_exact(mu, nu, sphere)
        dyn, path = transport.displacement_path(plan, sphere, 3, bins=8)
        self.assertEqual(path.mode, "binned")
        for slice_ in path.slices:
            self.assertAlmostEqual(slice_.total, 1.0)

    def test_needs_two_times(self):
        space = geometry.interval(0.0, 1.0)
        plan = transport.ot_1d(cells([0.0, 1.0]), cells([0.0, 1.0]), space)
        with self.assertRaises(ValueError):
            transport.displacement_path(plan, space, 1)

    def test_weighted_renyi_along_a_translation_under_a_constant_drift(self):
        space = geometry.interval(0.0, 4.0)
        mu, nu = cells(np.linspace(0, 1, 9)), cells(np.linspace(2, 3, 9))
        ref = entropy.lebesgue_reference(transport.default_grid(space, 64))
        dyn, path = transport.displacement_path(transport.ot_1d(mu, nu, space), space, 5, ref=ref)
        drift = fields.constant_drift(0.5)
        self.assertAlmostEqual(
            entropy.weighted_renyi(dyn, drift, 3.0, 0.0), entropy.renyi_along(dyn, path, ref, 3.0, 0.0))
        self.assertAlmostEqual(entropy.weighted_renyi(dyn, drift, 3.0, 1.0), -math.exp(1.0 / 3.0), places=8)
        self.assertAlmostEqual(entropy.weighted_renyi(dyn, drift, 3.0, 0.5, path), -math.exp(0.5 / 3.0), places=8)


class DualityTests(SimpleTestCase):
    def test_hopf_lax_of_a_parabola(self):
        space = geometry.interval(-2.0, 2.0)
        xs = np.linspace(-2.0, 2.0, 801)
        phi = transport.GridFunction(xs[:, None], xs**2)
        q = transport.hopf_lax(phi, 1.0, space)
        self.assertAlmostEqual(float(q(np.array([1.0]))[0]), 1.0 / 3.0, delta=1e-3)

    def test_dual_value_matches_w2(self):
        space = geometry.interval(0.0, 4.0)
        mu = entropy.from_density(np.linspace(0.0, 1.5, 33), lambda x: 1.0 + x)
        nu = cells(np.linspace(2.0, 3.0, 17))
        phi = transport.kantorovich_potential_1d(mu, nu, step=1e-3)
        w2 = transport.ot_1d(mu, nu, space).cost
        self.assertAlmostEqual(transport.duality_value(phi, mu, nu), w2, delta=1e-3 * (1 + w2))

    def test_hopf_lax_semigroup_on_a_grid(self):
        space = geometry.interval(-2.0, 2.0)
        xs = np.linspace(-2.0, 2.0, 201)
        h = xs[1] - xs[0]
        rng = np.random.default_rng(8)
        for _ in range(5):
            phi = transport.GridFunction(xs[:, None], rng.normal(size=len(xs)))
            s, t = rng.uniform(0.1, 1.0, size=2)
            once = transport.hopf_lax(phi, s + t, space).values
            twice = transport.hopf_lax(transport.hopf_lax(phi, t, space), s, space).values
            # the intermediate point is snapped to the grid
            self.assertTrue(np.all(twice >= once - 1e-12))
            self.assertTrue(np.all(twice - once <= (1 / s + 1 / t) * h**2 / 8 + 1e-12))


class MetricTests(SimpleTestCase):
    def test_w2_triangle_inequality(self):
        space = geometry.interval(0.0, 4.0)
        rng = np.random.default_rng(3)

        def random_measure():
            edges = np.sort(rng.uniform(0.0, 4.0, size=7))
            return cells(edges, rng.dirichlet(np.ones(6)))

        for _ in range(30):
            a, b, c = random_measure(), random_measure(), random_measure()
            self.assertLessEqual(
                transport.w2_1d(a, c, space),
                transport.w2_1d(a, b, space) + transport.w2_1d(b, c, space) + 1e-9,
            )

    def test_w2_vanishes_on_the_diagonal(self):
        space = geometry.interval(0.0, 4.0)
        mu = cells([0.5, 1.0, 2.5], [0.3, 0.7])
        self.assertAlmostEqual(transport.w2_1d(mu, mu, space), 0.0, places=9)
