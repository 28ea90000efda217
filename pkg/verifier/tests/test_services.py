# verifier/tests/test_services.py
import copy
import math
import tempfile
from pathlib import Path
from unittest import mock

from django.test import SimpleTestCase, TestCase

from verifier import services
from verifier.exceptions import CheckFailure, NumericalAbort, ScenarioParseError
from verifier.models import CheckRecord, VerificationRun
from verifier.serializers import CheckRecordSerializer, parse_scenario

OU_SCENARIO = {
    "name": "ou-small",
    "seed": 4,
    "space": {"kind": "interval", "params": {"a": -4.0, "b": 4.0}},
    "field": {"family": "ou-drift", "params": {"rate": 1.0}},
    "measures": {
        "mu": {"shape": "bump", "center": [-1.0], "width": 1.0},
        "nu": {"shape": "bump", "center": [1.5], "width": 1.0},
    },
    "checks": [
        {"name": "cd-inf", "K": 1, "params": {"n_t": 5}},
        {"name": "bakry-emery-scan", "K": 1, "N": "inf", "params": {"n_points": 41, "n_dirs": 1}},
        {"name": "cd-inf", "K": 1.3, "expect": "fail", "params": {"n_t": 5}},
    ],
}


def scenario(**changes):
    data = copy.deepcopy(OU_SCENARIO)
    data.update(changes)
    return data


class ParseScenarioTests(SimpleTestCase):
    def test_defaults_and_infinite_dimension(self):
        parsed = parse_scenario(scenario())
        self.assertEqual(parsed["checks"][1]["N"], math.inf)
        self.assertEqual(parsed["checks"][0]["N"], math.inf)
        self.assertEqual(parsed["checks"][0]["expect"], "pass")
        self.assertIsNone(parsed["output"].get("csv_dir"))

    def test_invalid_scenarios(self):
        broken = [
            scenario(checks=[]),
            scenario(checks=[{"name": "no-such-check"}]),
            scenario(checks=[{"name": "cd", "K": 0, "N": 0.5}]),
            scenario(checks=[{"name": "cd-inf", "params": {"bogus": 1}}]),
            scenario(space={"kind": "hyperbolic-plane"}),
            scenario(field={"family": "vortex"}),
            scenario(measures={"mu": {"shape": "atoms"}}),
            scenario(measures={"mu": {"shape": "atoms", "points": [[0.0]], "weights": [0.5, 0.5]}}),
        ]
        for data in broken:
            with self.subTest(data=data["checks"][:1] or data):
                with self.assertRaises(ScenarioParseError):
                    parse_scenario(data)

    def test_finite_dimension_checks_refuse_infinity(self):
        with self.assertRaises(ScenarioParseError):
            services.build_context(scenario(checks=[{"name": "cd", "K": 0}]))

    def test_unknown_space_parameters(self):
        with self.assertRaises(ScenarioParseError):
            services.build_context(scenario(space={"kind": "interval", "params": {"c": 1.0}}))

    def test_warped_spaces_bring_their_own_field(self):
        data = scenario(space={"kind": "warped-sphere", "params": {"N": 3}}, measures={},
                        checks=[{"name": "warped-ricci", "K": 1}])
        with self.assertRaises(ScenarioParseError):
            services.build_context(data)

    def test_load_scenario_errors(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "broken.json"
            path.write_text("{not json", encoding="utf-8")
            with self.assertRaises(ScenarioParseError):
                services.load_scenario(path)
            path.write_text("[1, 2]", encoding="utf-8")
            with self.assertRaises(ScenarioParseError):
                services.load_scenario(path)


class RegistryTests(SimpleTestCase):
    def test_listing_is_sorted_and_anchored(self):
        definitions = services.list_checks()
        names = [d.name for d in definitions]
        self.assertEqual(names, sorted(names))
        listings = [d.listing for d in definitions]
        self.assertIn("cd-inf: Def 3.2 K-convex entropy", listings)
        self.assertIn("contraction: Cor 7.5 e^{−2Kt} envelope", listings)
        self.assertEqual(len(listings), 19)

    def test_schema_names_defaults(self):
        schema = services.CHECKS["contraction"].schema()
        self.assertIn("N (inf allowed)", schema)
        self.assertIn("m=256", schema)
        self.assertTrue(services.CHECKS["cd"].schema().startswith("K, N,"))


class ContextTests(SimpleTestCase):
    def test_params_are_merged_with_defaults(self):
        ctx, specs, output = services.build_context(scenario(), seed=9, tolerance_scale=2.0)
        self.assertEqual(ctx.seed, 9)
        self.assertEqual(ctx.tolerance_scale, 2.0)
        self.assertEqual(specs[0].params["n_t"], 5)
        self.assertEqual(specs[0].params["bins"], 16)
        self.assertEqual([s.index for s in specs], [0, 1, 2])
        self.assertFalse(specs[2].expect)
        self.assertAlmostEqual(ctx.measure("mu").total, 1.0)
        with self.assertRaises(ScenarioParseError):
            ctx.measure("rho")

    def test_missing_measure_surfaces_as_a_parse_error(self):
        ctx, specs, _ = services.build_context(scenario(checks=[{"name": "cd-inf", "params": {"nu": "rho"}}]))
        with self.assertRaises(ScenarioParseError):
            services.run_check(ctx, specs[0])

    def test_violated_warp_conditions_fail_the_check(self):
        data = scenario(space={"kind": "warped-sphere", "params": {"N": 3}}, field={"family": "zero"},
                        measures={}, checks=[{"name": "warped-ricci", "K": 2, "params": {"sample_n": 10}}])
        ctx, specs, _ = services.build_context(data)
        outcome = services.run_check(ctx, specs[0])
        self.assertFalse(outcome.verdict.passed)
        self.assertIn("condition (ii)", outcome.verdict.witnesses[0].tag)

    def test_runtime_value_errors_abort_the_check(self):
        data = scenario(checks=[{"name": "kuwada", "K": 1, "params": {"m": 32, "t": [0.1]}}])
        ctx, specs, _ = services.build_context(data)
        with mock.patch("verifier.semigroup.kuwada_speed_check", side_effect=ValueError("singular matrix")):
            with self.assertRaisesMessage(NumericalAbort, "kuwada: singular matrix"):
                services.run_check(ctx, specs[0])


class PipelineTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.ctx, cls.specs, _ = services.build_context(scenario())
        cls.outcomes = services.run_checks(cls.ctx, cls.specs, threads=1)
        cls.result = services.ScenarioResult(context=cls.ctx, outcomes=cls.outcomes)

    def test_expected_verdicts(self):
        self.assertEqual([o.key for o in self.outcomes], ["bakry-emery-scan-1", "cd-inf-0", "cd-inf-2"])
        self.assertTrue(all(o.ok for o in self.outcomes))
        self.assertTrue(self.result.passed)
        self.result.raise_for_unexpected()
        refuted = self.outcomes[2].verdict
        self.assertFalse(refuted.passed)
        self.assertLess(refuted.margin, -0.1)

    def test_threads_do_not_change_results(self):
        threaded = services.run_checks(self.ctx, self.specs, threads=3)
        self.assertEqual([o.key for o in threaded], [o.key for o in self.outcomes])
        self.assertEqual([o.verdict.margin for o in threaded], [o.verdict.margin for o in self.outcomes])

    def test_unexpected_verdicts_raise(self):
        flipped = services.CheckSpec(name="cd-inf", K=1.3, N=math.inf, params=self.specs[2].params, index=2)
        result = services.ScenarioResult(context=self.ctx, outcomes=[services.run_check(self.ctx, flipped)])
        self.assertFalse(result.passed)
        with self.assertRaisesMessage(CheckFailure, "cd-inf-2"):
            result.raise_for_unexpected()

    def test_csv_curves_are_byte_identical_across_runs(self):
        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            first = services.write_curves(self.result, a)
            again = services.ScenarioResult(context=self.ctx, outcomes=services.run_checks(self.ctx, self.specs, 2))
            second = services.write_curves(again, b)
            self.assertEqual([p.name for p in first], ["bakry-emery-scan-1.csv", "cd-inf-0.csv", "cd-inf-2.csv"])
            for p, q in zip(first, second):
                self.assertEqual(p.read_bytes(), q.read_bytes())
            header = first[1].read_text(encoding="utf-8").splitlines()[0]
            self.assertEqual(header, "t,value,bound,margin")

    def test_report_lines(self):
        lines = services.report_lines(self.result)
        self.assertIn("note:", lines[1])
        self.assertTrue(any(line.startswith("[PASS] cd-inf: Def 3.2 K-convex entropy") for line in lines))
        self.assertTrue(any(line.startswith("[FAIL] cd-inf:") for line in lines))
        self.assertTrue(any(line.lstrip().startswith("witness") for line in lines))
        self.assertEqual(lines[-1], "verdict: all checks as expected")

    def test_records_render_infinity(self):
        record = services.to_record(self.outcomes[0])
        self.assertIsNone(record.N)
        data = CheckRecordSerializer(record).data
        self.assertEqual(data["N"], "inf")
        self.assertEqual(data["status"], "ok")
        self.assertEqual(data["anchor"], "bakry-emery-scan: Thm 4.2 ric^N >= K lower-bound scan")

    def test_json_report(self):
        report = services.json_report(self.result)
        self.assertTrue(report["passed"])
        self.assertEqual(len(report["checks"]), 3)
        self.assertEqual(report["checks"][2]["status"], "ok")


class SaveResultTests(TestCase):
    def test_run_and_records_are_stored(self):
        ctx, specs, _ = services.build_context(scenario(checks=OU_SCENARIO["checks"][1:2]))
        result = services.ScenarioResult(context=ctx, outcomes=services.run_checks(ctx, specs))
        run = services.save_result(result)
        self.assertEqual(VerificationRun.objects.count(), 1)
        self.assertTrue(run.passed)
        self.assertEqual(run.seed, 4)
        record = CheckRecord.objects.get(run=run)
        self.assertEqual(record.name, "bakry-emery-scan")
        self.assertIsNone(record.N)
        self.assertEqual(list(run.checks.all()), [record])
