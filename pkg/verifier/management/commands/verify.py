# verifier/management/commands/verify.py

import json
import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from verifier.exceptions import CheckFailure, NumericalAbort, ScenarioParseError
from verifier.services import json_report, report_lines, run_scenario

EXIT_FAILURE = 1
EXIT_PARSE = 2
EXIT_NUMERICAL = 3

VERBOSITY_LEVELS = {0: logging.ERROR, 1: logging.WARNING, 2: logging.INFO, 3: logging.DEBUG}


class Command(BaseCommand):
    help = "Run the checks of a scenario file and report verdicts, margins and witnesses"

    def add_arguments(self, parser):
        parser.add_argument(
            'scenario',
            type=Path,
            help='Path to the scenario JSON file'
        )
        parser.add_argument('--tolerance-scale', type=float, default=None,
                            help='Multiply every pass tolerance by this factor')
        parser.add_argument('--threads', type=int, default=None,
                            help='Number of checks run in parallel')
        parser.add_argument('--csv-dir', type=Path, default=None,
                            help='Directory for the t,value,bound,margin curve files')
        parser.add_argument('--seed', type=int, default=None,
                            help='Base seed; check i draws from seed + i')
        parser.add_argument('--save', action='store_true',
                            help='Store the run and its check records in the database')
        parser.add_argument('--json-report', type=Path, default=None,
                            help='Also write the report as JSON')

    def handle(self, *args, **options):
        scenario: Path = options['scenario']
        logging.getLogger("verifier").setLevel(VERBOSITY_LEVELS.get(options['verbosity'], logging.DEBUG))

        if not scenario.exists():
            raise CommandError(f"Scenario not found: {scenario}", returncode=EXIT_PARSE)
        if options['seed'] is not None and options['seed'] < 0:
            raise CommandError("--seed must be a nonnegative integer", returncode=EXIT_PARSE)

        try:
            result = run_scenario(
                scenario,
                threads=options['threads'],
                seed=options['seed'],
                tolerance_scale=options['tolerance_scale'],
                csv_dir=options['csv_dir'],
                save=options['save'],
            )
        except ScenarioParseError as exc:
            raise CommandError(f"Parse error: {exc}", returncode=EXIT_PARSE)
        except NumericalAbort as exc:
            raise CommandError(f"Numerical abort: {exc}", returncode=EXIT_NUMERICAL)

        for line in report_lines(result):
            if line.startswith("[PASS]"):
                self.stdout.write(self.style.SUCCESS(line))
            elif line.startswith("[FAIL]"):
                self.stdout.write(self.style.WARNING(line))
            else:
                self.stdout.write(line)

        for path in result.csv_paths:
            self.stdout.write(f"wrote {path}")
        if options['json_report']:
            options['json_report'].write_text(json.dumps(json_report(result), indent=2) + "\n", encoding="utf-8")
            self.stdout.write(f"wrote {options['json_report']}")
        if result.run is not None:
            self.stdout.write(self.style.SUCCESS(f"Saved run #{result.run.pk}"))

        try:
            result.raise_for_unexpected()
        except CheckFailure as exc:
            raise CommandError(str(exc), returncode=EXIT_FAILURE)
        self.stdout.write(self.style.SUCCESS(f"✅ {len(result.outcomes)} checks as expected"))
