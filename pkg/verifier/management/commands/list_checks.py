# verifier/management/commands/list_checks.py

from django.core.management.base import BaseCommand

from verifier.services import list_checks


class Command(BaseCommand):
    help = "List every check with the statement it is anchored to and its parameters"

    def handle(self, *args, **options):
        for definition in list_checks():
            self.stdout.write(definition.listing)
            self.stdout.write(f"    params: {definition.schema()}")
