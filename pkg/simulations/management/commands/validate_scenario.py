import json

from django.core.management.base import BaseCommand

from simulations.exceptions import SimulationError
from simulations.management.commands._shared import apply_verbosity, command_error
from simulations.services.scenario_config import load_scenario


class Command(BaseCommand):
    help = "Check a scenario file and print it with every default resolved."

    def add_arguments(self, parser):
        parser.add_argument("config", help="Scenario YAML file")
        parser.add_argument("--override", action="append", default=[], metavar="KEY.PATH=VALUE")

    def handle(self, *args, **options):
        apply_verbosity(options["verbosity"])
        try:
            config = load_scenario(options["config"], options["override"])
        except SimulationError as exc:
            raise command_error(exc) from exc
        if options["verbosity"] >= 1:
            self.stdout.write(json.dumps(config.resolved(), indent=2, sort_keys=True))
        self.stdout.write(self.style.SUCCESS(f"{config.name}: valid"))
