from django.core.management.base import BaseCommand

from simulations.exceptions import SimulationError
from simulations.management.commands._shared import apply_verbosity, command_error
from simulations.services.file_hash import read_manifest_file
from simulations.services.run_comparison import COMPARISON_FIELDS, compare_manifests


class Command(BaseCommand):
    help = "Tabulate two or more runs side by side from their manifests."

    def add_arguments(self, parser):
        parser.add_argument("manifests", nargs="+", help="manifest.json files or run directories")
        parser.add_argument("--field", choices=COMPARISON_FIELDS, default="decomposition")

    def handle(self, *args, **options):
        apply_verbosity(options["verbosity"])
        try:
            manifests = [read_manifest_file(path) for path in options["manifests"]]
            frame = compare_manifests(manifests, options["field"])
        except SimulationError as exc:
            raise command_error(exc) from exc
        self.stdout.write(frame.to_string(float_format=lambda value: f"{value:.6f}"))
