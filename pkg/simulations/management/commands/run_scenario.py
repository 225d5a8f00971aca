import json

from django.core.management.base import BaseCommand

from simulations.exceptions import SimulationError
from simulations.management.commands._shared import apply_verbosity, command_error
from simulations.services.scenario_config import load_scenario, parse_snapshot_list
from simulations.services.scenario_runner import ScenarioRun
from simulations.utils import save_scenario_run


class Command(BaseCommand):
    help = "Evolve, collide and evolve a scenario, writing snapshots and a manifest."

    def add_arguments(self, parser):
        parser.add_argument("config", help="Scenario YAML file")
        parser.add_argument("--out", dest="output_directory", help="Output directory (default: runs/<name>)")
        parser.add_argument("--snapshots", help="Comma-separated snapshot times in fs; replaces evolution.snapshot_times")
        parser.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY.PATH=VALUE",
            help="Edit the scenario before validation; may be repeated",
        )
        parser.add_argument("--save", action="store_true", help="Store the run in the database")

    def handle(self, *args, **options):
        verbosity = options["verbosity"]
        apply_verbosity(verbosity)
        try:
            snapshots = parse_snapshot_list(options["snapshots"]) if options["snapshots"] else None
            config = load_scenario(options["config"], options["override"], snapshots)
            pipeline = ScenarioRun(config, output_directory=options["output_directory"], progress=verbosity >= 2)
            manifest = pipeline.run()
        except (SimulationError, OSError) as exc:
            raise command_error(exc) from exc

        if options["save"]:
            run = save_scenario_run(config, manifest, pipeline.directory)
            self.stdout.write(f"Saved run {run.id}")

        decomposition = manifest.final_decomposition
        self.stdout.write(
            self.style.SUCCESS(
                f"{config.name}: {len(manifest.snapshots)} snapshots in {pipeline.directory}"
            )
        )
        self.stdout.write(json.dumps(decomposition, sort_keys=True))
        calibration = manifest.collision.get("calibration")
        if calibration and not calibration["reachable"]:
            self.stdout.write(
                self.style.WARNING(
                    "target negative norm {target} not reachable; achievable range {range}".format(
                        target=calibration["target_negative_norm"], range=calibration["achievable_range"]
                    )
                )
            )
