import json
from io import StringIO

import yaml
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from simulations.management.commands._shared import CONFIG_EXIT_CODE, RUNTIME_EXIT_CODE
from simulations.models import ScenarioRun
from simulations.services import file_hash
from simulations.tests.base import SCENARIO_DIR, TemporaryDirectoryMixin, small_scenario


class CommandTestCase(TemporaryDirectoryMixin, TestCase):
    def write_scenario(self, document, name="scenario.yaml"):
        path = self.make_temp_dir() / name
        path.write_text(yaml.safe_dump(document))
        return path

    def call(self, *args, **options):
        out = StringIO()
        call_command(*args, stdout=out, stderr=StringIO(), **options)
        return out.getvalue()


class ValidateScenarioCommandTests(CommandTestCase):
    def test_bundled_scenario(self):
        output = self.call("validate_scenario", str(SCENARIO_DIR / "he_double_barrier.yaml"))
        self.assertIn("he_double_barrier: valid", output)
        resolved = json.loads(output[: output.rindex("}") + 1])
        self.assertEqual(resolved["collision"]["k_final"], -0.69)

    def test_quiet_output(self):
        output = self.call("validate_scenario", str(SCENARIO_DIR / "free_spreading.yaml"), verbosity=0)
        self.assertEqual(output.strip(), "free_spreading: valid")

    def test_invalid_scenario_exits_with_config_code(self):
        path = self.write_scenario(small_scenario({"mode": "he", "t_s": 60.0}))
        with self.assertRaises(CommandError) as caught:
            self.call("validate_scenario", str(path))
        self.assertEqual(caught.exception.returncode, CONFIG_EXIT_CODE)
        self.assertIn("collision.t_s: 60.0 fs is after evolution.t_end (40.0 fs)", str(caught.exception))

    def test_override(self):
        path = self.write_scenario(small_scenario({"mode": "he", "t_s": 60.0}))
        output = self.call("validate_scenario", str(path), "--override", "collision.t_s=20", verbosity=0)
        self.assertIn("valid", output)

    def test_missing_file(self):
        with self.assertRaises(CommandError) as caught:
            self.call("validate_scenario", "/nonexistent/scenario.yaml")
        self.assertEqual(caught.exception.returncode, CONFIG_EXIT_CODE)


class RunScenarioCommandTests(CommandTestCase):
    def test_run_writes_outputs(self):
        path = self.write_scenario(small_scenario({"mode": "gs", "t_s": 10.0}))
        out_dir = self.make_temp_dir() / "run"
        output = self.call("run_scenario", str(path), "--out", str(out_dir), "--snapshots", "0,40", verbosity=0)
        self.assertIn(f"small_double_barrier: 2 snapshots in {out_dir}", output)
        self.assertIn('"negative": 0.0', output)
        self.assertEqual(file_hash.verify_manifest(out_dir), [])
        self.assertFalse(ScenarioRun.objects.exists())

    def test_save_stores_the_run(self):
        path = self.write_scenario(small_scenario())
        out_dir = self.make_temp_dir()
        output = self.call("run_scenario", str(path), "--out", str(out_dir), "--save", verbosity=0)
        run = ScenarioRun.objects.get()
        self.assertIn(f"Saved run {run.id}", output)
        self.assertEqual(run.snapshot_count, 3)
        self.assertEqual(run.artifacts.count(), 10)

    def test_invalid_override_exits_with_config_code(self):
        path = self.write_scenario(small_scenario())
        with self.assertRaises(CommandError) as caught:
            self.call("run_scenario", str(path), "--override", "evolution.dt=-1", verbosity=0)
        self.assertEqual(caught.exception.returncode, CONFIG_EXIT_CODE)

    def test_bad_snapshot_list(self):
        path = self.write_scenario(small_scenario())
        with self.assertRaises(CommandError) as caught:
            self.call("run_scenario", str(path), "--snapshots", "0,later", verbosity=0)
        self.assertEqual(caught.exception.returncode, CONFIG_EXIT_CODE)

    def test_unwritable_output_exits_with_runtime_code(self):
        path = self.write_scenario(small_scenario())
        blocker = self.make_temp_dir() / "not_a_directory"
        blocker.write_text("")
        with self.assertRaises(CommandError) as caught:
            self.call("run_scenario", str(path), "--out", str(blocker), verbosity=0)
        self.assertEqual(caught.exception.returncode, RUNTIME_EXIT_CODE)
        self.assertIn("FileExistsError", str(caught.exception))


class CompareRunsCommandTests(CommandTestCase):
    def test_compare_two_runs(self):
        directories = []
        for collision in ({"mode": "gs", "t_s": 10.0}, {"mode": "he", "t_s": 10.0, "safety_floor": 1e-6}):
            path = self.write_scenario(small_scenario(collision))
            directory = self.make_temp_dir()
            self.call("run_scenario", str(path), "--out", str(directory), verbosity=0)
            directories.append(str(directory))

        output = self.call("compare_runs", *directories, verbosity=0)
        self.assertIn("small_double_barrier (gs)", output)
        self.assertIn("small_double_barrier (he)", output)
        self.assertIn("negative", output.splitlines()[0])

        output = self.call("compare_runs", *directories, "--field", "negativity", verbosity=0)
        self.assertIn("time_fs", output)
        self.assertIn("40.0", output)

    def test_single_manifest_is_a_config_error(self):
        directory = self.make_temp_dir()
        file_hash.write_manifest(directory, {"scenario": "only"})
        with self.assertRaises(CommandError) as caught:
            self.call("compare_runs", str(directory), verbosity=0)
        self.assertEqual(caught.exception.returncode, CONFIG_EXIT_CODE)

    def test_missing_manifest_is_a_runtime_error(self):
        with self.assertRaises(CommandError) as caught:
            self.call("compare_runs", str(self.make_temp_dir()), str(self.make_temp_dir()), verbosity=0)
        self.assertEqual(caught.exception.returncode, RUNTIME_EXIT_CODE)
