import importlib
import os
from unittest import mock

from django.test import SimpleTestCase

from simulations.utils import artifact_kind, calculate_config_hash
from transport_lab import settings as project_settings


class ConfigHashTests(SimpleTestCase):
    def test_key_order_does_not_matter(self):
        a = {"grid": {"x_min": 0.0, "x_max": 600.0}, "name": "run"}
        b = {"name": "run", "grid": {"x_max": 600.0, "x_min": 0.0}}
        self.assertEqual(calculate_config_hash(a), calculate_config_hash(b))
        self.assertEqual(len(calculate_config_hash(a)), 64)

    def test_values_matter(self):
        self.assertNotEqual(calculate_config_hash({"dt": 3.0}), calculate_config_hash({"dt": 1.5}))


class ArtifactKindTests(SimpleTestCase):
    def test_kinds(self):
        self.assertEqual(artifact_kind("snap00_charge.tsv"), "charge")
        self.assertEqual(artifact_kind("snap01_wigner.txt"), "wigner")
        self.assertEqual(artifact_kind("snap01_wigner.bin"), "wigner")
        self.assertEqual(artifact_kind("snap02_negativity.json"), "negativity")
        self.assertEqual(artifact_kind("norm_decomposition.tsv"), "table")
        self.assertEqual(artifact_kind("notes/readme.md"), "other")


class HealthTests(SimpleTestCase):
    def test_health(self):
        response = self.client.get("/healthz/")
        self.assertEqual(response.status_code, 200)
        payload = response.json()
        self.assertEqual(payload["status"], "ok")
        self.assertAlmostEqual(payload["kinetic_prefactor_ev_nm2"], 0.0381, delta=1e-4)


class SimulationSettingsTests(SimpleTestCase):
    def test_environment_does_not_reach_simulation_settings(self):
        environment = {"TRANSPORT_LAB_RUNS_ROOT": "/elsewhere", "SIMULATIONS_LOG_LEVEL": "DEBUG"}
        with mock.patch.dict(os.environ, environment):
            module = importlib.reload(project_settings)
        self.addCleanup(importlib.reload, project_settings)
        self.assertEqual(module.RUNS_ROOT, module.BASE_DIR / "runs")
        self.assertEqual(module.LOGGING["loggers"]["simulations"]["level"], "INFO")
