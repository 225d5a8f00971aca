# Generated by Django 5.2.8 on 2026-10-19 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ScenarioRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("name", models.CharField(db_index=True, max_length=255)),
                (
                    "collision_mode",
                    models.CharField(
                        choices=[
                            ("none", "None"),
                            ("he", "H.E."),
                            ("he_kernel", "H.E. kernel"),
                            ("gs", "G.S."),
                        ],
                        db_index=True,
                        max_length=16,
                    ),
                ),
                (
                    "config_hash",
                    models.CharField(
                        help_text="SHA256 of the canonical resolved scenario",
                        max_length=64,
                        unique=True,
                    ),
                ),
                (
                    "config_json",
                    models.JSONField(default=dict, help_text="Resolved scenario"),
                ),
                (
                    "manifest_json",
                    models.JSONField(
                        default=dict, help_text="Run manifest as written to disk"
                    ),
                ),
                ("output_directory", models.CharField(max_length=500)),
                ("final_positive", models.FloatField(blank=True, null=True)),
                ("final_negative", models.FloatField(blank=True, null=True)),
                ("final_total", models.FloatField(blank=True, null=True)),
                (
                    "min_charge_density",
                    models.FloatField(
                        blank=True,
                        help_text="Lowest Q over all snapshots, per nm",
                        null=True,
                    ),
                ),
                ("snapshot_count", models.PositiveIntegerField(default=0)),
                ("created_at", models.DateTimeField(auto_now_add=True, db_index=True)),
                ("updated_at", models.DateTimeField(auto_now=True)),
            ],
            options={
                "ordering": ["-created_at"],
                "indexes": [
                    models.Index(
                        fields=["-created_at"], name="simulations_created_3f9a1c_idx"
                    ),
                    models.Index(
                        fields=["collision_mode"], name="simulations_collisi_b27e04_idx"
                    ),
                ],
            },
        ),
        migrations.CreateModel(
            name="RunArtifact",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                (
                    "path",
                    models.CharField(
                        help_text="Path relative to the run directory", max_length=500
                    ),
                ),
                ("sha256", models.CharField(max_length=64)),
                (
                    "size",
                    models.PositiveBigIntegerField(help_text="File size in bytes"),
                ),
                (
                    "kind",
                    models.CharField(
                        choices=[
                            ("charge", "Charge density"),
                            ("wigner", "Wigner field"),
                            ("negativity", "Negativity report"),
                            ("table", "Table"),
                            ("other", "Other"),
                        ],
                        default="other",
                        max_length=16,
                    ),
                ),
                (
                    "snapshot_time",
                    models.FloatField(blank=True, help_text="fs", null=True),
                ),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="artifacts",
                        to="simulations.scenariorun",
                    ),
                ),
            ],
            options={
                "ordering": ["run", "path"],
                "constraints": [
                    models.UniqueConstraint(
                        fields=("run", "path"), name="unique_artifact_path_per_run"
                    )
                ],
            },
        ),
    ]
