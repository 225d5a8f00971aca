# pyright: reportMissingImports=false
from __future__ import annotations

from django.db import models


class ScenarioRun(models.Model):
    """A finished run: resolved scenario, manifest and final norm split."""

    COLLISION_MODES = [
        ("none", "None"),
        ("he", "H.E."),
        ("he_kernel", "H.E. kernel"),
        ("gs", "G.S."),
    ]

    name = models.CharField(max_length=255, db_index=True)
    collision_mode = models.CharField(max_length=16, choices=COLLISION_MODES, db_index=True)
    config_hash = models.CharField(
        max_length=64, unique=True, help_text="SHA256 of the canonical resolved scenario"
    )
    config_json = models.JSONField(default=dict, help_text="Resolved scenario")
    manifest_json = models.JSONField(default=dict, help_text="Run manifest as written to disk")
    output_directory = models.CharField(max_length=500)

    # Denormalized fields for easier querying
    final_positive = models.FloatField(null=True, blank=True)
    final_negative = models.FloatField(null=True, blank=True)
    final_total = models.FloatField(null=True, blank=True)
    min_charge_density = models.FloatField(
        null=True, blank=True, help_text="Lowest Q over all snapshots, per nm"
    )
    snapshot_count = models.PositiveIntegerField(default=0)

    created_at = models.DateTimeField(auto_now_add=True, db_index=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        ordering = ["-created_at"]
        indexes = [
            models.Index(fields=["-created_at"], name="simulations_created_3f9a1c_idx"),
            models.Index(fields=["collision_mode"], name="simulations_collisi_b27e04_idx"),
        ]

    def __str__(self) -> str:
        return f"{self.name} ({self.collision_mode})"

    @property
    def has_negativity(self) -> bool:
        return self.min_charge_density is not None and self.min_charge_density < 0


class RunArtifact(models.Model):
    """One file listed in a run manifest."""

    KINDS = [
        ("charge", "Charge density"),
        ("wigner", "Wigner field"),
        ("negativity", "Negativity report"),
        ("table", "Table"),
        ("other", "Other"),
    ]

    run = models.ForeignKey(ScenarioRun, on_delete=models.CASCADE, related_name="artifacts")
    path = models.CharField(max_length=500, help_text="Path relative to the run directory")
    sha256 = models.CharField(max_length=64)
    size = models.PositiveBigIntegerField(help_text="File size in bytes")
    kind = models.CharField(max_length=16, choices=KINDS, default="other")
    snapshot_time = models.FloatField(null=True, blank=True, help_text="fs")

    class Meta:
        ordering = ["run", "path"]
        constraints = [
            models.UniqueConstraint(fields=["run", "path"], name="unique_artifact_path_per_run"),
        ]

    def __str__(self) -> str:
        return f"{self.path} ({self.size} bytes)"
