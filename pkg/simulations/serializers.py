from __future__ import annotations

from rest_framework import serializers

from simulations.models import RunArtifact, ScenarioRun
from simulations.services.run_comparison import COMPARISON_FIELDS


class ScenarioRequestSerializer(serializers.Serializer):
    scenario = serializers.JSONField(
        help_text="Scenario as a mapping, or as YAML text in a string."
    )
    overrides = serializers.ListField(
        child=serializers.CharField(),
        required=False,
        default=list,
        help_text="Edits of the form key.path=value, applied in order.",
    )
    snapshot_times = serializers.ListField(
        child=serializers.FloatField(),
        required=False,
        allow_null=True,
        default=None,
        help_text="Replaces evolution.snapshot_times (fs).",
    )

    def validate_scenario(self, value):
        if not isinstance(value, (dict, str)):
            raise serializers.ValidationError("Send a mapping or a YAML string.")
        return value


class ScenarioRunRequestSerializer(ScenarioRequestSerializer):
    save_run = serializers.BooleanField(
        required=False,
        default=False,
        help_text="Store the run and its file index in the database.",
    )


class RunArtifactSerializer(serializers.ModelSerializer):
    class Meta:
        model = RunArtifact
        fields = ["path", "sha256", "size", "kind", "snapshot_time"]
        read_only_fields = fields


class ScenarioRunSummarySerializer(serializers.ModelSerializer):
    class Meta:
        model = ScenarioRun
        fields = [
            "id",
            "name",
            "collision_mode",
            "config_hash",
            "final_positive",
            "final_negative",
            "final_total",
            "min_charge_density",
            "snapshot_count",
            "output_directory",
            "created_at",
        ]
        read_only_fields = fields


class ScenarioRunSerializer(ScenarioRunSummarySerializer):
    artifacts = RunArtifactSerializer(many=True, read_only=True)

    class Meta(ScenarioRunSummarySerializer.Meta):
        fields = ScenarioRunSummarySerializer.Meta.fields + [
            "config_json",
            "manifest_json",
            "artifacts",
        ]
        read_only_fields = fields


class RunComparisonSerializer(serializers.Serializer):
    run_ids = serializers.ListField(
        child=serializers.IntegerField(min_value=1),
        min_length=2,
        help_text="Stored runs to compare.",
    )
    field = serializers.ChoiceField(choices=list(COMPARISON_FIELDS), default="decomposition")
