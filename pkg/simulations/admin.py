from django.contrib import admin

from simulations.models import RunArtifact, ScenarioRun


class RunArtifactInline(admin.TabularInline):
    model = RunArtifact
    extra = 0
    readonly_fields = ["path", "sha256", "size", "kind", "snapshot_time"]


@admin.register(ScenarioRun)
class ScenarioRunAdmin(admin.ModelAdmin):
    list_display = [
        "name",
        "collision_mode",
        "final_positive",
        "final_negative",
        "final_total",
        "min_charge_density",
        "snapshot_count",
        "created_at",
    ]
    list_filter = ["collision_mode", "created_at"]
    search_fields = ["name", "config_hash"]
    readonly_fields = ["config_hash", "created_at", "updated_at"]
    date_hierarchy = "created_at"
    inlines = [RunArtifactInline]


@admin.register(RunArtifact)
class RunArtifactAdmin(admin.ModelAdmin):
    list_display = ["path", "run", "kind", "size", "snapshot_time"]
    list_filter = ["kind"]
    search_fields = ["path", "sha256", "run__name"]
    raw_id_fields = ["run"]
