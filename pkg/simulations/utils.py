# pyright: reportMissingImports=false
from __future__ import annotations

import hashlib
import json
from typing import Any, Dict, Optional

from django.db import transaction

from simulations.domain import RunManifest
from simulations.services.scenario_config import ScenarioConfig


def calculate_config_hash(resolved_config: Dict[str, Any]) -> str:
    """SHA256 of the canonical JSON of a resolved scenario."""
    canonical = json.dumps(resolved_config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def artifact_kind(path: str) -> str:
    name = path.rsplit("/", 1)[-1]
    if name.endswith("_charge.tsv"):
        return "charge"
    if "_wigner." in name:
        return "wigner"
    if name.endswith("_negativity.json"):
        return "negativity"
    if name.endswith(".tsv"):
        return "table"
    return "other"


def _snapshot_times_by_path(manifest: Dict[str, Any]) -> Dict[str, float]:
    times = {}
    for snapshot in manifest.get("snapshots", []):
        for path in snapshot.get("files", {}).values():
            times[path] = snapshot["time_fs"]
    return times


def _min_charge_density(manifest: Dict[str, Any]) -> Optional[float]:
    values = [s["diagnostics"]["min_q"] for s in manifest.get("snapshots", []) if "diagnostics" in s]
    return min(values) if values else None


def save_scenario_run(config: ScenarioConfig, manifest: RunManifest, output_directory):
    """Store a finished run; a scenario that was saved before is updated in place."""
    # Import here to avoid circular import
    from simulations.models import RunArtifact, ScenarioRun

    resolved = config.resolved()
    payload = manifest.to_representation()
    decomposition = payload.get("final_decomposition", {})
    defaults = {
        "name": config.name,
        "collision_mode": config.collision.mode,
        "config_json": resolved,
        "manifest_json": payload,
        "output_directory": str(output_directory),
        "final_positive": decomposition.get("positive"),
        "final_negative": decomposition.get("negative"),
        "final_total": decomposition.get("total"),
        "min_charge_density": _min_charge_density(payload),
        "snapshot_count": len(payload.get("snapshots", [])),
    }

    with transaction.atomic():
        run, created = ScenarioRun.objects.update_or_create(
            config_hash=calculate_config_hash(resolved), defaults=defaults
        )
        if not created:
            run.artifacts.all().delete()
        times = _snapshot_times_by_path(payload)
        RunArtifact.objects.bulk_create([
            RunArtifact(
                run=run,
                path=entry["path"],
                sha256=entry["sha256"],
                size=entry["bytes"],
                kind=artifact_kind(entry["path"]),
                snapshot_time=times.get(entry["path"]),
            )
            for entry in payload.get("files", [])
        ])
    return run
