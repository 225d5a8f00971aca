from __future__ import annotations

import logging
from typing import Dict, List, Sequence

import pandas as pd

from simulations.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

COMPARISON_FIELDS = ("decomposition", "negativity")


def _label(manifest: Dict, index: int) -> str:
    mode = manifest.get("collision", {}).get("mode", "none")
    return f"{manifest.get('scenario', f'run{index}')} ({mode})"


def _labels(manifests: Sequence[Dict]) -> List[str]:
    labels = [_label(manifest, index) for index, manifest in enumerate(manifests)]
    # repeated labels get their position appended
    return [
        label if labels.count(label) == 1 else f"{label} #{index}"
        for index, label in enumerate(labels)
    ]


def decomposition_table(manifests: Sequence[Dict]) -> pd.DataFrame:
    """Final positive / negative / total norm of each run, one row per run."""
    rows: List[Dict] = []
    for label, manifest in zip(_labels(manifests), manifests):
        decomposition = manifest.get("final_decomposition", {})
        collision = manifest.get("collision", {})
        rows.append({
            "run": label,
            "positive": decomposition.get("positive"),
            "negative": decomposition.get("negative"),
            "total": decomposition.get("total"),
            "weight": collision.get("weight"),
        })
    return pd.DataFrame(rows).set_index("run")


def negativity_table(manifests: Sequence[Dict]) -> pd.DataFrame:
    """Minimum charge density per snapshot time, one column per run."""
    columns = {}
    for label, manifest in zip(_labels(manifests), manifests):
        series = {
            snapshot["time_fs"]: snapshot["diagnostics"]["min_q"]
            for snapshot in manifest.get("snapshots", [])
        }
        columns[label] = pd.Series(series, dtype=float)
    frame = pd.DataFrame(columns)
    frame.index.name = "time_fs"
    return frame.sort_index()


def compare_manifests(manifests: Sequence[Dict], field: str = "decomposition") -> pd.DataFrame:
    if len(manifests) < 2:
        raise ConfigurationError("comparison needs at least two runs")
    if field == "decomposition":
        return decomposition_table(manifests)
    if field == "negativity":
        return negativity_table(manifests)
    raise ConfigurationError(f"unknown comparison field {field!r}; expected one of {COMPARISON_FIELDS}")


def table_to_records(frame: pd.DataFrame) -> List[Dict]:
    frame = frame.reset_index()
    return frame.astype(object).where(frame.notna(), None).to_dict(orient="records")
