"""
Plot-ready snapshot files.

* ``<prefix>_charge.tsv``: header ``x_nm<TAB>Q_per_nm`` then one row per node.
* ``<prefix>_wigner.txt`` / ``.bin``: one header line ``# key=value ...`` (axes, sizes,
  origins, spacings, stride, convention) then the dense field, row-major with x as rows.
  The binary layout follows the header with little-endian float64 values.
* ``<prefix>_negativity.json``: negativity report, clusters and norm split.
"""
from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd

from simulations.domain import ChargeDensity, NegativityReport, WignerField
from simulations.exceptions import OutputError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17e"


def downsample_wigner(field: WignerField, stride: int) -> Tuple[np.ndarray, Dict[str, Any]]:
    """
    Keep every ``stride``-th x node and average groups of ``stride`` k bins.

    The k axis is zero-padded to a whole number of groups, so Σ F·dk over the reduced
    grid equals the full-resolution position marginal at the kept nodes.
    """
    if stride < 1:
        raise OutputError(f"Wigner stride must be >= 1, got {stride}")
    rows = field.values[::stride]
    n_k = field.kgrid.n_points
    groups = math.ceil(n_k / stride)
    padded = np.zeros((rows.shape[0], groups * stride))
    padded[:, :n_k] = rows
    reduced = padded.reshape(rows.shape[0], groups, stride).mean(axis=2)
    header = {
        "axes": "x,k",
        "n_x": reduced.shape[0],
        "n_k": reduced.shape[1],
        "x_min": field.grid.x_min,
        "dx": field.grid.dx * stride,
        "k_min": field.kgrid.k_min + 0.5 * (stride - 1) * field.kgrid.dk,
        "dk": field.kgrid.dk * stride,
        "x_stride": stride,
        "k_bin": stride,
        "convention": field.convention,
    }
    return reduced, header


def _format_header(header: Dict[str, Any]) -> str:
    parts = [f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}" for key, value in header.items()]
    return "# " + " ".join(parts)


def _parse_header(line: str) -> Dict[str, Any]:
    header: Dict[str, Any] = {}
    for token in line.lstrip("#").split():
        key, _, raw = token.partition("=")
        if key in ("n_x", "n_k", "x_stride", "k_bin"):
            header[key] = int(raw)
        elif key in ("x_min", "dx", "k_min", "dk", "time_fs"):
            header[key] = float(raw)
        else:
            header[key] = raw
    return header


def write_charge_file(path: Path, density: ChargeDensity):
    table = np.column_stack([density.grid.nodes, density.values])
    try:
        np.savetxt(path, table, fmt=FLOAT_FORMAT, delimiter="\t", header="x_nm\tQ_per_nm", comments="")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def load_charge_file(path) -> np.ndarray:
    """(n_points, 2) array of x_nm, Q_per_nm."""
    try:
        return np.loadtxt(path, delimiter="\t", skiprows=1, ndmin=2)
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from exc


def write_wigner_file(path: Path, values: np.ndarray, header: Dict[str, Any], binary: bool):
    try:
        if binary:
            line = _format_header({**header, "format": "binary", "dtype": "<f8"}) + "\n"
            with open(path, "wb") as f:
                f.write(line.encode("ascii"))
                f.write(np.ascontiguousarray(values, dtype="<f8").tobytes())
        else:
            header_line = _format_header({**header, "format": "text"}).lstrip("# ")
            np.savetxt(path, values, fmt=FLOAT_FORMAT, delimiter=" ", header=header_line, comments="# ")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def load_wigner_file(path) -> Tuple[Dict[str, Any], np.ndarray]:
    """Read either Wigner layout back as (header, values)."""
    try:
        with open(path, "rb") as f:
            header = _parse_header(f.readline().decode("ascii"))
            payload = f.read() if header.get("format") == "binary" else None
        if payload is not None:
            values = np.frombuffer(payload, dtype="<f8")
        else:
            values = np.loadtxt(path, comments="#", ndmin=2)
        return header, np.asarray(values, dtype=float).reshape(header["n_x"], header["n_k"])
    except (OSError, UnicodeDecodeError, ValueError, KeyError) as exc:
        raise OutputError(f"cannot read Wigner file {path}: {exc}") from exc


def write_json(path: Path, payload: Dict[str, Any]):
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def emit_snapshot(
    directory: Path,
    label: str,
    time: float,
    density: ChargeDensity,
    field: WignerField,
    report: NegativityReport,
    extra: Dict[str, Any] = None,
    wigner_format: str = "text",
    stride: int = 4,
) -> Dict[str, str]:
    """Write the three files of one snapshot; returns their paths relative to ``directory``."""
    directory = Path(directory)
    binary = wigner_format == "binary"
    names = {
        "charge": f"{label}_charge.tsv",
        "wigner": f"{label}_wigner.{'bin' if binary else 'txt'}",
        "negativity": f"{label}_negativity.json",
    }
    write_charge_file(directory / names["charge"], density)
    reduced, header = downsample_wigner(field, stride)
    write_wigner_file(directory / names["wigner"], reduced, {**header, "time_fs": float(time)}, binary)
    write_json(directory / names["negativity"], {**report.to_representation(), **(extra or {})})
    logger.info("Snapshot %s at t=%.6g fs written to %s", label, time, directory)
    return names


def write_norm_table(path: Path, rows: List[Dict[str, Any]]):
    frame = pd.DataFrame(rows, columns=["time_fs", "positive", "negative", "total", "min_q", "min_x_nm"])
    try:
        frame.to_csv(path, sep="\t", index=False, float_format=FLOAT_FORMAT)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
