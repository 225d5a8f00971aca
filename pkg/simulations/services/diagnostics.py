"""Physicality diagnostics on charge densities: negativity, norm split, leaks."""
from __future__ import annotations

import logging
from typing import Dict, List, Tuple, Union

import numpy as np

from simulations.domain import ChargeDensity, NegativityReport, NormDecomposition, PureState, SignedEnsemble
from simulations.exceptions import ConfigurationError, ShapeError
from simulations.services.quantum_states import charge_density

logger = logging.getLogger(__name__)

DensitySource = Union[ChargeDensity, PureState, SignedEnsemble]


def _as_density(subject: DensitySource) -> ChargeDensity:
    if isinstance(subject, ChargeDensity):
        return subject
    if isinstance(subject, PureState):
        return ChargeDensity(grid=subject.grid, values=subject.probability)
    return charge_density(subject)


def scan_negativity(density: ChargeDensity, tol: float = 0.0, time: float = 0.0) -> NegativityReport:
    """Every node with Q < −tol (ascending x) plus the global minimum."""
    if tol < 0:
        raise ConfigurationError(f"negativity tolerance must be non-negative, got {tol}")
    nodes = density.grid.nodes
    values = density.values
    flagged = np.flatnonzero(values < -tol)
    lowest = int(np.argmin(values))
    return NegativityReport(
        time=float(time),
        tolerance=float(tol),
        violations=tuple((float(nodes[i]), float(values[i])) for i in flagged),
        global_min=(float(nodes[lowest]), float(values[lowest])),
    )


def violation_clusters(report: NegativityReport, gap: float) -> List[Dict[str, float]]:
    """Group violations whose neighbours lie within ``gap`` nm into x-intervals."""
    clusters: List[Dict[str, float]] = []
    for x, q in report.violations:
        if clusters and x - clusters[-1]["end"] <= gap:
            cluster = clusters[-1]
            cluster["end"] = x
            cluster["count"] += 1
            if q < cluster["min_q"]:
                cluster["min_q"], cluster["min_x"] = q, x
        else:
            clusters.append({"start": x, "end": x, "min_x": x, "min_q": q, "count": 1})
    return clusters


def norm_decomposition(density: ChargeDensity) -> NormDecomposition:
    dx = density.grid.dx
    values = density.values
    return NormDecomposition(
        positive=float(np.sum(np.maximum(values, 0.0)) * dx),
        negative=float(np.sum(np.minimum(values, 0.0)) * dx),
        total=density.integral,
    )


def transmission_reflection(density: ChargeDensity, divider: float) -> Tuple[float, float]:
    """(R, T): mass left of ``divider`` and at or right of it."""
    if not density.grid.contains(divider):
        raise ConfigurationError(f"divider {divider} nm lies outside the box")
    left = density.grid.nodes < divider
    dx = density.grid.dx
    return float(density.values[left].sum() * dx), float(density.values[~left].sum() * dx)


def boundary_leak(subject: DensitySource, margin: float) -> float:
    """Mass within ``margin`` nm of either wall."""
    density = _as_density(subject)
    grid = density.grid
    if margin <= 0 or margin >= grid.span / 2.0:
        raise ConfigurationError(f"leak margin must lie in (0, {grid.span / 2.0}) nm, got {margin}")
    nodes = grid.nodes
    edge = (nodes <= grid.x_min + margin) | (nodes >= grid.x_max - margin)
    return float(density.values[edge].sum() * grid.dx)


def marginal_consistency_error(marginal: ChargeDensity, density: ChargeDensity) -> float:
    if marginal.grid != density.grid:
        raise ShapeError("densities are sampled on different grids")
    return float(np.max(np.abs(marginal.values - density.values)))
