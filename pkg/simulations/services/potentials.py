from __future__ import annotations

import logging

import numpy as np

from simulations.domain import Potential, SpatialGrid
from simulations.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

# Nodes within this fraction of dx of a barrier edge are treated as lying on it.
EDGE_TOLERANCE = 1e-9


def double_barrier(
    grid: SpatialGrid,
    center: float,
    barrier_width: float,
    height: float,
    well_width: float,
) -> Potential:
    """
    Two rectangular barriers of equal height placed symmetrically about ``center``.

    ``well_width`` is the inner-edge to inner-edge separation. A node belongs to a
    barrier when its distance u from the centre satisfies well/2 <= u < well/2 + width,
    which rasterises each barrier by cell-centre membership and keeps the profile
    mirror-symmetric on grids where the centre is a node.
    """
    if barrier_width <= 0:
        raise ConfigurationError(f"barrier_width must be positive, got {barrier_width}")
    if well_width < 0:
        raise ConfigurationError(f"well_width must be non-negative, got {well_width}")
    if not np.isfinite(height):
        raise ConfigurationError("barrier height must be finite")

    half_well = well_width / 2.0
    outer = half_well + barrier_width
    if center - outer < grid.x_min or center + outer > grid.x_max:
        raise ConfigurationError(
            f"double barrier spanning [{center - outer}, {center + outer}] nm "
            f"does not fit in the box [{grid.x_min}, {grid.x_max}] nm"
        )

    eps = EDGE_TOLERANCE * grid.dx
    distance = np.abs(grid.nodes - center)
    inside = (distance >= half_well - eps) & (distance < outer - eps)
    values = np.where(inside, float(height), 0.0)
    logger.debug(
        "Double barrier at %.4g nm: %d barrier nodes, height %.4g eV", center, int(inside.sum()), height
    )
    return Potential(
        grid=grid,
        values=values,
        description={
            "kind": "double_barrier",
            "center": center,
            "barrier_width": barrier_width,
            "height": height,
            "well_width": well_width,
        },
    )


def free_potential(grid: SpatialGrid) -> Potential:
    return Potential(grid=grid, values=np.zeros(grid.n_points), description={"kind": "free"})
