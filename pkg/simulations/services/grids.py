"""Position grids and their conjugate wave-vector grids."""
from __future__ import annotations

import logging
import math

from simulations.domain import MomentumGrid, SpatialGrid
from simulations.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


def make_grid(x_min: float, x_max: float, n_points: int) -> SpatialGrid:
    """Inclusive uniform grid on [x_min, x_max]; node j at x_min + j·dx."""
    if not (math.isfinite(x_min) and math.isfinite(x_max)):
        raise ConfigurationError("grid bounds must be finite")
    if int(n_points) != n_points or n_points < 2:
        raise ConfigurationError(f"n_points must be an integer >= 2, got {n_points}")
    if x_max <= x_min:
        raise ConfigurationError(f"x_max ({x_max}) must exceed x_min ({x_min})")
    n_points = int(n_points)
    dx = (x_max - x_min) / (n_points - 1)
    logger.debug("Spatial grid [%s, %s] nm with %d nodes (dx=%.6g nm)", x_min, x_max, n_points, dx)
    return SpatialGrid(x_min=float(x_min), dx=dx, n_points=n_points)


def conjugate_momentum_grid(grid: SpatialGrid) -> MomentumGrid:
    """Zero-centred wave-vector grid with dk = 2π/(n·dx), laid out in fftshift order."""
    if grid.dx <= 0 or grid.n_points < 2:
        raise ConfigurationError("conjugate grid requires a valid spatial grid")
    dk = 2.0 * math.pi / (grid.n_points * grid.dx)
    return MomentumGrid(k_min=-(grid.n_points // 2) * dk, dk=dk, n_points=grid.n_points)


def is_conjugate(grid: SpatialGrid, kgrid: MomentumGrid) -> bool:
    expected = conjugate_momentum_grid(grid)
    return kgrid == expected


def nearest_node(grid: SpatialGrid, x: float) -> int:
    index = int(round((x - grid.x_min) / grid.dx))
    return min(max(index, 0), grid.n_points - 1)
