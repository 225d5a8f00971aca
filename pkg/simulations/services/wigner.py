"""
Discrete Wigner–Weyl transform on the midpoint lattice.

States are first sine-interpolated onto a grid of spacing dx/2 (exact at the original
nodes and consistent with the hard walls), so that x ± x′/2 lands on stored samples
for every offset x′ = m·dx. The density matrix is then held as
g[j, m] = ρ(x_j + m·dx/2, x_j − m·dx/2) for m in [−n//2, n − n//2), and

    F(x_j, k_n) = (dx/2π) Σ_m g[j, m] e^{−i k_n m dx}
    g[j, m]     = Σ_n F(x_j, k_n) e^{i k_n m dx} dk

are exact inverses because dk·dx·n = 2π. The position marginal Σ_n F dk equals
g[j, 0] = Q(x_j), so no extra factor of ħ appears anywhere.
"""
from __future__ import annotations

import logging
from typing import Iterator, Tuple

import numpy as np
from scipy import fft as sp_fft

from simulations.domain import (
    ChargeDensity,
    DensityMatrixGrid,
    MomentumGrid,
    PureState,
    SignedEnsemble,
    SpatialGrid,
    WignerField,
)
from simulations.exceptions import ShapeError
from simulations.services.grids import conjugate_momentum_grid, is_conjugate

logger = logging.getLogger(__name__)

CONVENTION_TAG = "wavevector-2pi-forward-unit-marginal-v1"
IMAGINARY_RESIDUE_TOLERANCE = 1e-10
ROW_BLOCK = 256


def offset_lattice(n_points: int) -> np.ndarray:
    half = n_points // 2
    return np.arange(-half, n_points - half)


def doubled_resolution(amplitudes: np.ndarray) -> np.ndarray:
    """
    Sine-interpolate wall-pinned samples onto 2n − 1 points of spacing dx/2.

    Works column-wise on an (n, T) matrix; row 2j of the result equals row j of the input.
    """
    amplitudes = np.asarray(amplitudes, dtype=np.complex128)
    squeeze = amplitudes.ndim == 1
    if squeeze:
        amplitudes = amplitudes[:, None]
    n_points = amplitudes.shape[0]
    interior = amplitudes[1:-1]
    size = interior.shape[0]

    fine = np.zeros((2 * n_points - 1, amplitudes.shape[1]), dtype=np.complex128)
    if size > 0:
        padded_re = np.zeros((2 * size + 1, amplitudes.shape[1]))
        padded_im = np.zeros_like(padded_re)
        padded_re[:size] = 2.0 * sp_fft.dst(interior.real, type=1, axis=0)
        padded_im[:size] = 2.0 * sp_fft.dst(interior.imag, type=1, axis=0)
        fine[1:-1] = sp_fft.idst(padded_re, type=1, axis=0) + 1j * sp_fft.idst(padded_im, type=1, axis=0)
    return fine[:, 0] if squeeze else fine


def _midpoint_indices(n_points: int, rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    offsets = offset_lattice(n_points)
    plus = 2 * rows[:, None] + offsets[None, :]
    minus = 2 * rows[:, None] - offsets[None, :]
    last = 2 * n_points - 2
    valid = (plus >= 0) & (plus <= last) & (minus >= 0) & (minus <= last)
    return np.clip(plus, 0, last), np.clip(minus, 0, last), valid


def _row_blocks(n_points: int) -> Iterator[np.ndarray]:
    for start in range(0, n_points, ROW_BLOCK):
        yield np.arange(start, min(start + ROW_BLOCK, n_points))


def _midpoint_block(fine: np.ndarray, weights: np.ndarray, rows: np.ndarray, n_points: int) -> np.ndarray:
    plus, minus, valid = _midpoint_indices(n_points, rows)
    block = np.zeros(plus.shape, dtype=np.complex128)
    for i, weight in enumerate(weights):
        if weight == 0.0:
            continue
        column = fine[:, i]
        block += weight * (column[plus] * np.conj(column[minus]))
    block[~valid] = 0.0
    if n_points % 2 == 0:
        # the most negative offset has no partner inside the window
        block[:, 0] = block[:, 0].real
    return block


def _check_grids(grid: SpatialGrid, kgrid: MomentumGrid):
    if not is_conjugate(grid, kgrid):
        raise ShapeError("momentum grid is not conjugate to the spatial grid")


def _forward(block: np.ndarray, dx: float) -> np.ndarray:
    shifted = np.fft.ifftshift(block, axes=1)
    return np.fft.fftshift(np.fft.fft(shifted, axis=1), axes=1) * (dx / (2.0 * np.pi))


def _transform(ensemble: SignedEnsemble, kgrid: MomentumGrid) -> WignerField:
    grid = ensemble.grid
    _check_grids(grid, kgrid)
    fine = doubled_resolution(ensemble.stacked_amplitudes())
    weights = ensemble.weights
    values = np.empty((grid.n_points, kgrid.n_points))
    residue = 0.0
    for rows in _row_blocks(grid.n_points):
        transformed = _forward(_midpoint_block(fine, weights, rows, grid.n_points), grid.dx)
        residue = max(residue, float(np.max(np.abs(transformed.imag))))
        values[rows] = transformed.real
    if residue > IMAGINARY_RESIDUE_TOLERANCE:
        logger.warning("Wigner field imaginary residue %.3e exceeds %.0e", residue, IMAGINARY_RESIDUE_TOLERANCE)
    return WignerField(grid=grid, kgrid=kgrid, values=values, convention=CONVENTION_TAG)


def wigner_from_state(state: PureState, kgrid: MomentumGrid) -> WignerField:
    return _transform(SignedEnsemble.pure(state), kgrid)


def wigner_from_ensemble(ensemble: SignedEnsemble, kgrid: MomentumGrid) -> WignerField:
    """Σᵢ wᵢ·F[ψᵢ], accumulated on the density matrix before transforming."""
    return _transform(ensemble, kgrid)


def density_matrix_from_ensemble(ensemble: SignedEnsemble) -> DensityMatrixGrid:
    grid = ensemble.grid
    fine = doubled_resolution(ensemble.stacked_amplitudes())
    weights = ensemble.weights
    offsets = offset_lattice(grid.n_points)
    values = np.empty((grid.n_points, offsets.size), dtype=np.complex128)
    for rows in _row_blocks(grid.n_points):
        values[rows] = _midpoint_block(fine, weights, rows, grid.n_points)
    return DensityMatrixGrid(grid=grid, offsets=offsets, values=values)


def wigner_from_density_matrix(rho: DensityMatrixGrid) -> WignerField:
    kgrid = conjugate_momentum_grid(rho.grid)
    if not np.array_equal(rho.offsets, offset_lattice(rho.grid.n_points)):
        raise ShapeError("density matrix offsets do not span the transform window")
    transformed = _forward(np.asarray(rho.values), rho.grid.dx)
    residue = float(np.max(np.abs(transformed.imag)))
    if residue > IMAGINARY_RESIDUE_TOLERANCE:
        logger.warning("Wigner field imaginary residue %.3e exceeds %.0e", residue, IMAGINARY_RESIDUE_TOLERANCE)
    return WignerField(grid=rho.grid, kgrid=kgrid, values=transformed.real, convention=CONVENTION_TAG)


def density_matrix_from_wigner(field: WignerField) -> DensityMatrixGrid:
    """Inverse transform back onto the midpoint lattice."""
    _check_grids(field.grid, field.kgrid)
    shifted = np.fft.ifftshift(np.asarray(field.values, dtype=np.complex128), axes=1)
    values = np.fft.fftshift(np.fft.ifft(shifted, axis=1), axes=1) * (field.kgrid.n_points * field.kgrid.dk)
    return DensityMatrixGrid(grid=field.grid, offsets=offset_lattice(field.grid.n_points), values=values)


def wigner_at_wave_vector(ensemble: SignedEnsemble, k: float) -> np.ndarray:
    """F(x_j, k) at every node for one arbitrary wave vector k."""
    grid = ensemble.grid
    fine = doubled_resolution(ensemble.stacked_amplitudes())
    weights = ensemble.weights
    phases = np.exp(-1j * k * offset_lattice(grid.n_points) * grid.dx) * (grid.dx / (2.0 * np.pi))
    values = np.empty(grid.n_points)
    for rows in _row_blocks(grid.n_points):
        values[rows] = (_midpoint_block(fine, weights, rows, grid.n_points) @ phases).real
    return values


def marginal_position(field: WignerField) -> ChargeDensity:
    return ChargeDensity(grid=field.grid, values=field.values.sum(axis=1) * field.kgrid.dk)


def marginal_momentum(field: WignerField) -> np.ndarray:
    """P(k) = Σ_x F(x, k)·dx on the field's momentum grid."""
    return field.values.sum(axis=0) * field.grid.dx
