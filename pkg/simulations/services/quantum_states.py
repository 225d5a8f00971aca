"""Construction of pure states and signed ensembles, and their charge density."""
from __future__ import annotations

import logging
from typing import Sequence, Union

import numpy as np

from simulations.domain import ChargeDensity, GaussianMeta, PureState, SignedEnsemble, SpatialGrid
from simulations.exceptions import ConfigurationError, DegenerateInputError, ShapeError

logger = logging.getLogger(__name__)

WALL_MARGIN_WIDTHS = 3.0
CANCELLATION_TOLERANCE = 1e-12

StateOrEnsemble = Union[PureState, SignedEnsemble]


def normalized(grid: SpatialGrid, amplitudes: np.ndarray) -> np.ndarray:
    """Pin the wall nodes and rescale so that Σ|ψ|²·dx = 1."""
    amplitudes = np.array(amplitudes, dtype=np.complex128, copy=True)
    amplitudes[0] = 0.0
    amplitudes[-1] = 0.0
    norm = np.sqrt(np.sum(amplitudes.real ** 2 + amplitudes.imag ** 2) * grid.dx)
    if not np.isfinite(norm) or norm == 0.0:
        raise DegenerateInputError("state has zero norm on the grid interior")
    return amplitudes / norm


def gaussian_packet(grid: SpatialGrid, x0: float, k0: float, a0: float) -> PureState:
    """ψ(x) ∝ e^{ik0(x−x0)}·exp(−(x−x0)²/a0²), renormalised on the grid."""
    if a0 <= 0:
        raise ConfigurationError(f"packet width a0 must be positive, got {a0}")
    if x0 - WALL_MARGIN_WIDTHS * a0 < grid.x_min or x0 + WALL_MARGIN_WIDTHS * a0 > grid.x_max:
        logger.warning(
            "Packet at x0=%.4g nm (a0=%.4g nm) is closer than %.0f widths to a wall",
            x0, a0, WALL_MARGIN_WIDTHS,
        )
    offset = grid.nodes - x0
    amplitudes = np.exp(1j * k0 * offset) * np.exp(-(offset ** 2) / a0 ** 2)
    return PureState(grid=grid, amplitudes=normalized(grid, amplitudes), meta=GaussianMeta(x0, k0, a0))


def superpose(states: Sequence[PureState], coefficients: Sequence[complex]) -> PureState:
    if not states:
        raise ShapeError("superpose needs at least one state")
    if len(states) != len(coefficients):
        raise ShapeError(f"{len(states)} states but {len(coefficients)} coefficients")
    grid = states[0].grid
    if any(state.grid != grid for state in states[1:]):
        raise ShapeError("all superposed states must share one spatial grid")

    combined = np.zeros(grid.n_points, dtype=np.complex128)
    for state, coefficient in zip(states, coefficients):
        combined += complex(coefficient) * state.amplitudes

    scale = max(abs(complex(c)) for c in coefficients)
    norm = np.sqrt(np.sum(np.abs(combined) ** 2) * grid.dx)
    if scale == 0.0 or norm <= CANCELLATION_TOLERANCE * scale:
        raise DegenerateInputError("superposition cancels to the zero state")
    return PureState(grid=grid, amplitudes=normalized(grid, combined))


def charge_density(ensemble: SignedEnsemble) -> ChargeDensity:
    """Q(x_j) = Σᵢ wᵢ|ψᵢ(x_j)|², accumulated in term order."""
    values = np.zeros(ensemble.grid.n_points, dtype=np.float64)
    for term in ensemble.terms:
        values += term.weight * term.state.probability
    return ChargeDensity(grid=ensemble.grid, values=values)


def _density(subject: StateOrEnsemble) -> np.ndarray:
    if isinstance(subject, PureState):
        return subject.probability
    return charge_density(subject).values


def expectation_position(subject: StateOrEnsemble) -> float:
    density = _density(subject)
    total = density.sum()
    if total == 0.0:
        raise DegenerateInputError("cannot locate a state with zero total density")
    return float(np.dot(density, subject.grid.nodes) / total)


def position_spread(subject: StateOrEnsemble) -> float:
    density = _density(subject)
    nodes = subject.grid.nodes
    mean = expectation_position(subject)
    variance = np.dot(density, (nodes - mean) ** 2) / density.sum()
    return float(np.sqrt(max(variance, 0.0)))


def centroid(ensemble: SignedEnsemble) -> float:
    """Charge centroid Σ x·Q / Σ Q."""
    return expectation_position(ensemble)


def momentum_distribution(state: PureState) -> tuple:
    """(k, |φ(k)|²) with φ the discrete Fourier transform of ψ, k in ascending order."""
    spectrum = np.fft.fftshift(np.fft.fft(state.amplitudes))
    k = np.fft.fftshift(np.fft.fftfreq(state.grid.n_points, d=state.grid.dx)) * 2.0 * np.pi
    return k, np.abs(spectrum) ** 2


def expectation_wave_vector(subject: StateOrEnsemble) -> float:
    if isinstance(subject, PureState):
        k, weights = momentum_distribution(subject)
        return float(np.dot(weights, k) / weights.sum())
    numerator = 0.0
    denominator = 0.0
    for term in subject.terms:
        k, weights = momentum_distribution(term.state)
        # each |φ|² integrates to n·Σ|ψ|², which is the same for every normalised term
        numerator += term.weight * np.dot(weights, k)
        denominator += term.weight * weights.sum()
    if denominator == 0.0:
        raise DegenerateInputError("ensemble has zero total weight")
    return float(numerator / denominator)


def inner_product(left: PureState, right: PureState) -> complex:
    """⟨left|right⟩ with rectangle-rule quadrature."""
    if left.grid != right.grid:
        raise ShapeError("inner product requires states on the same grid")
    return complex(np.vdot(left.amplitudes, right.amplitudes) * left.grid.dx)


def fidelity(left: PureState, right: PureState) -> float:
    """|⟨ψ|φ⟩| for unit-norm states."""
    return abs(inner_product(left, right))
