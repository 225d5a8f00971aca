"""
Crank–Nicolson evolution of pure states and term-by-term evolution of signed ensembles.

The Hamiltonian acts on the interior nodes only; the first and last node are hard
walls where ψ stays zero. Two kinetic stencils are available: the plain three-point
Laplacian and the compact (Numerov) form −∂² ≈ B⁻¹(−δ²/dx²) with
B = tridiag(1/12, 10/12, 1/12). Both keep the Crank–Nicolson system tridiagonal and
Hermitian, so every step is unitary to round-off.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded
from tqdm import tqdm

from simulations.domain import PureState, SignedEnsemble, SpatialGrid, Trajectory, Potential
from simulations.exceptions import ConfigurationError, ShapeError
from simulations.services.quantum_states import normalized
from simulations.services.units import DEFAULT_UNITS, UnitSystem

logger = logging.getLogger(__name__)

LAPLACIANS = ("three_point", "compact")
SNAPSHOT_SNAP_WARNING = 1e-9
TIME_TOLERANCE = 1e-9

# Called after every transport step with (weights, time reached); returns the new weights.
StepHook = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True, eq=False)
class Propagator:
    grid: SpatialGrid
    potential: Potential
    dt: float
    effective_mass: float
    laplacian: str = "three_point"
    substeps: int = 1
    units: UnitSystem = DEFAULT_UNITS
    _bands: Dict[str, np.ndarray] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.potential.grid != self.grid:
            raise ShapeError("potential is sampled on a different grid than the propagator")
        if not np.isfinite(self.dt) or self.dt == 0:
            raise ConfigurationError(f"time step must be finite and non-zero, got {self.dt}")
        if self.effective_mass <= 0:
            raise ConfigurationError(f"effective_mass must be positive, got {self.effective_mass}")
        if self.laplacian not in LAPLACIANS:
            raise ConfigurationError(f"laplacian must be one of {LAPLACIANS}, got {self.laplacian!r}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ConfigurationError(f"substeps must be a positive integer, got {self.substeps}")
        if self.grid.n_points < 3:
            raise ConfigurationError("evolution needs at least one interior node")
        self._bands.update(self._build_bands())

    @property
    def kinetic_prefactor(self) -> float:
        return self.units.kinetic_prefactor(self.effective_mass)

    @property
    def substep_dt(self) -> float:
        return self.dt / self.substeps

    def _build_bands(self) -> Dict[str, np.ndarray]:
        v = self.potential.values[1:-1]
        size = v.size
        c = self.kinetic_prefactor / self.grid.dx ** 2
        tau = self.substep_dt / (2.0 * self.units.hbar)

        if self.laplacian == "three_point":
            mass_diag, mass_off = np.ones(size), np.zeros(size)
            h_diag = 2.0 * c + v
            h_upper = np.full(size, -c)
            h_lower = np.full(size, -c)
        else:
            mass_diag, mass_off = np.full(size, 10.0 / 12.0), np.full(size, 1.0 / 12.0)
            # B·(K + V) with K = −c·δ²: row j, column k carries B[j, k]·V_k
            h_diag = 2.0 * c + mass_diag * v
            h_upper = -c + np.concatenate([v[1:], [0.0]]) / 12.0
            h_lower = -c + np.concatenate([[0.0], v[:-1]]) / 12.0

        def banded(diag, upper, lower, sign):
            ab = np.zeros((3, size), dtype=np.complex128)
            ab[0, 1:] = (mass_off + sign * 1j * tau * upper)[:-1]
            ab[1, :] = mass_diag + sign * 1j * tau * diag
            ab[2, :-1] = (mass_off + sign * 1j * tau * lower)[1:]
            return ab

        mass = np.zeros((3, size))
        mass[0, 1:] = mass_off[:-1]
        mass[1, :] = mass_diag
        mass[2, :-1] = mass_off[1:]

        return {
            "implicit": banded(h_diag, h_upper, h_lower, +1.0),
            "explicit": banded(h_diag, h_upper, h_lower, -1.0),
            "mass": mass,
            "kinetic_scale": np.array(c),
        }

    @staticmethod
    def _apply_tridiagonal(ab: np.ndarray, vectors: np.ndarray) -> np.ndarray:
        """Multiply a (1, 1)-banded matrix in LAPACK layout by the columns of ``vectors``."""
        result = ab[1][:, None] * vectors
        result[:-1] += ab[0, 1:][:, None] * vectors[1:]
        result[1:] += ab[2, :-1][:, None] * vectors[:-1]
        return result

    def advance(self, amplitudes: np.ndarray) -> np.ndarray:
        """Advance the columns of an (n_points, n_states) matrix by one full dt."""
        if amplitudes.ndim != 2 or amplitudes.shape[0] != self.grid.n_points:
            raise ShapeError("amplitudes must be an (n_points, n_states) matrix on the propagator grid")
        interior = np.array(amplitudes[1:-1], dtype=np.complex128)
        for _ in range(self.substeps):
            rhs = self._apply_tridiagonal(self._bands["explicit"], interior)
            interior = solve_banded((1, 1), self._bands["implicit"], rhs, check_finite=False)
        result = np.zeros_like(amplitudes, dtype=np.complex128)
        result[1:-1] = interior
        return result

    def apply_kinetic(self, amplitudes: np.ndarray) -> np.ndarray:
        """T ψ on the interior with the propagator's own discrete operator."""
        interior = amplitudes[1:-1]
        c = float(self._bands["kinetic_scale"])
        second_difference = -2.0 * interior
        second_difference[:-1] += interior[1:]
        second_difference[1:] += interior[:-1]
        kinetic = -c * second_difference
        if self.laplacian == "compact":
            kinetic = solve_banded((1, 1), self._bands["mass"], kinetic, check_finite=False)
        result = np.zeros_like(amplitudes, dtype=np.complex128)
        result[1:-1] = kinetic
        return result

    def kinetic_energy(self, state: PureState) -> float:
        self._check_grid(state)
        kinetic = self.apply_kinetic(state.amplitudes)
        return float(np.real(np.vdot(state.amplitudes, kinetic)) * self.grid.dx)

    def energy(self, state: PureState) -> float:
        """⟨H₀⟩ = ⟨T⟩ + ⟨V⟩ in eV."""
        potential = float(np.dot(state.probability, self.potential.values) * self.grid.dx)
        return self.kinetic_energy(state) + potential

    def reversed(self) -> "Propagator":
        return replace(self, dt=-self.dt)

    def _check_grid(self, state: PureState):
        if state.grid != self.grid:
            raise ShapeError("state is sampled on a different grid than the propagator")

    def to_representation(self) -> dict:
        return {
            "dt_fs": self.dt,
            "effective_mass": self.effective_mass,
            "laplacian": self.laplacian,
            "substeps": self.substeps,
            "substep_dt_fs": self.substep_dt,
        }


def step(propagator: Propagator, state: PureState) -> PureState:
    propagator._check_grid(state)
    advanced = propagator.advance(state.amplitudes[:, None])[:, 0]
    return state.with_amplitudes(advanced)


def _column_norms(grid: SpatialGrid, amplitudes: np.ndarray) -> np.ndarray:
    return np.sum(amplitudes.real ** 2 + amplitudes.imag ** 2, axis=0) * grid.dx


def _snap_snapshots(
    requested: Sequence[float], t_from: float, t_to: float, dt: float
) -> List[tuple]:
    plan = []
    for time in sorted(float(t) for t in requested):
        if time < t_from - TIME_TOLERANCE or time > t_to + TIME_TOLERANCE:
            raise ConfigurationError(
                f"snapshot time {time} fs lies outside the evolution span [{t_from}, {t_to}] fs"
            )
        index = int(round((time - t_from) / dt))
        actual = t_from + index * dt
        if abs(actual - time) > SNAPSHOT_SNAP_WARNING:
            logger.warning("Snapshot at %.6g fs snapped to step boundary %.6g fs", time, actual)
        if plan and plan[-1][1] == index:
            raise ConfigurationError(
                f"snapshot times {plan[-1][0]} and {time} fs land on the same step"
            )
        plan.append((time, index, actual))
    return plan


def evolve_ensemble(
    propagator: Propagator,
    ensemble: SignedEnsemble,
    t_from: float,
    t_to: float,
    snapshot_times: Sequence[float] = (),
    step_hook: Optional[StepHook] = None,
    progress: bool = False,
) -> Trajectory:
    """
    Evolve every ensemble term independently from t_from to t_to.

    All terms advance together through one banded solve per substep. Snapshots are
    recorded at the step boundary nearest to each requested time. Weights are only
    touched when a ``step_hook`` is given.
    """
    if ensemble.grid != propagator.grid:
        raise ShapeError("ensemble is sampled on a different grid than the propagator")
    if propagator.dt <= 0:
        raise ConfigurationError("ensemble evolution runs forward in time only")
    if t_to < t_from - TIME_TOLERANCE:
        raise ConfigurationError(f"t_to ({t_to}) precedes t_from ({t_from})")

    n_steps = max(int(round((t_to - t_from) / propagator.dt)), 0)
    plan = _snap_snapshots(snapshot_times, t_from, t_to, propagator.dt)
    snapshot_at = {index: (requested, actual) for requested, index, actual in plan}

    grid = propagator.grid
    amplitudes = ensemble.stacked_amplitudes()
    weights = ensemble.weights
    initial_norms = _column_norms(grid, amplitudes)
    norms = initial_norms
    max_step_drift = 0.0

    requested_times: List[float] = []
    times: List[float] = []
    snapshots: List[SignedEnsemble] = []

    def record(index):
        requested, actual = snapshot_at[index]
        requested_times.append(requested)
        times.append(actual)
        snapshots.append(ensemble.with_stacked_amplitudes(amplitudes).with_weights(weights))

    for index in tqdm(range(n_steps), desc="evolve", unit="step", disable=not progress):
        if index in snapshot_at:
            record(index)
        amplitudes = propagator.advance(amplitudes)
        new_norms = _column_norms(grid, amplitudes)
        drift = float(np.max(np.abs(new_norms - norms)))
        max_step_drift = max(max_step_drift, drift)
        norms = new_norms
        logger.debug("step %d: norm drift %.3e", index + 1, drift)
        if step_hook is not None:
            weights = np.asarray(step_hook(weights, t_from + (index + 1) * propagator.dt), dtype=float)
    if n_steps in snapshot_at:
        record(n_steps)

    final = ensemble.with_stacked_amplitudes(amplitudes).with_weights(weights)
    cumulative = float(np.max(np.abs(norms - initial_norms)))
    return Trajectory(
        requested_times=tuple(requested_times),
        times=tuple(times),
        snapshots=tuple(snapshots),
        final=final,
        final_time=t_from + n_steps * propagator.dt,
        max_step_drift=max_step_drift,
        cumulative_drift=cumulative,
    )


def spreading_factor(a0: float, effective_mass: float, t: float, units: UnitSystem = DEFAULT_UNITS) -> float:
    """√(1 + 4ħ²t²/(m*²a0⁴)) with m* in absolute units."""
    mass = effective_mass * units.electron_rest_mass
    return float(np.sqrt(1.0 + 4.0 * units.hbar ** 2 * t ** 2 / (mass ** 2 * a0 ** 4)))


def analytic_free_gaussian(
    grid: SpatialGrid,
    x0: float,
    k0: float,
    a0: float,
    effective_mass: float,
    t: float,
    units: UnitSystem = DEFAULT_UNITS,
) -> PureState:
    """Closed-form free evolution of gaussian_packet(x0, k0, a0), renormalised on the grid."""
    if t < 0:
        raise ConfigurationError("analytic oracle is defined for t >= 0")
    if a0 <= 0:
        raise ConfigurationError(f"packet width a0 must be positive, got {a0}")
    mass = effective_mass * units.electron_rest_mass
    alpha = 1.0 / a0 ** 2
    beta = 2.0 * alpha * units.hbar / mass
    velocity = units.hbar * k0 / mass
    denominator = 1.0 + 1j * beta * t
    x = grid.nodes
    amplitudes = (
        denominator ** -0.5
        * np.exp(-alpha * (x - x0 - velocity * t) ** 2 / denominator)
        * np.exp(1j * k0 * (x - x0) - 1j * units.hbar * k0 ** 2 * t / (2.0 * mass))
    )
    return PureState(grid=grid, amplitudes=normalized(grid, amplitudes))
