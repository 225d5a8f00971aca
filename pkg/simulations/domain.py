from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from simulations.exceptions import ShapeError

TRACE_TOLERANCE = 1e-10


def _frozen(values: np.ndarray, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform position grid; node j sits at x_min + j·dx (nm)."""

    x_min: float
    dx: float
    n_points: int

    @property
    def nodes(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_points) * self.dx

    @property
    def x_max(self) -> float:
        return self.x_min + (self.n_points - 1) * self.dx

    @property
    def span(self) -> float:
        return (self.n_points - 1) * self.dx

    def contains(self, x: float) -> bool:
        return self.x_min <= x <= self.x_max

    def to_representation(self) -> Dict[str, Any]:
        return {"x_min": self.x_min, "dx": self.dx, "n_points": self.n_points, "x_max": self.x_max}


@dataclass(frozen=True)
class MomentumGrid:
    """Uniform wave-vector grid conjugate to a SpatialGrid (nm⁻¹), zero-centred."""

    k_min: float
    dk: float
    n_points: int

    @property
    def nodes(self) -> np.ndarray:
        return self.k_min + np.arange(self.n_points) * self.dk

    @property
    def k_max(self) -> float:
        return self.k_min + (self.n_points - 1) * self.dk

    def contains(self, k: float) -> bool:
        return self.k_min <= k <= self.k_max

    def to_representation(self) -> Dict[str, Any]:
        return {"k_min": self.k_min, "dk": self.dk, "n_points": self.n_points, "k_max": self.k_max}


@dataclass(frozen=True)
class GaussianMeta:
    x0: float
    k0: float
    a0: float

    def to_representation(self) -> Dict[str, float]:
        return {"x0": self.x0, "k0": self.k0, "a0": self.a0}


@dataclass(frozen=True, eq=False)
class PureState:
    """Wave function sampled on a SpatialGrid; hard walls pin the first and last node."""

    grid: SpatialGrid
    amplitudes: np.ndarray
    meta: Optional[GaussianMeta] = None

    def __post_init__(self):
        amplitudes = _frozen(self.amplitudes, np.complex128)
        if amplitudes.shape != (self.grid.n_points,):
            raise ShapeError(
                f"amplitudes of shape {amplitudes.shape} do not match a grid of {self.grid.n_points} nodes"
            )
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def probability(self) -> np.ndarray:
        return self.amplitudes.real ** 2 + self.amplitudes.imag ** 2

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.probability.sum() * self.grid.dx))

    def with_amplitudes(self, amplitudes: np.ndarray) -> "PureState":
        """Same grid, new samples; construction metadata no longer describes them."""
        return PureState(grid=self.grid, amplitudes=amplitudes, meta=None)


@dataclass(frozen=True, eq=False)
class EnsembleTerm:
    weight: float
    state: PureState


@dataclass(frozen=True, eq=False)
class SignedEnsemble:
    """ρ = Σ wᵢ|ψᵢ⟩⟨ψᵢ| with real, possibly negative, weights."""

    terms: Tuple[EnsembleTerm, ...]
    electron_count: int = 1

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ShapeError("an ensemble needs at least one term")
        grid = terms[0].state.grid
        for term in terms[1:]:
            if term.state.grid != grid:
                raise ShapeError("all ensemble states must share one spatial grid")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def pure(cls, state: PureState, electron_count: int = 1) -> "SignedEnsemble":
        return cls(terms=(EnsembleTerm(1.0, state),), electron_count=electron_count)

    @classmethod
    def from_pairs(
        cls, pairs: Iterable[Tuple[float, PureState]], electron_count: int = 1
    ) -> "SignedEnsemble":
        return cls(
            terms=tuple(EnsembleTerm(float(w), s) for w, s in pairs),
            electron_count=electron_count,
        )

    @property
    def grid(self) -> SpatialGrid:
        return self.terms[0].state.grid

    @property
    def weights(self) -> np.ndarray:
        return np.array([term.weight for term in self.terms], dtype=float)

    @property
    def states(self) -> List[PureState]:
        return [term.state for term in self.terms]

    @property
    def trace(self) -> float:
        return math.fsum(term.weight for term in self.terms)

    def stacked_amplitudes(self) -> np.ndarray:
        """Term amplitudes as a (n_points, n_terms) matrix."""
        return np.stack([term.state.amplitudes for term in self.terms], axis=1)

    def has_unit_trace(self, tolerance: float = TRACE_TOLERANCE) -> bool:
        return abs(self.trace - 1.0) <= tolerance

    def is_non_negative(self) -> bool:
        return all(term.weight >= 0.0 for term in self.terms)

    def extended(self, pairs: Iterable[Tuple[float, PureState]]) -> "SignedEnsemble":
        extra = tuple(EnsembleTerm(float(w), s) for w, s in pairs)
        return replace(self, terms=self.terms + extra)

    def with_weights(self, weights: Sequence[float]) -> "SignedEnsemble":
        if len(weights) != len(self.terms):
            raise ShapeError("one weight per ensemble term is required")
        return replace(
            self,
            terms=tuple(EnsembleTerm(float(w), t.state) for w, t in zip(weights, self.terms)),
        )

    def with_stacked_amplitudes(self, amplitudes: np.ndarray) -> "SignedEnsemble":
        """Replace every state by the matching column of ``amplitudes``; weights untouched."""
        if amplitudes.shape != (self.grid.n_points, len(self.terms)):
            raise ShapeError("stacked amplitudes do not match the ensemble layout")
        return replace(
            self,
            terms=tuple(
                EnsembleTerm(term.weight, term.state.with_amplitudes(amplitudes[:, i]))
                for i, term in enumerate(self.terms)
            ),
        )

    def to_representation(self) -> Dict[str, Any]:
        return {
            "electron_count": self.electron_count,
            "trace": self.trace,
            "terms": [
                {
                    "weight": term.weight,
                    "meta": term.state.meta.to_representation() if term.state.meta else None,
                }
                for term in self.terms
            ],
        }


@dataclass(frozen=True, eq=False)
class ChargeDensity:
    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values, np.float64)
        if values.shape != (self.grid.n_points,):
            raise ShapeError("charge density must have one value per grid node")
        object.__setattr__(self, "values", values)

    @property
    def integral(self) -> float:
        return float(self.values.sum() * self.grid.dx)


@dataclass(frozen=True, eq=False)
class Potential:
    grid: SpatialGrid
    values: np.ndarray
    description: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        values = _frozen(self.values, np.float64)
        if values.shape != (self.grid.n_points,):
            raise ShapeError("potential must have one value per grid node")
        if not np.all(np.isfinite(values)):
            raise ShapeError("potential must be finite everywhere")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class WignerField:
    """F_W sampled on (SpatialGrid × MomentumGrid); rows are positions, columns wave vectors."""

    grid: SpatialGrid
    kgrid: MomentumGrid
    values: np.ndarray
    convention: str

    def __post_init__(self):
        values = _frozen(self.values, np.float64)
        if values.shape != (self.grid.n_points, self.kgrid.n_points):
            raise ShapeError("Wigner field shape does not match its grids")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class DensityMatrixGrid:
    """ρ on the midpoint lattice: values[j, i] = ρ(x_j + m_i·dx/2, x_j − m_i·dx/2)."""

    grid: SpatialGrid
    offsets: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        offsets = _frozen(self.offsets, np.int64)
        values = _frozen(self.values, np.complex128)
        if values.shape != (self.grid.n_points, offsets.size):
            raise ShapeError("density matrix values do not match grid × offsets")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "values", values)

    def column(self, offset: int) -> np.ndarray:
        index = np.flatnonzero(self.offsets == offset)
        if index.size != 1:
            raise ShapeError(f"offset {offset} is outside the stored window")
        return self.values[:, index[0]]

    def diagonal(self) -> np.ndarray:
        return self.column(0)

    @property
    def trace(self) -> float:
        return float(self.diagonal().real.sum() * self.grid.dx)

    def at_nodes(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """ρ(x_a, x_b) for node pairs with an even index sum (integer midpoint)."""
        a = np.asarray(a)
        b = np.asarray(b)
        if np.any((a + b) % 2):
            raise ShapeError("node pairs must have an integer midpoint")
        centres = (a + b) // 2
        offsets = a - b
        lookup = {int(m): i for i, m in enumerate(self.offsets)}
        try:
            columns = np.array([lookup[int(m)] for m in np.ravel(offsets)]).reshape(offsets.shape)
        except KeyError as exc:
            raise ShapeError("node separation exceeds the stored offset window") from exc
        return self.values[centres, columns]


@dataclass(frozen=True)
class NormDecomposition:
    positive: float
    negative: float
    total: float

    def to_representation(self) -> Dict[str, float]:
        return {"positive": self.positive, "negative": self.negative, "total": self.total}


@dataclass(frozen=True)
class NegativityReport:
    time: float
    tolerance: float
    violations: Tuple[Tuple[float, float], ...]
    global_min: Tuple[float, float]

    @property
    def is_clean(self) -> bool:
        return not self.violations

    def to_representation(self) -> Dict[str, Any]:
        return {
            "time_fs": self.time,
            "tolerance": self.tolerance,
            "violation_count": len(self.violations),
            "global_min": {"x_nm": self.global_min[0], "q_per_nm": self.global_min[1]},
            "violations": [{"x_nm": x, "q_per_nm": q} for x, q in self.violations],
        }


@dataclass(frozen=True, eq=False)
class Trajectory:
    requested_times: Tuple[float, ...]
    times: Tuple[float, ...]
    snapshots: Tuple[SignedEnsemble, ...]
    final: SignedEnsemble
    final_time: float
    max_step_drift: float = 0.0
    cumulative_drift: float = 0.0


@dataclass
class SnapshotRecord:
    requested_time: float
    time: float
    files: Dict[str, str] = field(default_factory=dict)
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_representation(self) -> Dict[str, Any]:
        return {
            "requested_time_fs": self.requested_time,
            "time_fs": self.time,
            "files": self.files,
            "diagnostics": self.diagnostics,
        }


@dataclass
class RunManifest:
    """Everything a run produced: resolved config, snapshot index, checksums, summaries."""

    format: str
    scenario: str
    resolved_config: Dict[str, Any]
    convention: str
    snapshots: List[SnapshotRecord] = field(default_factory=list)
    files: List[Dict[str, Any]] = field(default_factory=list)
    collision: Dict[str, Any] = field(default_factory=dict)
    evolution: Dict[str, Any] = field(default_factory=dict)
    final_decomposition: Dict[str, float] = field(default_factory=dict)
    extras: Dict[str, Any] = field(default_factory=dict)

    def to_representation(self) -> Dict[str, Any]:
        return {
            "format": self.format,
            "scenario": self.scenario,
            "convention": self.convention,
            "resolved_config": self.resolved_config,
            "collision": self.collision,
            "evolution": self.evolution,
            "snapshots": [snapshot.to_representation() for snapshot in self.snapshots],
            "final_decomposition": self.final_decomposition,
            "files": self.files,
            "extras": self.extras,
        }


@dataclass(frozen=True)
class HeCollisionSpec:
    """Instantaneous scattering between wide Gaussian stand-ins for momentum eigenstates."""

    t_s: float
    k0: float
    k_final: float
    weight_mode: str = "auto_max_safe"
    safety: float = 0.9
    weight: Optional[float] = None
    x0_ref: Optional[float] = None
    safety_floor: float = 1e-14
    leak_margin: float = 5.0
    leak_threshold: float = 1e-6

    def to_representation(self) -> Dict[str, Any]:
        return {
            "t_s": self.t_s,
            "k0": self.k0,
            "k_final": self.k_final,
            "weight_mode": self.weight_mode,
            "safety": self.safety,
            "weight": self.weight,
            "x0_ref": self.x0_ref,
            "safety_floor": self.safety_floor,
        }


@dataclass(frozen=True)
class HeKernelCollisionSpec:
    """Scattering whose lost and gained terms are Wigner-weighted plane-wave kernels."""

    t_s: float
    k0: float
    k_final: float
    strength: Optional[float] = None
    safety: float = 0.9
    safety_floor: float = 1e-14
    rank_tolerance: float = 1e-8
    max_terms: int = 48

    def to_representation(self) -> Dict[str, Any]:
        return {
            "t_s": self.t_s,
            "k0": self.k0,
            "k_final": self.k_final,
            "strength": self.strength,
            "safety": self.safety,
            "safety_floor": self.safety_floor,
            "rank_tolerance": self.rank_tolerance,
            "max_terms": self.max_terms,
        }


@dataclass(frozen=True, eq=False)
class GsCollisionSpec:
    """
    Scattering out of an existing ensemble member.

    ``occupation`` defaults to weight·electron_count of the source term. Without an
    explicit ``final_state`` the final state is built like the positive packet of the
    eigenstate model (centred on the drifted reference, wave vector ``k_final``).
    """

    t_s: float
    k0: float
    k_final: float
    source_index: int = 0
    occupation: Optional[int] = None
    schedule: str = "instantaneous"
    rate: float = 0.0
    x0_ref: Optional[float] = None
    final_state: Optional[PureState] = None

    def to_representation(self) -> Dict[str, Any]:
        return {
            "t_s": self.t_s,
            "k0": self.k0,
            "k_final": self.k_final,
            "source_index": self.source_index,
            "occupation": self.occupation,
            "schedule": self.schedule,
            "rate": self.rate,
            "x0_ref": self.x0_ref,
        }


@dataclass(frozen=True, eq=False)
class RateMatrix:
    """Z[i, j] ≥ 0 is the rate (1/fs) from registered state j to state i."""

    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values, np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ShapeError("rate matrix must be square")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ShapeError("rates must be finite and non-negative")
        if np.any(np.diag(values) != 0):
            raise ShapeError("rate matrix diagonal must be zero")
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return self.values.shape[0]
