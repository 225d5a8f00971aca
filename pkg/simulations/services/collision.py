"""
Collision models as instantaneous ensemble transformations.

The eigenstate model adds (+w, ψ_P) and subtracts (−w, ψ_N), where ψ_N is a wide
packet around k0 that need not be an ensemble member. The general-state model only
moves weight out of members that exist, so weights (and the charge density) stay
non-negative.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from simulations.domain import (
    GsCollisionSpec,
    HeCollisionSpec,
    HeKernelCollisionSpec,
    PureState,
    RateMatrix,
    SignedEnsemble,
)
from simulations.exceptions import (
    ConfigurationError,
    InvalidPreconditionError,
    SafetyAssertionError,
    StepSizeError,
)
from simulations.services.diagnostics import boundary_leak, norm_decomposition
from simulations.services.quantum_states import centroid, charge_density, gaussian_packet
from simulations.services.schrodinger import StepHook, spreading_factor
from simulations.services.units import DEFAULT_UNITS, UnitSystem
from simulations.services.wigner import doubled_resolution, wigner_at_wave_vector

logger = logging.getLogger(__name__)

WEIGHT_MODES = ("auto_max_safe", "explicit", "calibrated")
ROUND_OFF_ALLOWANCE = 64.0 * np.finfo(float).eps
WEIGHT_ZERO_TOLERANCE = 1e-12

PacketSpec = Union[HeCollisionSpec, GsCollisionSpec]


@dataclass(frozen=True, eq=False)
class CollisionPackets:
    positive: PureState
    negative: PureState
    x0_ref: float
    center: float
    width: float

    def to_representation(self) -> Dict[str, float]:
        return {"x0_ref": self.x0_ref, "center": self.center, "width": self.width}


@dataclass(frozen=True, eq=False)
class HeCollisionEvent:
    packets: CollisionPackets
    safe_weight: float
    weight: float

    def to_representation(self) -> Dict[str, Any]:
        return {
            **self.packets.to_representation(),
            "safe_weight": self.safe_weight,
            "weight": self.weight,
        }


@dataclass
class CalibrationResult:
    weight: float
    achieved_negative: float
    target_negative: float
    reachable: bool
    achievable_range: Tuple[float, float]
    iterations: int = 0

    def to_representation(self) -> Dict[str, Any]:
        return {
            "weight": self.weight,
            "achieved_negative_norm": self.achieved_negative,
            "target_negative_norm": self.target_negative,
            "reachable": self.reachable,
            "achievable_range": list(self.achievable_range),
            "iterations": self.iterations,
        }


def collision_packet_width(a0: float, effective_mass: float, t_s: float, units: UnitSystem = DEFAULT_UNITS) -> float:
    """a_0S = 2·a0·√(1 + 4ħ²t_S²/(m*²a0⁴))."""
    return 2.0 * a0 * spreading_factor(a0, effective_mass, t_s, units)


def default_x0_ref(e_pre: SignedEnsemble, k0: float, effective_mass: float, t_s: float,
                   units: UnitSystem = DEFAULT_UNITS) -> float:
    """Charge centroid at t_S carried back to t = 0 along the group velocity."""
    return centroid(e_pre) - units.group_velocity(k0, effective_mass) * t_s


def build_collision_packets(
    e_pre: SignedEnsemble,
    spec: PacketSpec,
    effective_mass: float,
    a0: float,
    x0_ref: Optional[float] = None,
    units: UnitSystem = DEFAULT_UNITS,
    leak_margin: float = 5.0,
    leak_threshold: float = 1e-6,
) -> CollisionPackets:
    """ψ_P (wave vector k_F) and ψ_N (wave vector k0), both wide, centred on x0_ref + v·t_S."""
    if spec.t_s < 0:
        raise InvalidPreconditionError(f"scattering time must be non-negative, got {spec.t_s}")
    if x0_ref is None:
        x0_ref = spec.x0_ref
    if x0_ref is None:
        x0_ref = default_x0_ref(e_pre, spec.k0, effective_mass, spec.t_s, units)
    width = collision_packet_width(a0, effective_mass, spec.t_s, units)
    center = x0_ref + units.group_velocity(spec.k0, effective_mass) * spec.t_s

    grid = e_pre.grid
    negative = gaussian_packet(grid, center, spec.k0, width)
    positive = gaussian_packet(grid, center, spec.k_final, width)
    leak = boundary_leak(negative, leak_margin)
    if leak > leak_threshold:
        raise ConfigurationError(
            f"collision packets (centre {center:.4g} nm, width {width:.4g} nm) leak {leak:.3e} "
            f"into the {leak_margin} nm wall margins"
        )
    return CollisionPackets(positive=positive, negative=negative, x0_ref=x0_ref, center=center, width=width)


def max_safe_weight(
    e_pre: SignedEnsemble,
    positive: PureState,
    negative: PureState,
    safety: float,
    safety_floor: float = 1e-14,
) -> float:
    """
    β·min Q_pre/|ψ_N|² over nodes where |ψ_N|²·dx reaches the floor.

    Dropping the +w|ψ_P|² term makes the bound conservative.
    """
    if not 0 < safety <= 1:
        raise ConfigurationError(f"safety factor must lie in (0, 1], got {safety}")
    if positive.grid != e_pre.grid or negative.grid != e_pre.grid:
        raise InvalidPreconditionError("collision packets live on a different grid")
    q_pre = charge_density(e_pre).values
    subtracted = negative.probability
    support = subtracted * e_pre.grid.dx >= safety_floor
    if not np.any(support):
        raise InvalidPreconditionError("subtracted packet has no support above the safety floor")
    if np.any(q_pre[support] <= 0):
        x = e_pre.grid.nodes[support][np.argmin(q_pre[support])]
        raise InvalidPreconditionError(
            f"pre-collision density is not positive at x={x:.4g} nm where the subtracted packet lives"
        )
    return safety * float(np.min(q_pre[support] / subtracted[support]))


def _assert_post_collision(e_pre: SignedEnsemble, e_post: SignedEnsemble, scale: np.ndarray, stage: str):
    q_post = charge_density(e_post).values
    allowance = ROUND_OFF_ALLOWANCE * float(np.max(scale))
    lowest = int(np.argmin(q_post))
    if q_post[lowest] < -allowance:
        x = float(e_pre.grid.nodes[lowest])
        raise SafetyAssertionError(
            f"{stage}: charge density {q_post[lowest]:.3e} at x={x:.4g} nm right after scattering",
            min_density=float(q_post[lowest]),
            position=x,
        )


def prepare_he_collision(
    e_pre: SignedEnsemble,
    spec: HeCollisionSpec,
    effective_mass: float,
    a0: float,
    units: UnitSystem = DEFAULT_UNITS,
) -> HeCollisionEvent:
    if spec.weight_mode not in WEIGHT_MODES:
        raise ConfigurationError(f"unknown weight_mode {spec.weight_mode!r}")
    packets = build_collision_packets(
        e_pre, spec, effective_mass, a0, units=units,
        leak_margin=spec.leak_margin, leak_threshold=spec.leak_threshold,
    )
    safe = max_safe_weight(e_pre, packets.positive, packets.negative, spec.safety, spec.safety_floor)
    if spec.weight_mode == "explicit":
        if spec.weight is None or not spec.weight > 0:
            raise ConfigurationError("explicit weight_mode needs a positive weight")
        weight = float(spec.weight)
        if weight > safe:
            logger.warning("Explicit collision weight %.4g exceeds the safe bound %.4g", weight, safe)
    else:
        weight = safe
    return HeCollisionEvent(packets=packets, safe_weight=safe, weight=weight)


def apply_he_collision(
    e_pre: SignedEnsemble,
    spec: HeCollisionSpec,
    effective_mass: float,
    a0: float,
    units: UnitSystem = DEFAULT_UNITS,
    event: Optional[HeCollisionEvent] = None,
) -> SignedEnsemble:
    """ρ_B + w|ψ_P⟩⟨ψ_P| − w|ψ_N⟩⟨ψ_N|, with Q(t_S⁺) ≥ 0 asserted."""
    if event is None:
        event = prepare_he_collision(e_pre, spec, effective_mass, a0, units)
    if not event.weight > 0:
        raise ConfigurationError(f"collision weight must be positive, got {event.weight}")
    w = event.weight
    e_post = e_pre.extended([(w, event.packets.positive), (-w, event.packets.negative)])
    scale = (
        np.abs(charge_density(e_pre).values)
        + w * event.packets.positive.probability
        + w * event.packets.negative.probability
    )
    _assert_post_collision(e_pre, e_post, scale, "eigenstate collision")
    logger.info(
        "Eigenstate collision at t=%.4g fs: w=%.6g (safe %.6g), packets at %.4g nm, width %.4g nm",
        spec.t_s, w, event.safe_weight, event.packets.center, event.packets.width,
    )
    return e_post


def negative_norm_for_weight(base: np.ndarray, delta: np.ndarray, dx: float, weight: float) -> float:
    """Negative part of Q_B + w·(|ψ_P|² − |ψ_N|²)."""
    return float(np.sum(np.minimum(base + weight * delta, 0.0)) * dx)


def calibrate_weight(
    base: np.ndarray,
    delta: np.ndarray,
    dx: float,
    max_weight: float,
    target: float = -0.025,
    tolerance: float = 1e-4,
    max_iterations: int = 200,
) -> CalibrationResult:
    """
    Bisect w ∈ (0, max_weight] so that the negative norm of Q_B + w·δ hits ``target``.

    Evolution is linear and does not depend on w, so ``base`` and ``delta`` are the
    evolved densities of the weight-independent part and of the ±packet pair. With a
    non-negative base the negative norm is non-increasing in w.
    """
    if target > 0:
        raise ConfigurationError("target negative norm must be <= 0")
    if not max_weight > 0:
        raise ConfigurationError("calibration needs a positive upper weight bound")
    floor = negative_norm_for_weight(base, delta, dx, max_weight)
    achievable = (floor, negative_norm_for_weight(base, delta, dx, 0.0))
    if floor > target + tolerance:
        logger.warning(
            "Target negative norm %.4g is out of reach; largest safe weight gives %.4g", target, floor
        )
        return CalibrationResult(
            weight=max_weight, achieved_negative=floor, target_negative=target,
            reachable=False, achievable_range=achievable,
        )

    low, high = 0.0, max_weight
    weight, achieved = max_weight, floor
    iterations = 0
    while abs(achieved - target) > tolerance and iterations < max_iterations:
        iterations += 1
        weight = 0.5 * (low + high)
        achieved = negative_norm_for_weight(base, delta, dx, weight)
        if achieved > target:
            low = weight
        else:
            high = weight
    logger.info("Calibrated collision weight %.6g -> negative norm %.6g (%d iterations)", weight, achieved, iterations)
    return CalibrationResult(
        weight=weight, achieved_negative=achieved, target_negative=target,
        reachable=True, achievable_range=achievable, iterations=iterations,
    )


def kernel_safe_strength(q_pre: np.ndarray, wigner_row: np.ndarray, dx: float, safety: float, safety_floor: float) -> float:
    if not 0 < safety <= 1:
        raise ConfigurationError(f"safety factor must lie in (0, 1], got {safety}")
    support = wigner_row * dx >= safety_floor
    if not np.any(support):
        raise InvalidPreconditionError("Wigner slice at k0 has no support above the safety floor")
    if np.any(q_pre[support] <= 0):
        raise InvalidPreconditionError("pre-collision density is not positive where the loss kernel lives")
    return safety * float(np.min(q_pre[support] / wigner_row[support]))


def apply_he_kernel_collision(e_pre: SignedEnsemble, spec: HeKernelCollisionSpec) -> Tuple[SignedEnsemble, Dict[str, Any]]:
    """
    Lose c·F_W((x+x′)/2, k0)·e^{ik0(x−x′)} and gain the same kernel at k_F.

    The loss kernel is diagonalised on the support window of F_W(·, k0); the gain kernel
    is its conjugation by e^{i(k_F−k0)x}, so each eigenvector enters twice with opposite
    weights and the diagonal of the density matrix is unchanged.
    """
    grid = e_pre.grid
    dx = grid.dx
    row = wigner_at_wave_vector(e_pre, spec.k0)
    q_pre = charge_density(e_pre).values
    if spec.strength is not None:
        if not spec.strength > 0:
            raise ConfigurationError("kernel strength must be positive")
        strength = float(spec.strength)
    else:
        strength = kernel_safe_strength(q_pre, row, dx, spec.safety, spec.safety_floor)

    window = np.flatnonzero(np.abs(row) * dx >= spec.safety_floor)
    window = window[(window > 0) & (window < grid.n_points - 1)]
    if window.size == 0:
        raise InvalidPreconditionError("Wigner slice at k0 vanishes on the grid interior")
    start, stop = int(window[0]), int(window[-1]) + 1
    indices = np.arange(start, stop)

    # F_W at the half-node midpoints (x_a + x_b)/2 via the doubled-resolution grid
    half = doubled_resolution(row.astype(np.complex128)).real
    nodes = grid.nodes[indices]
    hankel = half[indices[:, None] + indices[None, :]]
    phase = np.exp(1j * spec.k0 * nodes)
    kernel = phase[:, None] * hankel * np.conj(phase)[None, :]
    eigenvalues, eigenvectors = np.linalg.eigh(kernel)

    order = np.argsort(-np.abs(eigenvalues), kind="stable")
    cutoff = spec.rank_tolerance * float(np.max(np.abs(eigenvalues)))
    kept = [i for i in order if abs(eigenvalues[i]) > cutoff][: spec.max_terms]
    shift = np.exp(1j * (spec.k_final - spec.k0) * grid.nodes)

    pairs = []
    for i in kept:
        amplitudes = np.zeros(grid.n_points, dtype=np.complex128)
        amplitudes[indices] = eigenvectors[:, i] / math.sqrt(dx)
        loss = PureState(grid=grid, amplitudes=amplitudes)
        gain = PureState(grid=grid, amplitudes=shift * amplitudes)
        weight = strength * float(eigenvalues[i]) * dx
        pairs.extend([(weight, gain), (-weight, loss)])

    e_post = e_pre.extended(pairs)
    scale = np.abs(q_pre) + sum(abs(w) * s.probability for w, s in pairs)
    _assert_post_collision(e_pre, e_post, scale, "kernel collision")
    summary = {
        "strength": strength,
        "window": [float(grid.nodes[start]), float(grid.nodes[stop - 1])],
        "rank": len(kept),
        "discarded_eigenvalues": int(eigenvalues.size - len(kept)),
        "post_collision": norm_decomposition(charge_density(e_post)).to_representation(),
    }
    logger.info(
        "Kernel collision at t=%.4g fs: strength %.6g, %d eigen-terms on [%.4g, %.4g] nm",
        spec.t_s, strength, len(kept), summary["window"][0], summary["window"][1],
    )
    return e_post, summary


def source_occupation(e_pre: SignedEnsemble, spec: GsCollisionSpec) -> int:
    if not 0 <= spec.source_index < len(e_pre.terms):
        raise InvalidPreconditionError(f"no ensemble member with index {spec.source_index}")
    if spec.occupation is not None:
        return int(spec.occupation)
    return int(round(e_pre.terms[spec.source_index].weight * e_pre.electron_count))


def apply_gs_collision(
    e_pre: SignedEnsemble,
    spec: GsCollisionSpec,
    effective_mass: float,
    a0: float,
    units: UnitSystem = DEFAULT_UNITS,
) -> SignedEnsemble:
    """Move one electron (weight 1/M) from the source member into ψ_F."""
    if not e_pre.is_non_negative():
        raise InvalidPreconditionError("general-state scattering needs a non-negative ensemble")
    occupation = source_occupation(e_pre, spec)
    if occupation < 1:
        raise InvalidPreconditionError(
            f"source member holds {occupation} electrons; scattering would subtract a non-existent state"
        )
    quantum = 1.0 / e_pre.electron_count
    source = e_pre.terms[spec.source_index]
    remaining = source.weight - quantum
    if remaining < 0:
        if remaining < -WEIGHT_ZERO_TOLERANCE:
            raise InvalidPreconditionError(
                f"source weight {source.weight:.6g} is smaller than one electron ({quantum:.6g})"
            )
        remaining = 0.0

    final_state = spec.final_state
    if final_state is None:
        final_state = build_collision_packets(e_pre, spec, effective_mass, a0, units=units).positive

    weights = e_pre.weights.tolist()
    weights[spec.source_index] = remaining
    e_post = e_pre.with_weights(weights).extended([(quantum, final_state)])
    kept = tuple(term for term in e_post.terms if term.weight != 0.0)
    e_post = replace(e_post, terms=kept)
    logger.info(
        "General-state collision at t=%.4g fs: member %d (%d electrons) -> final state, weight %.6g",
        spec.t_s, spec.source_index, occupation, quantum,
    )
    return e_post


def register_state(e: SignedEnsemble, state: PureState) -> Tuple[SignedEnsemble, int]:
    """Append ``state`` with weight 0 so rate steps can feed it; returns its index."""
    return e.extended([(0.0, state)]), len(e.terms)


def rate_step_weights(weights: np.ndarray, rates: RateMatrix, dt: float) -> np.ndarray:
    """wᵢ ← wᵢ + (dt/2π)·Σⱼ(Zᵢⱼwⱼ − Zⱼᵢwᵢ)."""
    weights = np.asarray(weights, dtype=float)
    if rates.size != weights.size:
        raise InvalidPreconditionError("rate matrix does not match the registered states")
    if not dt > 0:
        raise ConfigurationError(f"rate step needs a positive dt, got {dt}")
    if np.any(weights < 0):
        raise InvalidPreconditionError("rate steps are defined for non-negative weights only")
    scale = dt / (2.0 * math.pi)
    outflow = rates.values.sum(axis=0)
    if scale * float(np.max(outflow, initial=0.0)) > 1.0:
        raise StepSizeError(
            f"dt={dt} fs would drain more than the full weight of a state in one step"
        )
    return weights * (1.0 - scale * outflow) + scale * (rates.values @ weights)


def general_collision_step(e: SignedEnsemble, rates: RateMatrix, dt: float) -> SignedEnsemble:
    return e.with_weights(rate_step_weights(e.weights, rates, dt))


def continuous_transfer_hook(n_states: int, source: int, target: int, rate: float, dt: float) -> StepHook:
    """Step hook applying a single source→target channel after every transport step."""
    values = np.zeros((n_states, n_states))
    values[target, source] = rate
    rates = RateMatrix(values=values)

    def hook(weights: np.ndarray, time: float) -> np.ndarray:
        return rate_step_weights(weights, rates, dt)

    return hook
