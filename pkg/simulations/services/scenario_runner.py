"""
End-to-end scenario pipeline: build → evolve to t_S → collide → evolve to t_end,
emitting charge density, Wigner field and negativity report at every snapshot.
"""
from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from django.conf import settings

from simulations.domain import (
    RunManifest,
    SignedEnsemble,
    SnapshotRecord,
    Trajectory,
)
from simulations.exceptions import SafetyAssertionError, SimulationError
from simulations.services import file_hash
from simulations.services.collision import (
    apply_gs_collision,
    apply_he_collision,
    apply_he_kernel_collision,
    build_collision_packets,
    calibrate_weight,
    continuous_transfer_hook,
    max_safe_weight,
    prepare_he_collision,
    register_state,
)
from simulations.services.diagnostics import (
    boundary_leak,
    marginal_consistency_error,
    norm_decomposition,
    scan_negativity,
    transmission_reflection,
    violation_clusters,
)
from simulations.services.grids import conjugate_momentum_grid, make_grid
from simulations.services.potentials import double_barrier, free_potential
from simulations.services.quantum_states import (
    charge_density,
    expectation_wave_vector,
    fidelity,
    gaussian_packet,
    superpose,
)
from simulations.services.scenario_config import ScenarioConfig
from simulations.services.schrodinger import Propagator, analytic_free_gaussian, evolve_ensemble
from simulations.services.snapshot_writer import emit_snapshot, write_json, write_norm_table
from simulations.services.units import DEFAULT_UNITS
from simulations.services.wigner import CONVENTION_TAG, marginal_position, wigner_from_ensemble

logger = logging.getLogger(__name__)

MANIFEST_FORMAT = "transport-lab-run/v1"
MARGINAL_WARNING = 1e-10
NORM_TABLE_NAME = "norm_decomposition.tsv"


def resolve_output_directory(config: ScenarioConfig, output_directory=None) -> Path:
    if output_directory is not None:
        return Path(output_directory)
    if config.output.directory:
        return Path(config.output.directory)
    return Path(settings.RUNS_ROOT) / config.name


def build_initial_ensemble(config: ScenarioConfig, grid) -> SignedEnsemble:
    packets = [gaussian_packet(grid, p.x0, p.k0, p.a0) for p in config.packets.wave_packets]
    if len(packets) == 1:
        state = packets[0]
    else:
        state = superpose(packets, config.packets.complex_coefficients())
    return SignedEnsemble.pure(state, electron_count=config.packets.electron_count)


def build_potential(config: ScenarioConfig, grid):
    potential = config.potential
    if potential.kind == "double_barrier":
        return double_barrier(grid, potential.center, potential.barrier_width, potential.height, potential.well_width)
    return free_potential(grid)


class ScenarioRun:
    """One execution of a validated scenario into one output directory."""

    def __init__(self, config: ScenarioConfig, output_directory=None, progress: bool = False):
        self.config = config
        self.directory = resolve_output_directory(config, output_directory)
        self.progress = progress
        self.stage = "setup"

        self.grid = make_grid(config.grid.x_min, config.grid.x_max, config.grid.n_points)
        self.kgrid = conjugate_momentum_grid(self.grid)
        self.potential = build_potential(config, self.grid)
        self.propagator = Propagator(
            grid=self.grid,
            potential=self.potential,
            dt=config.evolution.dt,
            effective_mass=config.mass.effective_mass,
            laplacian=config.evolution.laplacian,
            substeps=config.evolution.substeps,
        )
        self.records: List[SnapshotRecord] = []
        self.norm_rows: List[Dict[str, Any]] = []
        self.collision_summary: Dict[str, Any] = {"mode": config.collision.mode}
        self.leak_exceeded_at: List[float] = []

    @property
    def divider(self) -> float:
        if self.config.potential.kind == "double_barrier":
            return self.config.potential.center
        return 0.5 * (self.grid.x_min + self.grid.x_max)

    def run(self) -> RunManifest:
        self.directory.mkdir(parents=True, exist_ok=True)
        with file_hash.run_directory_lock(self.directory):
            file_hash.clear_previous_outputs(self.directory)
            try:
                return self._run()
            except SimulationError as exc:
                self._write_failure(exc)
                raise

    def _write_failure(self, exc: SimulationError):
        payload = {"stage": self.stage, "error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, SafetyAssertionError):
            payload.update({"min_density": exc.min_density, "position_nm": exc.position})
        try:
            write_json(self.directory / file_hash.FAILURE_NAME, payload)
        except SimulationError:
            logger.exception("Could not write failure dump for %s", self.directory)
        logger.error("Scenario %r failed during %s: %s", self.config.name, self.stage, exc)

    def _run(self) -> RunManifest:
        config = self.config
        evolution = config.evolution
        collision = config.collision
        logger.info(
            "Running scenario %r: %d nodes, dt=%s fs x %d substeps (%s), collision %s",
            config.name, self.grid.n_points, evolution.dt, evolution.substeps, evolution.laplacian, collision.mode,
        )

        self.stage = "initial state"
        initial = build_initial_ensemble(config, self.grid)
        kinetic = [
            self.propagator.kinetic_energy(gaussian_packet(self.grid, p.x0, p.k0, p.a0))
            for p in config.packets.wave_packets
        ]
        initial_energy = self.propagator.energy(initial.terms[0].state)

        requested = sorted(evolution.snapshot_times)
        if collision.mode == "none":
            t_s, before, after = evolution.t_end, requested, []
        else:
            # a snapshot at exactly t_S shows the state right after scattering
            t_s = collision.t_s
            before = [t for t in requested if t < t_s]
            after = [t for t in requested if t >= t_s]

        self.stage = "evolution before collision"
        first = evolve_ensemble(self.propagator, initial, 0.0, t_s, before, progress=self.progress)
        pre_energy = self.propagator.energy(first.final.terms[0].state)
        self._emit_trajectory(first)

        self.stage = "collision"
        post, hook = self._collide(first.final, t_s)

        self.stage = "evolution after collision"
        second = evolve_ensemble(
            self.propagator, post, t_s, evolution.t_end, after, step_hook=hook, progress=self.progress
        )
        self._emit_trajectory(second)

        self.stage = "summary"
        final_density = charge_density(second.final)
        final_decomposition = norm_decomposition(final_density)
        write_norm_table(self.directory / NORM_TABLE_NAME, self.norm_rows)

        extras = {
            "units": DEFAULT_UNITS.to_representation(),
            "initial_kinetic_energies_ev": kinetic,
            "initial_wave_vector": expectation_wave_vector(initial),
            "energy_before_collision_ev": {"initial": initial_energy, "at_collision": pre_energy},
            "final_trace": second.final.trace,
            "final_term_count": len(second.final.terms),
            "boundary_leak_final": boundary_leak(final_density, config.output.leak_margin),
            "boundary_leak_threshold": config.output.leak_threshold,
            "boundary_leak_exceeded": bool(self.leak_exceeded_at),
            "boundary_leak_exceeded_at": self.leak_exceeded_at,
        }
        oracle = self._oracle_fidelity(second.final)
        if oracle is not None:
            extras["oracle_fidelity"] = oracle

        manifest = RunManifest(
            format=MANIFEST_FORMAT,
            scenario=config.name,
            resolved_config=config.resolved(),
            convention=CONVENTION_TAG,
            snapshots=self.records,
            collision=self.collision_summary,
            evolution={
                **self.propagator.to_representation(),
                "steps": int(round(evolution.t_end / evolution.dt)),
                "max_step_norm_drift": max(first.max_step_drift, second.max_step_drift),
                "cumulative_norm_drift": first.cumulative_drift + second.cumulative_drift,
            },
            final_decomposition=final_decomposition.to_representation(),
            extras=extras,
        )
        manifest.files = file_hash.write_manifest(self.directory, manifest.to_representation())
        logger.info(
            "Scenario %r finished: decomposition %.6f / %.6f / %.6f, manifest in %s",
            config.name, final_decomposition.positive, final_decomposition.negative,
            final_decomposition.total, self.directory,
        )
        return manifest

    def _collide(self, e_pre: SignedEnsemble, t_s: float) -> Tuple[SignedEnsemble, Optional[Any]]:
        collision = self.config.collision
        mass = self.config.mass.effective_mass
        if collision.mode == "none":
            return e_pre, None

        before = norm_decomposition(charge_density(e_pre))
        hook = None
        if collision.mode == "he":
            spec = collision.to_spec()
            event = prepare_he_collision(e_pre, spec, mass, collision.a0)
            if collision.weight_mode == "calibrated":
                calibration = self._calibrate(e_pre, event, t_s)
                self.collision_summary["calibration"] = calibration.to_representation()
                event = replace(event, weight=calibration.weight)
            post = apply_he_collision(e_pre, spec, mass, collision.a0, event=event)
            self.collision_summary.update(event.to_representation())
        elif collision.mode == "he_kernel":
            post, summary = apply_he_kernel_collision(e_pre, collision.to_spec())
            self.collision_summary.update(summary)
        elif collision.schedule == "instantaneous":
            post = apply_gs_collision(e_pre, collision.to_spec(), mass, collision.a0)
        else:
            packets = build_collision_packets(e_pre, collision.to_spec(), mass, collision.a0)
            post, target = register_state(e_pre, packets.positive)
            hook = continuous_transfer_hook(
                len(post.terms), collision.source_index, target, collision.rate, self.config.evolution.dt
            )
            self.collision_summary.update(packets.to_representation())

        after = norm_decomposition(charge_density(post))
        self.collision_summary.update({
            "t_s": t_s,
            "k0": collision.k0,
            "k_final": collision.k_final,
            "weights_after": post.weights.tolist(),
            "decomposition_before": before.to_representation(),
            "decomposition_after": after.to_representation(),
            "min_density_after": float(np.min(charge_density(post).values)),
        })
        return post, hook

    def _calibrate(self, e_pre: SignedEnsemble, event, t_s: float):
        collision = self.config.collision
        target_time = collision.calibration_time if collision.calibration_time is not None else self.config.evolution.t_end
        components = e_pre.extended([(1.0, event.packets.positive), (1.0, event.packets.negative)])
        trajectory = evolve_ensemble(self.propagator, components, t_s, target_time, progress=self.progress)
        terms = trajectory.final.terms
        base = charge_density(SignedEnsemble(terms=terms[:-2], electron_count=e_pre.electron_count)).values
        delta = terms[-2].state.probability - terms[-1].state.probability
        # beta = 1 ceiling; collision.safety only sets the auto_max_safe weight
        ceiling = max_safe_weight(e_pre, event.packets.positive, event.packets.negative, 1.0, collision.safety_floor)
        self.collision_summary["calibration_time_fs"] = trajectory.final_time
        self.collision_summary["calibration_ceiling"] = ceiling
        return calibrate_weight(
            base, delta, self.grid.dx, ceiling,
            target=collision.target_negative_norm, tolerance=collision.calibration_tolerance,
        )

    def _emit_trajectory(self, trajectory: Trajectory):
        output = self.config.output
        for requested, time, ensemble in zip(trajectory.requested_times, trajectory.times, trajectory.snapshots):
            label = f"snap{len(self.records):02d}"
            density = charge_density(ensemble)
            field = wigner_from_ensemble(ensemble, self.kgrid)
            consistency = marginal_consistency_error(marginal_position(field), density)
            if consistency > MARGINAL_WARNING:
                logger.warning("Snapshot %s: marginal differs from charge density by %.3e", label, consistency)
            report = scan_negativity(density, output.negativity_tol, time)
            decomposition = norm_decomposition(density)
            reflected, transmitted = transmission_reflection(density, self.divider)
            leak = boundary_leak(density, output.leak_margin)
            if leak > output.leak_threshold:
                logger.warning(
                    "Snapshot %s at t=%.6g fs: %.3e of the charge sits in the %.4g nm wall margins (threshold %.1e)",
                    label, time, leak, output.leak_margin, output.leak_threshold,
                )
                self.leak_exceeded_at.append(time)
            diagnostics = {
                "min_q": report.global_min[1],
                "min_x_nm": report.global_min[0],
                "violation_count": len(report.violations),
                "clusters": violation_clusters(report, output.cluster_gap),
                "decomposition": decomposition.to_representation(),
                "reflection": reflected,
                "transmission": transmitted,
                "divider_nm": self.divider,
                "boundary_leak": leak,
                "boundary_leak_exceeded": leak > output.leak_threshold,
                "marginal_consistency_error": consistency,
                "trace": ensemble.trace,
                "term_count": len(ensemble.terms),
            }
            files = emit_snapshot(
                self.directory, label, time, density, field, report,
                extra={
                    "clusters": diagnostics["clusters"],
                    "decomposition": diagnostics["decomposition"],
                },
                wigner_format=output.wigner_format,
                stride=output.wigner_stride,
            )
            self.records.append(SnapshotRecord(requested_time=requested, time=time, files=files, diagnostics=diagnostics))
            self.norm_rows.append({
                "time_fs": time,
                **decomposition.to_representation(),
                "min_q": report.global_min[1],
                "min_x_nm": report.global_min[0],
            })

    def _oracle_fidelity(self, final: SignedEnsemble) -> Optional[float]:
        config = self.config
        if (
            config.collision.mode != "none"
            or config.potential.kind != "free"
            or len(config.packets.wave_packets) != 1
            or len(final.terms) != 1
        ):
            return None
        packet = config.packets.wave_packets[0]
        oracle = analytic_free_gaussian(
            self.grid, packet.x0, packet.k0, packet.a0, config.mass.effective_mass, config.evolution.t_end
        )
        value = fidelity(final.terms[0].state, oracle)
        logger.info("Oracle fidelity at t=%.6g fs: 1 - %.3e", config.evolution.t_end, 1.0 - value)
        return value


def run_scenario(config: ScenarioConfig, output_directory=None, progress: bool = False) -> RunManifest:
    return ScenarioRun(config, output_directory=output_directory, progress=progress).run()


