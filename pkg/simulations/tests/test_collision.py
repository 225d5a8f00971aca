import numpy as np

from simulations.domain import GsCollisionSpec, HeCollisionSpec, HeKernelCollisionSpec, RateMatrix, SignedEnsemble
from simulations.exceptions import (
    ConfigurationError,
    InvalidPreconditionError,
    ShapeError,
    StepSizeError,
)
from simulations.services.collision import (
    apply_gs_collision,
    apply_he_collision,
    apply_he_kernel_collision,
    build_collision_packets,
    calibrate_weight,
    collision_packet_width,
    continuous_transfer_hook,
    default_x0_ref,
    general_collision_step,
    max_safe_weight,
    negative_norm_for_weight,
    prepare_he_collision,
    rate_step_weights,
    register_state,
)
from simulations.services.grids import make_grid
from simulations.services.quantum_states import (
    centroid,
    charge_density,
    expectation_position,
    expectation_wave_vector,
    gaussian_packet,
)
from simulations.services.units import DEFAULT_UNITS
from simulations.tests.base import NumericsTestCase

MASS = 0.2


class CollisionFixtureMixin:
    def setUp(self):
        self.grid = make_grid(0.0, 300.0, 601)
        self.state = gaussian_packet(self.grid, 120.0, 0.69, 10.0)
        self.ensemble = SignedEnsemble.pure(self.state, electron_count=2)

    def he_spec(self, **overrides):
        options = {"t_s": 6.0, "k0": 0.69, "k_final": -0.69, "safety_floor": 1e-4, **overrides}
        return HeCollisionSpec(**options)


class CollisionPacketTests(CollisionFixtureMixin, NumericsTestCase):
    def test_width_at_time_zero(self):
        self.assertEqual(collision_packet_width(15.0, MASS, 0.0), 30.0)

    def test_width_grows_with_time(self):
        self.assertGreater(collision_packet_width(15.0, MASS, 6.0), 30.0)

    def test_packets_sit_on_the_drifted_reference(self):
        packets = build_collision_packets(self.ensemble, self.he_spec(x0_ref=118.0), MASS, 10.0)
        velocity = DEFAULT_UNITS.group_velocity(0.69, MASS)
        self.assertAlmostEqual(packets.center, 118.0 + velocity * 6.0)
        self.assertAlmostEqual(velocity * 6.0, 2.4, delta=0.05)
        self.assertAlmostEqual(packets.width, collision_packet_width(10.0, MASS, 6.0))
        self.assertAlmostEqual(expectation_position(packets.negative), packets.center, places=6)
        self.assertAlmostEqual(expectation_wave_vector(packets.negative), 0.69, places=6)
        self.assertAlmostEqual(expectation_wave_vector(packets.positive), -0.69, places=6)
        self.assertAlmostEqual(packets.positive.norm, 1.0, places=12)
        self.assertAllClose(packets.positive.probability, packets.negative.probability, atol=1e-14)

    def test_default_reference_tracks_the_centroid(self):
        x0_ref = default_x0_ref(self.ensemble, 0.69, MASS, 6.0)
        packets = build_collision_packets(self.ensemble, self.he_spec(), MASS, 10.0)
        self.assertAlmostEqual(packets.x0_ref, x0_ref)
        self.assertAlmostEqual(packets.center, centroid(self.ensemble), places=9)

    def test_packets_must_stay_off_the_walls(self):
        with self.assertRaises(ConfigurationError):
            build_collision_packets(self.ensemble, self.he_spec(x0_ref=10.0), MASS, 10.0)

    def test_negative_scattering_time(self):
        with self.assertRaises(InvalidPreconditionError):
            build_collision_packets(self.ensemble, self.he_spec(t_s=-1.0), MASS, 10.0)


class EigenstateCollisionTests(CollisionFixtureMixin, NumericsTestCase):
    def test_safe_weight_is_linear_in_safety(self):
        packets = build_collision_packets(self.ensemble, self.he_spec(), MASS, 10.0)
        full = max_safe_weight(self.ensemble, packets.positive, packets.negative, 1.0, 1e-4)
        half = max_safe_weight(self.ensemble, packets.positive, packets.negative, 0.5, 1e-4)
        self.assertGreater(full, 0.0)
        self.assertAlmostEqual(half, 0.5 * full, places=14)

    def test_safe_weight_rejects_bad_safety(self):
        packets = build_collision_packets(self.ensemble, self.he_spec(), MASS, 10.0)
        for safety in (0.0, 1.5):
            with self.subTest(safety=safety), self.assertRaises(ConfigurationError):
                max_safe_weight(self.ensemble, packets.positive, packets.negative, safety)

    def test_collision_appends_a_signed_pair(self):
        post = apply_he_collision(self.ensemble, self.he_spec(), MASS, 10.0)
        self.assertEqual(len(post.terms), 3)
        weights = post.weights
        self.assertGreater(weights[1], 0.0)
        self.assertEqual(weights[1], -weights[2])
        self.assertEqual(post.trace, 1.0)
        self.assertEqual(post.electron_count, 2)
        self.assertGreaterEqual(charge_density(post).values.min(), -1e-15)

    def test_charge_density_is_unchanged_at_the_scattering_time(self):
        post = apply_he_collision(self.ensemble, self.he_spec(), MASS, 10.0)
        self.assertAllClose(charge_density(post).values, charge_density(self.ensemble).values, atol=1e-14)

    def test_explicit_weight(self):
        event = prepare_he_collision(self.ensemble, self.he_spec(weight_mode="explicit", weight=1e-3), MASS, 10.0)
        self.assertEqual(event.weight, 1e-3)
        with self.assertRaises(ConfigurationError):
            prepare_he_collision(self.ensemble, self.he_spec(weight_mode="explicit"), MASS, 10.0)
        with self.assertRaises(ConfigurationError):
            prepare_he_collision(self.ensemble, self.he_spec(weight_mode="guess"), MASS, 10.0)

    def test_explicit_weight_above_the_bound_is_reported(self):
        safe = prepare_he_collision(self.ensemble, self.he_spec(), MASS, 10.0).safe_weight
        spec = self.he_spec(weight_mode="explicit", weight=10 * safe)
        with self.assertLogs("simulations.services.collision", "WARNING"):
            prepare_he_collision(self.ensemble, spec, MASS, 10.0)

    def test_subtracted_packet_outside_the_ensemble(self):
        narrow = SignedEnsemble.pure(gaussian_packet(self.grid, 50.0, 0.69, 3.0))
        spec = self.he_spec(t_s=0.0, x0_ref=200.0, safety_floor=1e-14)
        with self.assertRaises(InvalidPreconditionError):
            apply_he_collision(narrow, spec, MASS, 5.0)


class CalibrationTests(NumericsTestCase):
    def setUp(self):
        self.base = np.array([1.0, 1.0, 1.0])
        self.delta = np.array([-2.0, 1.0, 1.0])

    def test_negative_norm_is_monotone(self):
        values = [negative_norm_for_weight(self.base, self.delta, 1.0, w) for w in np.linspace(0, 1, 11)]
        self.assertTrue(all(b <= a for a, b in zip(values, values[1:])))

    def test_bisection_hits_the_target(self):
        result = calibrate_weight(self.base, self.delta, 1.0, 1.0, target=-0.025, tolerance=1e-6)
        self.assertTrue(result.reachable)
        self.assertAlmostEqual(result.achieved_negative, -0.025, delta=1e-6)
        self.assertAlmostEqual(result.weight, 0.5125, delta=1e-6)
        self.assertEqual(result.achievable_range, (-1.0, 0.0))

    def test_unreachable_target_keeps_the_bound(self):
        with self.assertLogs("simulations.services.collision", "WARNING"):
            result = calibrate_weight(self.base, self.delta, 1.0, 0.4, target=-0.025)
        self.assertFalse(result.reachable)
        self.assertEqual(result.weight, 0.4)
        self.assertEqual(result.achievable_range, (0.0, 0.0))
        self.assertEqual(result.to_representation()["achievable_range"], [0.0, 0.0])

    def test_invalid_arguments(self):
        with self.assertRaises(ConfigurationError):
            calibrate_weight(self.base, self.delta, 1.0, 1.0, target=0.1)
        with self.assertRaises(ConfigurationError):
            calibrate_weight(self.base, self.delta, 1.0, 0.0)


class KernelCollisionTests(CollisionFixtureMixin, NumericsTestCase):
    def setUp(self):
        self.grid = make_grid(0.0, 100.0, 201)
        self.state = gaussian_packet(self.grid, 50.0, 0.69, 6.0)
        self.ensemble = SignedEnsemble.pure(self.state)

    def test_pairs_conserve_trace_and_density(self):
        spec = HeKernelCollisionSpec(t_s=0.0, k0=0.69, k_final=-0.69, safety_floor=1e-6, max_terms=12)
        post, summary = apply_he_kernel_collision(self.ensemble, spec)
        self.assertEqual(len(post.terms), 1 + 2 * summary["rank"])
        self.assertLessEqual(summary["rank"], 12)
        self.assertGreater(summary["strength"], 0.0)
        self.assertAlmostEqual(post.trace, 1.0, places=14)
        self.assertAllClose(post.weights[1::2], -post.weights[2::2], atol=0.0)
        self.assertAllClose(charge_density(post).values, charge_density(self.ensemble).values, atol=1e-12)

    def test_explicit_strength(self):
        spec = HeKernelCollisionSpec(t_s=0.0, k0=0.69, k_final=-0.69, strength=0.01, safety_floor=1e-6, max_terms=4)
        _, summary = apply_he_kernel_collision(self.ensemble, spec)
        self.assertEqual(summary["strength"], 0.01)


class GeneralStateCollisionTests(CollisionFixtureMixin, NumericsTestCase):
    def gs_spec(self, **overrides):
        return GsCollisionSpec(**{"t_s": 6.0, "k0": 0.69, "k_final": -0.69, **overrides})

    def test_one_electron_moves_to_the_final_state(self):
        post = apply_gs_collision(self.ensemble, self.gs_spec(), MASS, 10.0)
        self.assertEqual(post.weights.tolist(), [0.5, 0.5])
        self.assertEqual(post.trace, 1.0)
        self.assertTrue(post.is_non_negative())
        self.assertGreaterEqual(charge_density(post).values.min(), 0.0)
        self.assertAlmostEqual(expectation_wave_vector(post.terms[1].state), -0.69, places=6)

    def test_single_electron_source_is_replaced(self):
        single = SignedEnsemble.pure(self.state, electron_count=1)
        post = apply_gs_collision(single, self.gs_spec(), MASS, 10.0)
        self.assertEqual(len(post.terms), 1)
        self.assertEqual(post.weights.tolist(), [1.0])

    def test_explicit_final_state(self):
        final = gaussian_packet(self.grid, 150.0, -0.3, 10.0)
        post = apply_gs_collision(self.ensemble, self.gs_spec(final_state=final), MASS, 10.0)
        self.assertIs(post.terms[-1].state, final)

    def test_preconditions(self):
        signed = SignedEnsemble.from_pairs([(1.2, self.state), (-0.2, self.state)])
        with self.assertRaises(InvalidPreconditionError):
            apply_gs_collision(signed, self.gs_spec(), MASS, 10.0)
        with self.assertRaises(InvalidPreconditionError):
            apply_gs_collision(self.ensemble, self.gs_spec(occupation=0), MASS, 10.0)
        with self.assertRaises(InvalidPreconditionError):
            apply_gs_collision(self.ensemble, self.gs_spec(source_index=3), MASS, 10.0)


class RateStepTests(CollisionFixtureMixin, NumericsTestCase):
    def test_rate_matrix_validation(self):
        with self.assertRaises(ShapeError):
            RateMatrix(values=np.array([[0.0, -1.0], [1.0, 0.0]]))
        with self.assertRaises(ShapeError):
            RateMatrix(values=np.array([[1.0, 0.0], [0.0, 0.0]]))
        with self.assertRaises(ShapeError):
            RateMatrix(values=np.zeros((2, 3)))

    def random_rates(self, rng, size):
        values = rng.uniform(0.0, 0.5, size=(size, size))
        np.fill_diagonal(values, 0.0)
        return RateMatrix(values=values)

    def test_weights_stay_non_negative_and_sum_is_kept(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            size = int(rng.integers(2, 7))
            rates = self.random_rates(rng, size)
            weights = rng.uniform(size=size)
            weights /= weights.sum()
            ensemble = SignedEnsemble.from_pairs(
                (w, gaussian_packet(self.grid, 100.0 + 15.0 * i, 0.69, 10.0)) for i, w in enumerate(weights)
            )
            total = ensemble.trace
            with self.subTest(seed=seed, size=size):
                for _ in range(1000):
                    ensemble = general_collision_step(ensemble, rates, 1.0)
                    self.assertGreaterEqual(ensemble.weights.min(), 0.0)
                    self.assertAlmostEqual(ensemble.trace, total, delta=1e-12)

    def test_zero_rates_leave_weights_alone(self):
        weights = np.array([0.2, 0.5, 0.3])
        stepped = rate_step_weights(weights, RateMatrix(values=np.zeros((3, 3))), 1.0)
        self.assertEqual(stepped.tolist(), weights.tolist())

    def test_single_channel(self):
        rates = RateMatrix(values=np.array([[0.0, 0.0], [0.1, 0.0]]))
        weights = rate_step_weights(np.array([1.0, 0.0]), rates, 2.0)
        scale = 2.0 / (2.0 * np.pi)
        self.assertAllClose(weights, [1.0 - scale * 0.1, scale * 0.1])

    def test_step_size_limit(self):
        rates = RateMatrix(values=np.array([[0.0, 0.0], [10.0, 0.0]]))
        with self.assertRaises(StepSizeError):
            rate_step_weights(np.array([1.0, 0.0]), rates, 1.0)

    def test_signed_weights_are_rejected(self):
        rates = RateMatrix(values=np.zeros((2, 2)))
        with self.assertRaises(InvalidPreconditionError):
            rate_step_weights(np.array([1.2, -0.2]), rates, 1.0)
        with self.assertRaises(InvalidPreconditionError):
            rate_step_weights(np.array([1.0, 0.0, 0.0]), rates, 1.0)

    def test_continuous_transfer_on_an_ensemble(self):
        target = gaussian_packet(self.grid, 150.0, -0.69, 10.0)
        registered, index = register_state(self.ensemble, target)
        self.assertEqual(index, 1)
        self.assertEqual(registered.weights.tolist(), [1.0, 0.0])
        hook = continuous_transfer_hook(2, 0, index, 0.05, 2.0)
        weights = registered.weights
        for step in range(10):
            weights = hook(weights, 2.0 * (step + 1))
        stepped = general_collision_step(registered, RateMatrix(values=np.array([[0.0, 0.0], [0.05, 0.0]])), 2.0)
        self.assertGreater(stepped.weights[1], 0.0)
        self.assertAlmostEqual(weights.sum(), 1.0, places=12)
        self.assertGreater(weights[1], stepped.weights[1])


class TraceConservationTests(NumericsTestCase):
    """Both instantaneous collision models keep Σ weights on randomized non-negative ensembles."""

    def setUp(self):
        self.grid = make_grid(0.0, 300.0, 601)

    def random_ensemble(self, rng, electron_count=4):
        occupations = rng.multinomial(electron_count - 1, [1 / 3] * 3)
        occupations[0] += 1
        pairs = [
            (count / electron_count, gaussian_packet(self.grid, float(rng.uniform(100.0, 140.0)), 0.69, 10.0))
            for count in occupations
            if count
        ]
        return SignedEnsemble.from_pairs(pairs, electron_count=electron_count)

    def test_eigenstate_and_general_state_collisions(self):
        he_spec = HeCollisionSpec(t_s=6.0, k0=0.69, k_final=-0.69, safety_floor=1e-4)
        gs_spec = GsCollisionSpec(t_s=6.0, k0=0.69, k_final=-0.69)
        for seed in range(5):
            ensemble = self.random_ensemble(np.random.default_rng(seed))
            with self.subTest(seed=seed, weights=ensemble.weights.tolist()):
                he_post = apply_he_collision(ensemble, he_spec, MASS, 10.0)
                self.assertAlmostEqual(he_post.trace, ensemble.trace, delta=1e-12)
                gs_post = apply_gs_collision(ensemble, gs_spec, MASS, 10.0)
                self.assertAlmostEqual(gs_post.trace, ensemble.trace, delta=1e-12)
                self.assertTrue(gs_post.is_non_negative())
