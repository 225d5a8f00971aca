import numpy as np
from django.test import SimpleTestCase

from simulations.exceptions import ConfigurationError
from simulations.services.grids import make_grid, nearest_node
from simulations.services.potentials import double_barrier, free_potential


class DoubleBarrierTests(SimpleTestCase):
    def test_reference_profile(self):
        grid = make_grid(0.0, 600.0, 3000)
        potential = double_barrier(grid, 350.0, 0.8, 0.2, 4.0)
        self.assertEqual(potential.values[nearest_node(grid, 350.0)], 0.0)
        self.assertEqual(potential.values[nearest_node(grid, 352.4)], 0.2)
        self.assertEqual(potential.values[nearest_node(grid, 347.6)], 0.2)
        self.assertEqual(potential.values[nearest_node(grid, 340.0)], 0.0)
        self.assertEqual(potential.description["kind"], "double_barrier")

    def test_barrier_area_on_a_node_centred_grid(self):
        grid = make_grid(0.0, 600.0, 3001)
        potential = double_barrier(grid, 350.0, 0.8, 0.2, 4.0)
        inside = potential.values > 0
        self.assertEqual(int(inside.sum()), 8)
        self.assertAlmostEqual(inside.sum() * grid.dx, 1.6)

    def test_mirror_symmetry(self):
        grid = make_grid(0.0, 600.0, 3001)
        centre = nearest_node(grid, 350.0)
        values = double_barrier(grid, 350.0, 0.8, 0.2, 4.0).values
        span = np.arange(1, 100)
        np.testing.assert_array_equal(values[centre + span], values[centre - span])

    def test_zero_height_is_free(self):
        grid = make_grid(0.0, 100.0, 201)
        np.testing.assert_array_equal(double_barrier(grid, 50.0, 1.0, 0.0, 4.0).values, free_potential(grid).values)

    def test_invalid_geometry(self):
        grid = make_grid(0.0, 100.0, 201)
        with self.assertRaises(ConfigurationError):
            double_barrier(grid, 99.0, 1.0, 0.2, 4.0)
        with self.assertRaises(ConfigurationError):
            double_barrier(grid, 50.0, 0.0, 0.2, 4.0)
        with self.assertRaises(ConfigurationError):
            double_barrier(grid, 50.0, 1.0, 0.2, -1.0)
