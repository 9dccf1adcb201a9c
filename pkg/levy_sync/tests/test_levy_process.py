import numpy as np
from django.test import SimpleTestCase
from scipy import stats

from levy_sync.exceptions import DomainError, GridError, ParameterError
from levy_sync.services.levy_process import (
    AlphaStable,
    CompoundPoisson,
    GeneratingTriplet,
    JumpDistribution,
    SimulationGrid,
    build_two_sided,
    derive_seed,
    empirical_drift,
    sample_levy_path,
)


def unit_jumps(rate):
    return CompoundPoisson(rate, JumpDistribution("constant", (1.0,)))


class GridTests(SimpleTestCase):
    def test_nodes_are_computed_from_index(self):
        grid = SimulationGrid(-1.0, 2.0, 0.1)
        nodes = grid.nodes()
        self.assertEqual(grid.n, 30)
        self.assertEqual(nodes[7], -1.0 + 7 * 0.1)
        self.assertEqual(nodes[-1], 2.0)

    def test_rejects_bad_step(self):
        with self.assertRaises(GridError):
            SimulationGrid(0.0, 1.0, 0.0)
        with self.assertRaises(GridError):
            SimulationGrid(1.0, 0.0, 0.1)


class TripletTests(SimpleTestCase):
    def test_rejects_non_psd_covariance(self):
        with self.assertRaises(ParameterError):
            GeneratingTriplet(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_stable_index_range(self):
        for alpha in (1.0, 2.0, 0.5):
            with self.assertRaises(ParameterError):
                AlphaStable(alpha)

    def test_unknown_jump_law(self):
        with self.assertRaises(ParameterError):
            JumpDistribution("cauchy", (1.0,))


class SampleTests(SimpleTestCase):
    def test_degenerate_triplet_is_zero(self):
        noise = sample_levy_path(GeneratingTriplet.scalar(), SimulationGrid(0.0, 3.0, 0.01), 5)
        self.assertEqual(np.abs(noise.path.values).max(), 0.0)

    def test_pure_drift(self):
        noise = sample_levy_path(GeneratingTriplet.scalar(gamma=2.0), SimulationGrid(0.0, 1.0, 0.5), 0)
        self.assertAlmostEqual(noise.path.eval(1.0)[0], 2.0)
        self.assertEqual(noise.path.eval(0.0)[0], 0.0)

    def test_same_seed_same_path(self):
        triplet = GeneratingTriplet.scalar(variance=1.0, jump_measure=unit_jumps(3.0))
        grid = SimulationGrid(0.0, 2.0, 0.01)
        first = sample_levy_path(triplet, grid, 42).path
        second = sample_levy_path(triplet, grid, 42).path
        np.testing.assert_array_equal(first.times, second.times)
        np.testing.assert_array_equal(first.values, second.values)
        other = sample_levy_path(triplet, grid, 43).path
        self.assertFalse(np.array_equal(first.values[-1], other.values[-1]))

    def test_jump_count_is_poisson(self):
        triplet = GeneratingTriplet.scalar(variance=1.0, jump_measure=unit_jumps(3.0))
        grid = SimulationGrid(0.0, 1.0, 0.5)
        counts = np.array([sample_levy_path(triplet, grid, seed).path.jump_times.size for seed in range(10_000)])
        self.assertTrue(2.9 <= counts.mean() <= 3.1)
        self.assertAlmostEqual(counts.var(), 3.0, delta=0.3)

    def test_jump_times_are_cadlag(self):
        triplet = GeneratingTriplet.scalar(jump_measure=unit_jumps(4.0))
        path = sample_levy_path(triplet, SimulationGrid(0.0, 5.0, 0.1), 3).path
        for tau in path.jump_times:
            self.assertEqual(path.eval(tau)[0] - path.left_limit(tau)[0], 1.0)

    def test_increments_are_stationary(self):
        triplet = GeneratingTriplet.scalar(variance=1.0)
        path = sample_levy_path(triplet, SimulationGrid(0.0, 400.0, 0.1), 8).path
        increments = np.diff(path.values[:, 0])
        early, late = increments[:2000], increments[-2000:]
        self.assertGreater(stats.ks_2samp(early, late).pvalue, 0.001)
        rho = np.corrcoef(increments[:-1], increments[1:])[0, 1]
        self.assertLess(abs(rho), 3.0 / np.sqrt(increments.size))

    def test_stable_increments_match_law(self):
        triplet = GeneratingTriplet.scalar(jump_measure=AlphaStable(1.5))
        path = sample_levy_path(triplet, SimulationGrid(0.0, 500.0, 1.0), 4).path
        increments = np.diff(path.values[:, 0])
        law = stats.levy_stable(1.5, 0.0)
        self.assertGreater(stats.kstest(increments, law.cdf).pvalue, 0.001)


class TwoSidedTests(SimpleTestCase):
    def test_drift_extends_linearly(self):
        noise = build_two_sided(GeneratingTriplet.scalar(gamma=1.0), 3.0, 2.0, 0.25, 0)
        self.assertAlmostEqual(noise.path.eval(-2.0)[0], -2.0)
        self.assertEqual(noise.path.eval(0.0)[0], 0.0)
        self.assertAlmostEqual(noise.path.eval(2.0)[0], 2.0)

    def test_normalized_at_zero(self):
        triplet = GeneratingTriplet.scalar(variance=2.0, jump_measure=unit_jumps(2.0))
        noise = build_two_sided(triplet, 5.0, 5.0, 0.01, 9)
        self.assertEqual(noise.path.eval(0.0)[0], 0.0)
        self.assertEqual(noise.path.t_start, -5.0)

    def test_backward_copy_is_cadlag(self):
        noise = build_two_sided(GeneratingTriplet.scalar(jump_measure=unit_jumps(2.0)), 10.0, 1.0, 0.1, 1)
        path = noise.path
        past = path.jump_times[path.jump_times < 0]
        self.assertGreater(past.size, 0)
        for tau in past:
            self.assertEqual(path.eval(tau)[0] - path.left_limit(tau)[0], 1.0)

    def test_total_jump_count(self):
        triplet = GeneratingTriplet.scalar(jump_measure=unit_jumps(1.0))
        counts = [build_two_sided(triplet, 10.0, 10.0, 1.0, seed).path.jump_times.size for seed in range(2000)]
        self.assertAlmostEqual(np.mean(counts), 20.0, delta=0.6)

    def test_rejects_non_positive_horizon(self):
        with self.assertRaises(ParameterError):
            build_two_sided(GeneratingTriplet.scalar(), 0.0, 1.0, 0.1, 0)

    def test_derived_seeds_differ(self):
        self.assertNotEqual(derive_seed(5, 1), derive_seed(5, 2))
        self.assertEqual(derive_seed(5, 1), derive_seed(5, 1))


class EmpiricalDriftTests(SimpleTestCase):
    def test_pure_drift(self):
        noise = sample_levy_path(GeneratingTriplet.scalar(gamma=3.0), SimulationGrid(0.0, 100.0, 1.0), 0)
        self.assertAlmostEqual(empirical_drift(noise, 100.0)[0], 3.0)

    def test_brownian_law_of_large_numbers(self):
        noise = sample_levy_path(GeneratingTriplet.scalar(variance=1.0), SimulationGrid(0.0, 1e4, 1.0), 2)
        self.assertLess(abs(empirical_drift(noise, 1e4)[0]), 0.05)

    def test_stable_law_of_large_numbers(self):
        triplet = GeneratingTriplet.scalar(jump_measure=AlphaStable(1.5))
        grid = SimulationGrid(0.0, 1e4, 10.0)
        values = [abs(empirical_drift(sample_levy_path(triplet, grid, seed), 1e4)[0]) for seed in range(100)]
        self.assertLess(np.median(values), 0.1)

    def test_zero_time(self):
        noise = sample_levy_path(GeneratingTriplet.scalar(gamma=1.0), SimulationGrid(0.0, 1.0, 0.1), 0)
        with self.assertRaises(DomainError):
            empirical_drift(noise, 0.0)
