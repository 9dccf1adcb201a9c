import numpy as np
from django.test import SimpleTestCase

from levy_sync.exceptions import CapabilityError, DivergenceError, DomainError, ParameterError
from levy_sync.services.integrator import (
    AdditiveSdeSpec,
    GeneralSdeSpec,
    check_linear_growth,
    estimate_dissipativity,
    flow_residual,
    integrate_additive,
    integrate_general,
    integrate_on_nodes,
)
from levy_sync.services.levy_process import (
    AlphaStable,
    CompoundPoisson,
    GeneratingTriplet,
    JumpDistribution,
    SimulationGrid,
    derive_seed,
    sample_levy_path,
)
from levy_sync.services.registry import affine_drift
from levy_sync.services.stationary import ou_convolution, sup_difference
from levy_sync.services.sync_experiments import CoupledSpec


def zero(y):
    return np.zeros_like(y)


def decay(y):
    return -y


class IntegrateAdditiveTests(SimpleTestCase):
    def test_pure_drift_noise_is_integrated_exactly(self):
        grid = SimulationGrid(0.0, 1.0, 0.01)
        noise = sample_levy_path(GeneratingTriplet.scalar(gamma=1.0), grid, 0)
        solution = integrate_additive(AdditiveSdeSpec(f=zero, noise_coeff=1.0, noise=noise), grid, 0.0)
        self.assertAlmostEqual(solution.eval(1.0)[0], 1.0, places=9)

    def test_linear_decay_without_noise(self):
        solution = integrate_additive(AdditiveSdeSpec(f=decay), SimulationGrid(0.0, 1.0, 1e-3), 1.0)
        self.assertAlmostEqual(solution.eval(1.0)[0], np.exp(-1.0), delta=1e-3)

    def test_relaxes_to_equilibrium(self):
        spec = AdditiveSdeSpec(f=lambda y: -(y + 1.0))
        solution = integrate_additive(spec, SimulationGrid(0.0, 5.0, 1e-3), 0.0)
        self.assertAlmostEqual(solution.eval(5.0)[0], -1.0, delta=1e-2)

    def test_exact_linear_part(self):
        spec = AdditiveSdeSpec(f=zero, linear_part=-np.eye(1))
        solution = integrate_additive(spec, SimulationGrid(0.0, 1.0, 0.1), 1.0)
        self.assertAlmostEqual(solution.eval(1.0)[0], np.exp(-1.0), places=10)

    def test_jumps_land_on_noise_jump_times(self):
        grid = SimulationGrid(0.0, 5.0, 0.01)
        measure = CompoundPoisson(2.0, JumpDistribution("symmetric", (1.0,)))
        noise = sample_levy_path(GeneratingTriplet.scalar(variance=1.0, jump_measure=measure), grid, 3)
        solution = integrate_additive(AdditiveSdeSpec(f=decay, noise_coeff=1.0, noise=noise), grid, 0.0)
        np.testing.assert_array_equal(solution.jump_times, noise.path.jump_times)
        np.testing.assert_allclose(solution.jump_sizes, noise.path.jump_sizes, atol=1e-12)

    def test_halving_step_roughly_halves_error(self):
        fine = SimulationGrid(0.0, 1.0, 1e-3)
        triplet = GeneratingTriplet.scalar(variance=1.0)
        errors = {0.02: [], 0.01: []}
        for seed in range(20):
            noise = sample_levy_path(triplet, fine, seed)
            exact = np.exp(-1.0) + ou_convolution(1.0, noise, 1.0, 1.0).value[0]
            spec = AdditiveSdeSpec(f=decay, noise_coeff=1.0, noise=noise)
            for dt in errors:
                solution = integrate_on_nodes(spec, SimulationGrid(0.0, 1.0, dt).nodes(), 1.0)
                errors[dt].append(abs(solution.values[-1, 0] - exact))
        ratio = np.mean(errors[0.02]) / np.mean(errors[0.01])
        self.assertGreater(ratio, 1.5)
        self.assertLess(ratio, 2.5)

    def test_blow_up_raises_divergence(self):
        with self.assertRaises(DivergenceError) as caught:
            integrate_additive(AdditiveSdeSpec(f=lambda y: y**2), SimulationGrid(0.0, 3.0, 0.01), 1.0)
        self.assertGreater(caught.exception.time, 0.9)
        self.assertLessEqual(caught.exception.time, 3.0)

    def test_noise_must_cover_the_grid(self):
        noise = sample_levy_path(GeneratingTriplet.scalar(variance=1.0), SimulationGrid(0.0, 1.0, 0.01), 0)
        with self.assertRaises(DomainError):
            integrate_additive(AdditiveSdeSpec(f=decay, noise_coeff=1.0, noise=noise), SimulationGrid(0.0, 2.0, 0.01), 0.0)


class IntegrateGeneralTests(SimpleTestCase):
    def test_large_jump_passes_through_G(self):
        spec = GeneralSdeSpec(b=zero, triplet=GeneratingTriplet.scalar(), G=lambda y, x: x)
        solution = integrate_general(spec, SimulationGrid(0.0, 1.0, 0.01), 0.0, 0, events=[(0.5, 2.0)])
        self.assertAlmostEqual(solution.eval(1.0)[0], 2.0)
        self.assertAlmostEqual(solution.left_limit(0.5)[0], 0.0)
        np.testing.assert_array_equal(solution.jump_times, [0.5])

    def test_multiplicative_jump_uses_pre_jump_state(self):
        spec = GeneralSdeSpec(b=zero, triplet=GeneratingTriplet.scalar(), G=lambda y, x: y * x)
        solution = integrate_general(spec, SimulationGrid(0.0, 1.0, 0.01), 1.0, 0, events=[(0.5, 1.0)])
        self.assertAlmostEqual(solution.eval(0.5)[0], 2.0)

    def test_drift_only(self):
        spec = GeneralSdeSpec(b=decay, triplet=GeneratingTriplet.scalar())
        solution = integrate_general(spec, SimulationGrid(0.0, 1.0, 1e-3), 1.0, 0)
        self.assertAlmostEqual(solution.eval(1.0)[0], np.exp(-1.0), delta=1e-3)

    def test_small_jumps_with_stable_noise_are_unsupported(self):
        triplet = GeneratingTriplet.scalar(jump_measure=AlphaStable(1.5))
        spec = GeneralSdeSpec(b=zero, triplet=triplet, F=lambda y, x: x)
        with self.assertRaises(CapabilityError):
            integrate_general(spec, SimulationGrid(0.0, 1.0, 0.01), 0.0, 0)

    def test_event_outside_grid(self):
        spec = GeneralSdeSpec(b=zero, triplet=GeneratingTriplet.scalar(), G=lambda y, x: x)
        with self.assertRaises(DomainError):
            integrate_general(spec, SimulationGrid(0.0, 1.0, 0.01), 0.0, 0, events=[(1.5, 1.0)])

    def test_cutoff_must_be_positive(self):
        with self.assertRaises(ParameterError):
            GeneralSdeSpec(b=zero, triplet=GeneratingTriplet.scalar(), cutoff=0.0)


class DissipativityTests(SimpleTestCase):
    def test_linear_drift(self):
        estimate = estimate_dissipativity(decay, 5.0, 500, 0)
        self.assertAlmostEqual(estimate.l_hat, 1.0, places=9)
        self.assertFalse(estimate.violated)

    def test_constant_shift_does_not_matter(self):
        estimate = estimate_dissipativity(lambda y: -(y + 3.0), 5.0, 500, 0)
        self.assertAlmostEqual(estimate.l_hat, 1.0, places=9)

    def test_cubic_drift(self):
        estimate = estimate_dissipativity(lambda y: -(y**3) - y, 2.0, 20000, 1)
        self.assertGreaterEqual(estimate.l_hat, 0.99)
        self.assertLessEqual(estimate.l_hat, 1.01)

    def test_expanding_drift_is_flagged(self):
        estimate = estimate_dissipativity(lambda y: y, 1.0, 100, 0)
        self.assertAlmostEqual(estimate.l_hat, -1.0, places=9)
        self.assertTrue(estimate.violated)

    def test_needs_two_samples(self):
        with self.assertRaises(ParameterError):
            estimate_dissipativity(decay, 1.0, 1, 0)


class LinearGrowthTests(SimpleTestCase):
    def test_linear_coefficients_are_bounded(self):
        check = check_linear_growth(decay, lambda y: np.ones((1, 1)), 1.0, 200, 0)
        self.assertTrue(check.bounded)
        self.assertLessEqual(check.worst_ratio, 2.0)

    def test_quadratic_drift_is_unbounded(self):
        check = check_linear_growth(lambda y: y**2, None, 1.0, 200, 0)
        self.assertFalse(check.bounded)

    def test_zero_coefficients(self):
        check = check_linear_growth(zero, None, 1.0, 50, 0)
        self.assertTrue(check.bounded)
        self.assertEqual(check.worst_ratio, 0.0)


class FlowResidualTests(SimpleTestCase):
    def test_cocycle_composition(self):
        grid = SimulationGrid(0.0, 3.0, 1e-3)
        measure = CompoundPoisson(1.0, JumpDistribution("normal", (0.0, 1.0)))
        noise = sample_levy_path(GeneratingTriplet.scalar(variance=0.5, jump_measure=measure), grid, 8)
        spec = AdditiveSdeSpec(f=lambda y: -y - y**3, noise_coeff=1.0, noise=noise)
        self.assertLess(flow_residual(spec, 0.5, 1.0, 1.5, 1e-3), 1e-2)

    def test_residual_shrinks_with_step_on_the_coupled_example(self):
        triplet = GeneratingTriplet.scalar(jump_measure=CompoundPoisson(5.0, JumpDistribution("symmetric", (1.0,))))
        sample_grid = SimulationGrid(0.0, 2.0, 1e-3)
        # s sits between grid nodes for both steps.
        s, t, y0 = 0.5037, 1.0, [1.0, -1.0]
        residuals = {1e-2: [], 1e-3: []}
        errors = {1e-2: [], 1e-3: []}
        for seed in range(20):
            noise1 = sample_levy_path(triplet, sample_grid, derive_seed(seed, 1))
            noise2 = sample_levy_path(triplet, sample_grid, derive_seed(seed, 2))
            spec = CoupledSpec(affine_drift(1.0, 1.0), affine_drift(1.0, 3.0), 1.0, 2.0, 1.0, noise1, noise2)
            additive = spec.as_additive()
            for dt in residuals:
                residuals[dt].append(flow_residual(additive, y0, s, t, dt))
                coarse = integrate_additive(additive, SimulationGrid(0.0, s + t, dt), y0)
                fine = integrate_additive(additive, SimulationGrid(0.0, s + t, dt / 10), y0)
                errors[dt].append(sup_difference(coarse, fine))
        for dt in residuals:
            self.assertLessEqual(np.mean(residuals[dt]), 2.0 * np.mean(errors[dt]))
        self.assertLessEqual(np.mean(residuals[1e-3]), 0.5 * np.mean(residuals[1e-2]))

    def test_rejects_non_positive_times(self):
        with self.assertRaises(ParameterError):
            flow_residual(AdditiveSdeSpec(f=decay), 0.0, 0.0, 1.0, 0.01)
