import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from levy_sync.exceptions import DomainError, ParameterError
from levy_sync.services.cadlag_path import CadlagPath, cadlag_modulus, oscillation, shift, sup_norm
from levy_sync.services.csv_io import read_path_csv, write_jump_table, write_path_csv


def unit_step(tau=0.5, start=0.0, end=1.0):
    return CadlagPath.step([tau], [1.0], start, end)


class EvaluationTests(SimpleTestCase):
    def test_step_is_right_continuous(self):
        x = unit_step()
        self.assertEqual(x.eval(0.5)[0], 1.0)
        self.assertEqual(x.left_limit(0.5)[0], 0.0)
        self.assertEqual(x.eval(0.5 + 1e-9)[0], 1.0)

    def test_affine_interpolation(self):
        x = CadlagPath([0.0, 1.0], [0.0, 2.0])
        self.assertAlmostEqual(x.eval(0.5)[0], 1.0)

    def test_continuous_path_left_limit_equals_value(self):
        x = CadlagPath([0.0, 0.3, 1.0], [0.0, 1.5, -2.0])
        for t in (0.1, 0.3, 0.7, 1.0):
            np.testing.assert_allclose(x.left_limit(t), x.eval(t))

    def test_stacked_jumps_left_limit(self):
        x = CadlagPath.step([0.2, 0.6], [1.0, 2.0], 0.0, 1.0)
        self.assertEqual(x.left_limit(0.6)[0], 1.0)
        self.assertEqual(x.eval(0.6)[0], 3.0)
        np.testing.assert_array_equal(x.jump_times, [0.2, 0.6])

    def test_outside_domain_raises(self):
        x = unit_step()
        with self.assertRaises(DomainError):
            x.eval(1.5)
        with self.assertRaises(DomainError):
            x.left_limit(0.0)

    def test_knot_times_must_increase(self):
        with self.assertRaises(ParameterError):
            CadlagPath([0.0, 0.0, 1.0], [0.0, 1.0, 1.0])


class ShiftTests(SimpleTestCase):
    def setUp(self):
        self.x = CadlagPath.step([0.5, 2.25, 3.75, 6.5], [1.0, -2.0, 3.0, 1.0], 0.0, 10.0, initial=4.0)

    def test_shift_by_zero_subtracts_initial_value(self):
        shifted = shift(self.x, 0.0)
        np.testing.assert_array_equal(shifted.values, self.x.values - 4.0)
        self.assertEqual(shifted.eval(0.0)[0], 0.0)

    def test_drift_path_is_shift_invariant(self):
        drift = CadlagPath([0.0, 10.0], [0.0, 10.0])
        moved = drift.shift(5.0, window=(-2.0, 3.0))
        for s in (-2.0, 0.0, 1.5, 3.0):
            self.assertAlmostEqual(moved.eval(s)[0], s)

    def test_flow_property(self):
        twice = self.x.shift(2.0).shift(1.0)
        once = self.x.shift(3.0)
        np.testing.assert_array_equal(twice.times, once.times)
        np.testing.assert_array_equal(twice.values, once.values)
        np.testing.assert_array_equal(twice.left_values, once.left_values)

    def test_window_underflow(self):
        with self.assertRaises(DomainError):
            self.x.shift(1.0, window=(-2.0, 1.0))


class OscillationTests(SimpleTestCase):
    def test_constant_path(self):
        x = CadlagPath.constant(3.0, 0.0, 1.0)
        self.assertEqual(oscillation(x, 0.0, 1.0), 0.0)
        self.assertEqual(cadlag_modulus(x, 0.1), 0.0)

    def test_single_jump(self):
        self.assertEqual(oscillation(unit_step(), 0.2, 0.8), 1.0)

    def test_affine_half_interval(self):
        x = CadlagPath([0.0, 1.0], [0.0, 2.0])
        self.assertAlmostEqual(oscillation(x, 0.0, 0.5), 1.0)

    def test_monotone_in_interval(self):
        x = CadlagPath([0.0, 0.4, 0.7, 1.0], [0.0, 2.0, -1.0, 0.5])
        self.assertLessEqual(oscillation(x, 0.5, 0.6), oscillation(x, 0.3, 0.8))
        self.assertLessEqual(oscillation(x, 0.3, 0.8), oscillation(x, 0.0, 1.0))

    def test_empty_interval(self):
        with self.assertRaises(DomainError):
            oscillation(unit_step(), 0.5, 0.5)

    def test_modulus_absorbs_isolated_jump(self):
        self.assertEqual(cadlag_modulus(unit_step(), 0.3), 0.0)
        self.assertEqual(cadlag_modulus(unit_step(), 0.3, mesh="classical"), 0.0)

    def test_close_jumps_cannot_be_separated(self):
        x = CadlagPath.step([0.4, 0.45], [1.0, 2.0], 0.0, 1.0)
        self.assertGreaterEqual(cadlag_modulus(x, 0.1, mesh="classical"), 1.0)

    def test_modulus_shrinks_with_delta(self):
        x = CadlagPath([0.0, 0.5, 1.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0])
        coarse = cadlag_modulus(x, 0.5)
        fine = cadlag_modulus(x, 0.05)
        self.assertLessEqual(fine, coarse)
        self.assertLess(fine, 0.2)

    def test_short_cells_are_the_default(self):
        x = CadlagPath([0.0, 0.5, 1.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0])
        default = cadlag_modulus(x, 0.3)
        self.assertEqual(cadlag_modulus(x, 0.3, mesh="paper"), default)
        self.assertEqual(cadlag_modulus(x, 0.3, mesh="short"), default)

    def test_modulus_rejects_delta(self):
        with self.assertRaises(ParameterError):
            cadlag_modulus(unit_step(), 1.0)

    def test_modulus_rejects_mesh(self):
        with self.assertRaises(ParameterError):
            cadlag_modulus(unit_step(), 0.3, mesh="coarse")


class SupNormTests(SimpleTestCase):
    def test_zero_path(self):
        self.assertEqual(sup_norm(CadlagPath.constant(0.0, 0.0, 1.0)), 0.0)

    def test_drift(self):
        self.assertEqual(sup_norm(CadlagPath([0.0, 3.0], [0.0, 3.0])), 3.0)

    def test_left_limits_count(self):
        x = CadlagPath([0.0, 1.0, 2.0], [0.0, 0.0, 0.0], [0.0, 5.0, 0.0])
        self.assertEqual(x.sup_norm(), 5.0)


class CsvTests(SimpleTestCase):
    def test_knot_table_is_bit_exact(self):
        rng = np.random.default_rng(11)
        times = np.sort(rng.uniform(-3.0, 3.0, 40))
        values = rng.normal(size=(40, 2))
        left = values.copy()
        left[5] += 0.1 * np.pi
        left[17] -= np.e
        x = CadlagPath(times, values, left)
        with tempfile.TemporaryDirectory() as tmp:
            target = write_path_csv(x, Path(tmp) / "x.csv")
            header = target.read_text().splitlines()[0]
            back = read_path_csv(target)
        self.assertEqual(header, "t,value_0,value_1,is_jump")
        np.testing.assert_array_equal(back.times, x.times)
        np.testing.assert_array_equal(back.values, x.values)
        np.testing.assert_array_equal(back.left_values, x.left_values)

    def test_jump_table(self):
        x = CadlagPath.step([0.25, 0.5], [1.5, -2.0], 0.0, 1.0)
        with tempfile.TemporaryDirectory() as tmp:
            lines = write_jump_table(x, Path(tmp) / "jumps.csv").read_text().splitlines()
        self.assertEqual(lines, ["t_jump,size", "0.25,1.5", "0.5,-2.0"])
