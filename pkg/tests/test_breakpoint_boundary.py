"""Pruebas del cociclo de cortes y de los estimadores armónicos."""

import math
import unittest
from fractions import Fraction

from circlewalk.services.breakpoint_boundary import (
    EMPTY,
    BreakpointConfiguration,
    act,
    calibrate_target,
    cocycle,
    cocycle_pair_check,
    estimate_harmonic,
    final_matches_cocycle,
    generator_breakpoints,
    harmonicity_check,
    orbit_return_stats,
    shift_config,
    stabilization_run,
    theorem_b_witness,
    track_configuration,
    verify_chain_rule,
)
from circlewalk.services.circle_map import IDENTITY, compose, from_data, rotation
from circlewalk.services.errors import CalibrationError
from circlewalk.services.measure import dirac, load_measure
from circlewalk.services.thompson import default_generators, remark_element
from circlewalk.services.walk_engine import Trajectory


class CocycleTest(unittest.TestCase):
    def setUp(self):
        self.generators = default_generators()

    def test_remark_element_value(self):
        for y, n in ((Fraction(1, 2), 2), (Fraction(1, 4), 3), (Fraction(0), 1)):
            self.assertEqual(cocycle(remark_element(y, n)).get(y), -n)

    def test_rotations_have_empty_cocycle(self):
        self.assertEqual(cocycle(IDENTITY), EMPTY)
        self.assertEqual(cocycle(rotation(Fraction(1, 8))), EMPTY)

    def test_chain_rule_on_generators(self):
        names = self.generators.names
        for first in names:
            for second in names:
                g, h = self.generators[first], self.generators[second]
                self.assertTrue(verify_chain_rule(g, h), (first, second))
                check = cocycle_pair_check(g, h)
                self.assertTrue(check.inverse_rule and check.integer_valued, (first, second))

    def test_configuration_arithmetic(self):
        config = BreakpointConfiguration({Fraction(1, 2): Fraction(1), Fraction(1, 4): Fraction(0)})
        self.assertEqual(len(config), 1)
        self.assertEqual(config + (-config), EMPTY)
        shifted = shift_config(rotation(Fraction(1, 4)), config)
        self.assertEqual(shifted.get(Fraction(3, 4)), 1)
        A = self.generators["A"]
        self.assertEqual(act(A, EMPTY), cocycle(A))
        self.assertEqual(config.to_json(), {"1/2": "1/1"})

    def test_non_dyadic_jumps_are_inexact(self):
        g = from_data(["0", "1/2"], ["3/2", "1/2"], "0")
        config = cocycle(g)
        self.assertFalse(config.exact)
        self.assertAlmostEqual(config.get(Fraction(3, 4)), math.log2(3))
        self.assertFalse(cocycle_pair_check(g, IDENTITY).integer_valued)

    def test_generator_breakpoints(self):
        points = generator_breakpoints(self.generators)
        self.assertEqual(points, tuple(sorted(points)))
        self.assertIn(Fraction(7, 8), points)


class StabilizationTest(unittest.TestCase):
    def test_hand_built_trajectory(self):
        a_2 = remark_element(Fraction(1, 2), 2)
        traj = Trajectory.from_increments([a_2, IDENTITY, IDENTITY])
        record = track_configuration(traj, [Fraction(1, 2)])[Fraction(1, 2)]
        self.assertEqual(record.values, (0, -2, -2, -2))
        self.assertEqual(record.last_change, 1)
        self.assertTrue(final_matches_cocycle(traj, record, 3))
        with self.assertRaises(ValueError):
            final_matches_cocycle(traj, record, 0)

    def test_sampled_final_values_match(self):
        mu = load_measure()
        watched = generator_breakpoints()
        summary = stabilization_run(mu, watched, 30, 4, seed=3, threshold=30, verify=True)
        self.assertEqual(summary.fraction_stabilized, 1.0)
        self.assertEqual(summary.mismatches, 0)
        self.assertLessEqual(summary.max_last_change, 30)
        self.assertEqual(len(summary.rows), 4)


class TransienceTest(unittest.TestCase):
    def test_identity_walk_is_degenerate(self):
        stats = orbit_return_stats(dirac(IDENTITY), Fraction(1, 2), 6, 3)
        self.assertTrue(stats.recurrent_degenerate)
        self.assertEqual(stats.returns, (6, 6, 6))
        self.assertEqual(stats.last_returns, (6, 6, 6))

    def test_contracting_walk_never_returns(self):
        A = default_generators()["A"]
        stats = orbit_return_stats(dirac(A), Fraction(1, 2), 10, 2)
        self.assertFalse(stats.recurrent_degenerate)
        self.assertEqual(stats.mean_returns, 0.0)
        self.assertEqual(stats.fraction_last_below(5), 1.0)
        self.assertEqual(sum(stats.last_return_histogram(bins=5)), 2)


class HarmonicTest(unittest.TestCase):
    def setUp(self):
        self.y = Fraction(1, 2)
        self.a_2 = remark_element(self.y, 2)

    def test_prefix_sets_initial_value(self):
        estimate = estimate_harmonic(dirac(IDENTITY), self.a_2, self.y, -2, 8, 3)
        self.assertEqual(estimate.value, 1.0)
        self.assertEqual(estimate.sigma, 0.0)
        self.assertEqual(estimate.unstabilized, 0)
        missing = estimate_harmonic(dirac(IDENTITY), IDENTITY, self.y, -2, 8, 3)
        self.assertEqual(missing.value, 0.0)

    def test_calibration(self):
        calibration = calibrate_target(dirac(IDENTITY), self.y, 8, 3)
        self.assertEqual(calibration.k, 0)
        self.assertEqual(calibration.frequency, 1.0)
        with self.assertRaises(CalibrationError):
            calibrate_target(dirac(IDENTITY), self.y, 8, 0)

    def test_constant_function_is_harmonic(self):
        report = harmonicity_check(dirac(IDENTITY), IDENTITY, self.y, 0, 8, 3)
        self.assertEqual(report.f_g.value, 1.0)
        self.assertEqual(report.mean_value, 1.0)
        self.assertTrue(report.within_3sigma)

    def test_witness_requires_separated_target(self):
        with self.assertRaises(CalibrationError):
            theorem_b_witness(dirac(IDENTITY), self.y, 5, [2], 3, 8, 8)

    def test_witness_rows(self):
        mu = dirac(IDENTITY)
        report = theorem_b_witness(mu, self.y, 0, [2, 3], 4, 8, 8, bins=4)
        self.assertEqual([row.n for row in report.rows], [2, 3])
        for row in report.rows:
            self.assertEqual(row.f_e, 1.0)
            self.assertEqual(row.f_an, 0.0)
        self.assertEqual(report.k, 0)


if __name__ == "__main__":
    unittest.main()
