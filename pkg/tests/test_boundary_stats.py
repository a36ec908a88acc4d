"""Pruebas de los estimadores de frontera con medidas de un solo átomo (oráculos exactos)."""

import math
import unittest
from fractions import Fraction

from circlewalk.services.boundary_stats import (
    EmpiricalMeasure,
    XiSettings,
    boundary_convergence_curve,
    conditional_increment_frequency,
    contract_interval_into,
    contraction_curve,
    estimate_xi,
    stationarity_check,
    stationary_histogram,
    xi_visit_fraction,
)
from circlewalk.services.circle_map import Arc
from circlewalk.services.errors import CircleMapError
from circlewalk.services.exact_arith import circle_dist
from circlewalk.services.measure import dirac, load_measure
from circlewalk.services.thompson import default_generators, word_to_element
from circlewalk.services.walk_engine import Trajectory


class BoundaryEstimateTest(unittest.TestCase):
    def setUp(self):
        generators = default_generators()
        self.A = generators["A"]
        self.A_inv = generators["A_inv"]

    def test_estimate_concentrates_at_attracting_point(self):
        traj = Trajectory.from_increments([self.A_inv] * 40)
        estimate = estimate_xi(traj)
        self.assertTrue(estimate.concentrated)
        self.assertLess(circle_dist(estimate.xi_hat, Fraction(0)), Fraction(1, 32))
        self.assertEqual(estimate.horizon, 40)

    def test_identity_walk_is_not_concentrated(self):
        traj = Trajectory.from_increments([self.A, self.A_inv] * 5)
        estimate = estimate_xi(traj)
        self.assertFalse(estimate.concentrated)
        self.assertGreater(estimate.concentration_radius, Fraction(1, 32))

    def test_settings_validation(self):
        with self.assertRaises(ValueError):
            XiSettings(grid=4)
        with self.assertRaises(ValueError):
            XiSettings(delta=Fraction(1))


class ContractionCurveTest(unittest.TestCase):
    def setUp(self):
        self.A_inv = default_generators()["A_inv"]

    def test_exact_halving_rate(self):
        report = contraction_curve(
            dirac(self.A_inv), Fraction(1, 8), Fraction(1, 4), 12, 2, seed=0, fit_window=(1, None)
        )
        self.assertEqual(report.rows[0].mean, Fraction(1, 8))
        self.assertEqual(report.rows[3].mean, Fraction(1, 64))
        self.assertAlmostEqual(report.lambda_hat, math.log(2), places=9)
        self.assertAlmostEqual(report.r_squared, 1.0, places=9)
        self.assertEqual(report.trials_used, 2)

    def test_equal_points_rejected(self):
        with self.assertRaises(ValueError):
            contraction_curve(dirac(self.A_inv), Fraction(1, 3), Fraction(4, 3), 5, 2, seed=0)

    def test_zero_trials_is_degenerate(self):
        report = contraction_curve(dirac(self.A_inv), Fraction(1, 8), Fraction(1, 4), 5, 0, seed=0)
        self.assertTrue(report.degenerate)
        self.assertEqual(report.rows, ())

    def test_boundary_curve_needs_longer_horizon(self):
        with self.assertRaises(ValueError):
            boundary_convergence_curve(dirac(self.A_inv), Fraction(1, 3), 20, 2, xi_horizon=20)

    def test_boundary_curve_on_contracting_walk(self):
        report = boundary_convergence_curve(dirac(self.A_inv), Fraction(5, 8), 10, 2, xi_horizon=60)
        self.assertEqual(report.excluded_not_concentrated, 0)
        means = [row.mean for row in report.rows]
        self.assertTrue(all(later <= earlier for earlier, later in zip(means, means[1:])))

    def test_boundary_curve_enforces_slack(self):
        # Por defecto el horizonte debe ser al menos 4·n_max.
        with self.assertRaises(ValueError):
            boundary_convergence_curve(dirac(self.A_inv), Fraction(5, 8), 20, 2, xi_horizon=79)
        report = boundary_convergence_curve(dirac(self.A_inv), Fraction(5, 8), 20, 2, xi_horizon=80)
        self.assertEqual(report.trials_used + report.excluded_not_concentrated, 2)
        with self.assertRaises(ValueError):
            boundary_convergence_curve(dirac(self.A_inv), Fraction(5, 8), 20, 2, xi_horizon=30, slack=11)
        report = boundary_convergence_curve(dirac(self.A_inv), Fraction(5, 8), 20, 2, xi_horizon=30, slack=10)
        self.assertEqual(report.trials_used + report.excluded_not_concentrated, 2)


class StationaryMeasureTest(unittest.TestCase):
    def setUp(self):
        self.mu = load_measure()

    def test_histogram_counts_every_trial(self):
        histogram = stationary_histogram(self.mu, 30, 12, 8, seed=4)
        self.assertEqual(histogram.total, 12)
        self.assertEqual(sum(histogram.counts), 12)
        self.assertEqual(histogram.bin_edges(1), (Fraction(1, 8), Fraction(1, 4)))

    def test_stationarity_report_shape(self):
        report = stationarity_check(self.mu, 30, 10, 4, seed=1)
        self.assertEqual(report.first.total, 10)
        self.assertEqual(report.second.total, 10)
        self.assertGreaterEqual(report.max_z, 0.0)

    def test_arc_fraction(self):
        measure = EmpiricalMeasure(
            bins=4, counts=(1, 1, 0, 0), total=2, points=(Fraction(1, 8), Fraction(3, 8))
        )
        p, sigma = measure.arc_fraction(Arc(Fraction(0), Fraction(1, 4)))
        self.assertEqual(p, 0.5)
        self.assertAlmostEqual(sigma, math.sqrt(0.125))
        self.assertEqual(measure.fraction(0), 0.5)

    def test_visit_fraction_bounds(self):
        arc = Arc(Fraction(1, 2), Fraction(9, 16))
        report = xi_visit_fraction(self.mu, arc, 10, 6, 30, seed=2, bins=8)
        self.assertEqual(report.trials_used, 6)
        self.assertGreaterEqual(report.fraction, 0.0)
        self.assertLessEqual(report.fraction, 1.0)


class RadonNikodymTest(unittest.TestCase):
    def setUp(self):
        generators = default_generators()
        self.A = generators["A"]
        self.a = word_to_element(["A_inv", "B", "A"], generators)

    def test_a_outside_support_of_mu(self):
        with self.assertRaises(ValueError):
            conditional_increment_frequency(dirac(self.A), self.a, None, 5, 2, 10)

    def test_support_must_fit_inside_arc(self):
        with self.assertRaises(CircleMapError):
            conditional_increment_frequency(
                load_measure(), self.a, Arc(Fraction(0), Fraction(1, 4)), 5, 2, 10
            )

    def test_frequency_is_a_proportion(self):
        report = conditional_increment_frequency(load_measure(), self.a, None, 10, 8, 30, seed=5)
        self.assertEqual(report.expected, Fraction(1, 16))
        self.assertLessEqual(report.numerator, report.denominator)
        if report.denominator:
            self.assertEqual(report.frequency, report.numerator / report.denominator)


class ContractIntervalTest(unittest.TestCase):
    def setUp(self):
        self.A = default_generators()["A"]

    def test_found_at_fourth_step(self):
        source = Arc(Fraction(1, 8), Fraction(1, 4))
        target = Arc(Fraction(7, 8), Fraction(1, 16))
        certificate = contract_interval_into(dirac(self.A), source, target, max_steps=10, trials=1)
        self.assertIsNotNone(certificate)
        self.assertEqual(certificate.steps, 4)
        self.assertEqual(certificate.trial, 0)
        image = source.image(certificate.element)
        self.assertEqual(image, Arc(Fraction(7, 8), Fraction(15, 16)))
        self.assertTrue(target.contains_arc(image))

    def test_already_contained(self):
        certificate = contract_interval_into(
            dirac(self.A), Arc(Fraction(1, 8), Fraction(1, 4)), Arc(Fraction(0), Fraction(1, 2)), 5, 1
        )
        self.assertEqual(certificate.steps, 0)
        self.assertTrue(certificate.element.is_identity)

    def test_not_found_is_none(self):
        certificate = contract_interval_into(
            dirac(self.A), Arc(Fraction(1, 8), Fraction(1, 4)), Arc(Fraction(1, 2), Fraction(9, 16)), 3, 1
        )
        self.assertIsNone(certificate)

    def test_degenerate_arcs_rejected(self):
        with self.assertRaises(CircleMapError):
            contract_interval_into(dirac(self.A), Arc(Fraction(1, 8), Fraction(1, 8)), Arc(Fraction(0), Fraction(1, 2)), 3, 1)


if __name__ == "__main__":
    unittest.main()
