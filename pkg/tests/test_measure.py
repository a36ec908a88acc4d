import json
import math
import tempfile
import unittest
from fractions import Fraction
from pathlib import Path

import numpy as np

from circlewalk.services.circle_map import IDENTITY
from circlewalk.services.errors import DataFileError
from circlewalk.services.measure import (
    convolve,
    dirac,
    lazify,
    load_measure,
    make_distribution,
    measure_summary,
    moment,
    power,
    reflect,
    sample_indices,
    uniform,
)
from circlewalk.services.thompson import default_generators, word_to_element
from circlewalk.services.walk_engine import make_rng


class StepDistributionTest(unittest.TestCase):
    def setUp(self):
        self.generators = default_generators()
        self.A = self.generators["A"]
        self.A_inv = self.generators["A_inv"]

    def test_bundled_measure(self):
        mu = load_measure()
        self.assertEqual(len(mu), 9)
        self.assertEqual(sum(mu.weights, Fraction(0)), 1)
        self.assertEqual(mu.weight_of(IDENTITY), Fraction(1, 2))
        a = word_to_element(["A_inv", "B", "A"], self.generators)
        self.assertEqual(mu.weight_of(a), Fraction(1, 16))
        self.assertEqual(mu.labels[0], "e")
        self.assertEqual(measure_summary(mu)[0], {"label": "e", "weight": "1/2"})

    def test_weights_must_sum_to_one(self):
        with self.assertRaises(ValueError):
            make_distribution([(self.A, Fraction(1, 2))])
        with self.assertRaises(ValueError):
            make_distribution([(self.A, Fraction(3, 2)), (self.A_inv, Fraction(-1, 2))])

    def test_repeated_atoms_are_merged(self):
        with self.assertLogs("circlewalk.services.measure", level="WARNING"):
            mu = make_distribution([(self.A, Fraction(1, 2)), (self.A, Fraction(1, 2))])
        self.assertEqual(mu, dirac(self.A))

    def test_lazify_and_moment(self):
        lazy = lazify(dirac(self.A))
        self.assertEqual(lazy.weight_of(IDENTITY), Fraction(1, 2))
        self.assertEqual(lazy.weight_of(self.A), Fraction(1, 2))
        self.assertEqual(lazify(dirac(IDENTITY)), dirac(IDENTITY))
        self.assertEqual(moment(dirac(IDENTITY)), 0)
        self.assertEqual(moment(dirac(self.A)), 3)

    def test_convolution(self):
        self.assertEqual(convolve(dirac(self.A), dirac(self.A_inv)), dirac(IDENTITY))
        two_steps = power(uniform([self.A, self.A_inv]), 2)
        self.assertEqual(len(two_steps), 3)
        self.assertEqual(two_steps.weight_of(IDENTITY), Fraction(1, 2))
        with self.assertRaises(ValueError):
            power(dirac(self.A), 0)

    def test_reflection(self):
        self.assertEqual(reflect(dirac(self.A)), dirac(self.A_inv))
        mu = load_measure()
        self.assertEqual(reflect(mu), mu)

    def test_sampling_is_reproducible(self):
        mu = load_measure()
        first = sample_indices(mu, make_rng(42), 50)
        second = sample_indices(mu, make_rng(42), 50)
        self.assertEqual(first, second)
        self.assertTrue(all(0 <= i < len(mu) for i in first))
        self.assertEqual(sample_indices(dirac(self.A), make_rng(1), 5), [0] * 5)

    def test_sampling_frequencies_match_weights(self):
        mu = load_measure()
        draws = 100_000
        counts = np.bincount(sample_indices(mu, make_rng(2024), draws), minlength=len(mu))
        self.assertEqual(int(counts.sum()), draws)
        for (_, weight), count in zip(mu.atoms, counts):
            p = float(weight)
            sigma = math.sqrt(draws * p * (1 - p))
            self.assertLessEqual(abs(int(count) - draws * p), 4 * sigma)


class MeasureFileTest(unittest.TestCase):
    def test_bad_weight_sum(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "medida.json"
            path.write_text(json.dumps([{"word": ["A"], "weight": "1/2"}]), encoding="utf-8")
            with self.assertRaises(DataFileError):
                load_measure(path)

    def test_malformed_weight(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "medida.json"
            path.write_text(json.dumps([{"word": [], "weight": "0.5"}]), encoding="utf-8")
            with self.assertRaises(DataFileError):
                load_measure(path)


if __name__ == "__main__":
    unittest.main()
