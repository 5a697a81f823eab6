#!/usr/bin/env python3
"""
Tests for the Ideal Search
==========================

Unit tests for Householder reflections and the database-level Grover search.
"""

import math
import unittest

import numpy as np

from exceptions import ConfigurationError
from ideal_search import (
    Database,
    apply_grover,
    closed_form_population,
    coupled_reflections,
    grover_operator,
    householder,
    min_steps,
    peak_population,
    run_ideal,
    two_dimensional_leakage,
    uniform_state,
)


class TestHouseholder(unittest.TestCase):
    """Test single and coupled reflections."""

    def test_sign_flip_is_an_involution(self):
        psi = uniform_state(Database(5))
        reflection = householder(psi, math.pi)
        np.testing.assert_allclose(reflection @ reflection, np.eye(5), atol=1e-12)
        np.testing.assert_allclose(reflection @ psi, -psi, atol=1e-12)

    def test_unitary_for_any_phase(self):
        reflection = householder(np.array([0.6, 0.8j]), 0.7)
        np.testing.assert_allclose(reflection.conj().T @ reflection, np.eye(2), atol=1e-12)

    def test_rejects_unnormalized_vector(self):
        with self.assertRaises(ConfigurationError):
            householder(np.array([1.0, 1.0]), math.pi)

    def test_coupled_reflections_equal_product(self):
        """Test that orthogonal reflections compose into one coupled reflection."""
        basis = np.eye(4, dtype=complex)
        phases = [0.3, 1.1, math.pi]
        product = np.eye(4, dtype=complex)
        for i, phase in enumerate(phases):
            product = product @ householder(basis[:, i], phase)
        np.testing.assert_allclose(coupled_reflections([basis[:, i] for i in range(3)], phases), product)

    def test_coupled_reflections_validation(self):
        with self.assertRaises(ConfigurationError):
            coupled_reflections([np.array([1.0, 0.0]), np.array([0.6, 0.8])], [1.0, 1.0])
        with self.assertRaises(ConfigurationError):
            coupled_reflections([np.array([1.0, 0.0])], [1.0, 2.0])
        with self.assertRaises(ConfigurationError):
            coupled_reflections([], [])


class TestDatabase(unittest.TestCase):

    def test_validation(self):
        with self.assertRaises(ConfigurationError):
            Database(1)
        with self.assertRaises(ConfigurationError):
            Database(4, marked=4)

    def test_angle(self):
        self.assertAlmostEqual(Database(4).angle, math.pi / 6)


class TestGroverSearch(unittest.TestCase):
    """Test the step count and the population trace."""

    def test_min_steps(self):
        self.assertEqual(min_steps(20), 3)
        self.assertEqual(min_steps(70), 6)
        self.assertEqual(min_steps(252), 12)
        self.assertEqual(min_steps(4), 1)
        with self.assertRaises(ConfigurationError):
            min_steps(1)

    def test_twenty_items_three_steps(self):
        """Test the closed form sin^2(7 theta) for N = 20 after three steps."""
        trace = run_ideal(Database(20), math.pi, math.pi, 3)
        self.assertEqual(len(trace), 4)
        self.assertAlmostEqual(trace[0], 1 / 20)
        theta = math.asin(1 / math.sqrt(20))
        self.assertAlmostEqual(trace[-1], math.sin(7 * theta) ** 2, places=12)

    def test_closed_form_for_all_steps(self):
        for n_db in (4, 70, 252):
            trace = run_ideal(Database(n_db, marked=n_db // 2), math.pi, math.pi, 2 * min_steps(n_db))
            expected = [closed_form_population(n_db, k) for k in range(len(trace))]
            np.testing.assert_allclose(trace, expected, atol=1e-12)

    def test_dense_and_rank_one_agree(self):
        db = Database(30, marked=7)
        np.testing.assert_allclose(run_ideal(db, 2.0, 2.0, 5, method="dense"),
                                   run_ideal(db, 2.0, 2.0, 5, method="rank_one"), atol=1e-12)

    def test_apply_grover_matches_operator(self):
        db = Database(12, marked=3)
        state = np.random.default_rng(1).normal(size=12) + 0j
        np.testing.assert_allclose(apply_grover(state, db, 1.3, 0.4), grover_operator(db, 1.3, 0.4) @ state)

    def test_two_dimensional_dynamics(self):
        """Test that matched sign-flip reflections never leave span{|s>, |W>}."""
        db = Database(50, marked=11)
        state = uniform_state(db)
        for _ in range(10):
            state = apply_grover(state, db, math.pi, math.pi)
            self.assertLess(two_dimensional_leakage(state, db), 1e-12)

    def test_phase_mismatch_spoils_amplification(self):
        db = Database(252)
        self.assertGreater(peak_population(db, math.pi, math.pi, 12), 0.99)
        self.assertLess(peak_population(db, math.pi, math.pi / 2, 24), 0.9)

    def test_matched_phases_beat_mismatched_phases(self):
        db = Database(252)
        horizon = 4 * min_steps(252)
        for phi in (math.pi / 2, 3 * math.pi / 4, math.pi):
            self.assertGreater(peak_population(db, phi, phi, horizon), peak_population(db, phi, phi / 2, horizon))

    def test_min_steps_asymptotics(self):
        for n_db in (100, 252, 924, 1000, 3432, 12870):
            self.assertLessEqual(abs(min_steps(n_db) - math.pi * math.sqrt(n_db) / 4), 1.0)

    def test_invalid_arguments(self):
        with self.assertRaises(ConfigurationError):
            run_ideal(Database(4), math.pi, math.pi, -1)
        with self.assertRaises(ConfigurationError):
            run_ideal(Database(4), math.pi, math.pi, 1, method="sparse")


if __name__ == "__main__":
    unittest.main()
