#!/usr/bin/env python3
"""
Tests for the Sector Basis
==========================

Unit tests for sector enumeration, bit conventions and marked-state checks.
"""

import unittest

import numpy as np

from exceptions import ConfigurationError, InvalidMarkedStateError
from hilbert import (
    BasisKet,
    IonConfig,
    StateVector,
    basis_state,
    basis_table,
    database_dimension,
    database_size_asymptotic,
    format_ion_bits,
    manifold_dimensions,
    marked_ket,
    parse_ion_bits,
    validate_marked_bits,
)
from tests.helpers import sector


class TestIonConfig(unittest.TestCase):
    """Test ion count validation."""

    def test_rejects_odd_small_and_non_integer_counts(self):
        """Test that odd, too small and non-integer ion counts are rejected."""
        for bad in (3, 0, -2, 2.0, True):
            with self.assertRaises(ConfigurationError):
                IonConfig(bad)

    def test_excitations_and_mask(self):
        config = IonConfig(6)
        self.assertEqual(config.excitations, 3)
        self.assertEqual(config.all_ions, 0b111111)


class TestSectorBasis(unittest.TestCase):
    """Test sector enumeration and ordering."""

    def test_dimensions(self):
        """Test the sector dimensions for the reference chain lengths."""
        for n_ions, expected in ((2, 3), (4, 11), (6, 42), (8, 163), (10, 638)):
            self.assertEqual(sector(n_ions).dimension, expected)

    def test_database_comes_first(self):
        """Test that the n_p = 0 block leads and holds C(N, N/2) kets."""
        basis = sector(6)
        self.assertEqual(basis.database_dimension, 20)
        self.assertTrue(all(ket.phonons == 0 for ket in basis.kets[:20]))
        self.assertTrue(all(ket.phonons > 0 for ket in basis.kets[20:]))
        self.assertEqual(basis.kets[-1], BasisKet(0, 3))

    def test_blocks_sorted_by_ion_register(self):
        basis = sector(6)
        bits = basis.ion_bits
        for n_i, n_p, size in manifold_dimensions(basis.config):
            block = bits[basis.phonons == n_p]
            self.assertEqual(len(block), size)
            self.assertTrue(np.all(np.diff(block) > 0))

    def test_excitation_number_is_conserved(self):
        basis = sector(8)
        self.assertTrue(np.all(basis.excited + basis.phonons == 4))

    def test_position_lookup(self):
        basis = sector(6)
        self.assertEqual(basis.position(BasisKet(0b000111, 0)), 0)
        self.assertEqual(basis.position_of_bits(0b000011), basis.position(BasisKet(0b000011, 1)))
        with self.assertRaises(ConfigurationError):
            basis.position(BasisKet(0b000111, 1))

    def test_basis_table_for_two_ions(self):
        self.assertEqual(basis_table(sector(2)), [(0, "10", 1, 0), (1, "01", 1, 0), (2, "00", 0, 1)])


class TestBitConventions(unittest.TestCase):
    """Test that ion 1 is the leftmost character and the lowest bit."""

    def test_parse_and_format(self):
        self.assertEqual(parse_ion_bits("111000"), 0b000111)
        self.assertEqual(parse_ion_bits("100000"), 1)
        self.assertEqual(format_ion_bits(0b000111, 6), "111000")
        self.assertEqual(format_ion_bits(parse_ion_bits("0110"), 4), "0110")

    def test_marked_ket(self):
        ket = marked_ket(IonConfig(6), "111000")
        self.assertEqual(ket, BasisKet(0b000111, 0))
        self.assertEqual(ket.n_excited, 3)
        self.assertEqual(ket.label(6), "|111000, 0>")


class TestMarkedValidation(unittest.TestCase):
    """Test marked bitstring validation."""

    def test_wrong_excitation_count(self):
        with self.assertRaises(InvalidMarkedStateError):
            validate_marked_bits(IonConfig(6), "111100")

    def test_wrong_length(self):
        with self.assertRaises(InvalidMarkedStateError):
            validate_marked_bits(IonConfig(6), "11100")

    def test_bad_characters(self):
        with self.assertRaises(InvalidMarkedStateError) as ctx:
            validate_marked_bits(IonConfig(4), "11x0")
        self.assertIsInstance(ctx.exception, ValueError)
        self.assertEqual(ctx.exception.bits, "11x0")


class TestStateVector(unittest.TestCase):
    """Test amplitude containers."""

    def test_shape_must_match(self):
        with self.assertRaises(ConfigurationError):
            StateVector(sector(4), np.zeros(5))

    def test_populations(self):
        basis = sector(4)
        state = basis_state(basis, BasisKet(0b0011, 0))
        self.assertAlmostEqual(state.norm(), 1.0)
        self.assertAlmostEqual(state.population(BasisKet(0b0011, 0)), 1.0)
        self.assertAlmostEqual(state.database_population(), 1.0)
        half = StateVector(basis, state.amplitudes * 2).normalized()
        self.assertAlmostEqual(abs(half.overlap(state)), 1.0)

    def test_zero_vector_cannot_be_normalized(self):
        with self.assertRaises(ConfigurationError):
            StateVector(sector(2), np.zeros(3)).normalized()


class TestDatabaseSize(unittest.TestCase):

    def test_exact_and_asymptotic(self):
        self.assertEqual(database_dimension(IonConfig(10)), 252)
        self.assertAlmostEqual(database_size_asymptotic(10) / 252, 1.0, delta=0.01)
        self.assertAlmostEqual(database_size_asymptotic(40) / database_dimension(IonConfig(40)), 1.0, delta=1e-3)

    def test_manifold_dimensions(self):
        self.assertEqual(manifold_dimensions(IonConfig(6)), [(3, 0, 20), (2, 1, 15), (1, 2, 6), (0, 3, 1)])


if __name__ == "__main__":
    unittest.main()
