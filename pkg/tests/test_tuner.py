#!/usr/bin/env python3
"""
Tests for the Pulse Tuner
=========================

Unit tests for the tuning targets, the ladder-reduced objective and the
grid-plus-refinement search.
"""

import math
import unittest

import numpy as np

from dynamics import IntegratorSettings, phase_distance
from exceptions import ConfigurationError, TuningFailedError
from hilbert import IonConfig
from tests.helpers import FAST_SETTINGS
from tuner import (
    PulseTuner,
    TuneTarget,
    operator_infidelity,
    reduced_infidelity,
    reduced_model,
    target_phase_report,
    tune,
)


class TestTuneTarget(unittest.TestCase):
    """Test target validation and defaults."""

    def test_validation(self):
        ions = IonConfig(4)
        with self.assertRaises(ConfigurationError):
            TuneTarget("inversion", ions)
        with self.assertRaises(ConfigurationError):
            TuneTarget("reflection", ions, g0T_bounds=(5.0, 1.0))
        with self.assertRaises(ConfigurationError):
            TuneTarget("reflection", ions, deltaT_bounds=(0.0, 1.0))
        with self.assertRaises(ConfigurationError):
            TuneTarget("reflection", ions, grid_density=0)
        with self.assertRaises(ConfigurationError):
            TuneTarget("reflection", ions, subspace="chains")
        with self.assertRaises(ConfigurationError):
            TuneTarget("oracle", ions, marked_bits="1110")

    def test_addressed_sets(self):
        self.assertEqual(TuneTarget("reflection", IonConfig(4)).addressed, 0b1111)
        oracle = TuneTarget("oracle", IonConfig(4))
        self.assertEqual(oracle.marked_bits, "1100")
        self.assertEqual(oracle.pulse(1.0, 2.0).addressed, 0b0011)


class TestReducedModel(unittest.TestCase):
    """Test the ladder decomposition of the restricted trace."""

    def test_reflection_weights(self):
        model = reduced_model(TuneTarget("reflection", IonConfig(6)))
        np.testing.assert_array_equal(model.weights, [1, 5, 9, 5])
        self.assertEqual(model.dimension, 20)
        self.assertEqual([ladder.length for ladder in model.ladders], [4, 3, 2, 1])

    def test_oracle_weights_cover_database(self):
        for n_ions, size in ((4, 6), (6, 20), (8, 70)):
            model = reduced_model(TuneTarget("oracle", IonConfig(n_ions)))
            self.assertEqual(model.dimension, size)
            self.assertEqual(model.ladders[model.target_index].length, n_ions // 2 + 1)

    def test_symmetric_subspace(self):
        for kind in ("reflection", "oracle"):
            model = reduced_model(TuneTarget(kind, IonConfig(6), subspace="symmetric"))
            self.assertEqual(model.dimension, 4)

    def test_zero_coupling(self):
        """Test that the identity pulse misses a sign flip by 2 / dim."""
        for kind in ("reflection", "oracle"):
            target = TuneTarget(kind, IonConfig(4))
            value = reduced_infidelity([(0.0, 5.0)], target, FAST_SETTINGS)[0]
            self.assertAlmostEqual(value, 1 / 3)
            self.assertAlmostEqual(operator_infidelity(target.pulse(0.0, 5.0), target, FAST_SETTINGS), 1 / 3)

    def test_reduced_matches_sector(self):
        """Test the ladder objective against full-sector propagation."""
        points = [(4.0, 6.0), (9.0, 2.5)]
        for kind in ("reflection", "oracle"):
            for subspace in ("database", "symmetric"):
                for frame in ("chain", "addressed"):
                    target = TuneTarget(kind, IonConfig(4), subspace=subspace, frame=frame)
                    reduced = reduced_infidelity(points, target, FAST_SETTINGS)
                    for (g0T, deltaT), value in zip(points, reduced):
                        sector = operator_infidelity(target.pulse(g0T, deltaT), target, FAST_SETTINGS)
                        self.assertAlmostEqual(value, sector, places=7)


class TestPulseTuner(unittest.TestCase):
    """Test the grid scan, tie-breaking and refinement."""

    def _target(self, **kwargs):
        options = {"g0T_bounds": (0.5, 3.0), "deltaT_bounds": (0.01, 3.0), "grid_density": 8}
        options.update(kwargs)
        return TuneTarget("reflection", IonConfig(2), **options)

    def test_tie_breaking(self):
        tuner = PulseTuner(self._target())
        cells = [(0.1, 5.0, 5.0), (0.1, 3.0, 9.0), (0.1, 3.0, 4.0), (0.2, 1.0, 1.0)]
        self.assertEqual(tuner.select(cells), (0.1, 3.0, 4.0))

    def test_grid_covers_bounds(self):
        cells = PulseTuner(self._target(grid_density=3), FAST_SETTINGS).grid_scan()
        self.assertEqual(len(cells), 9)
        self.assertEqual({c[1] for c in cells}, {0.5, 1.75, 3.0})

    def test_threaded_grid_matches_serial(self):
        serial = PulseTuner(self._target(grid_density=4), FAST_SETTINGS).grid_scan()
        threaded = PulseTuner(self._target(grid_density=4),
                              IntegratorSettings(rtol=1e-10, atol=1e-12, threads=3)).grid_scan()
        np.testing.assert_allclose([c[0] for c in threaded], [c[0] for c in serial], atol=1e-12)

    def test_sector_evaluation_agrees(self):
        points = [(1.2, 0.5), (2.0, 2.0)]
        reduced = PulseTuner(self._target(), FAST_SETTINGS).objective_batch(points)
        sector = PulseTuner(self._target(evaluation="sector"), FAST_SETTINGS).objective_batch(points)
        np.testing.assert_allclose(reduced, sector, atol=1e-7)

    def test_two_ion_reflection(self):
        """Test that a 2 pi rotation of the bright chain is found as a sign flip."""
        result = tune(self._target(), FAST_SETTINGS)
        self.assertLess(result.objective_value, 0.05)
        self.assertGreater(result.operator_fidelity, 0.9)
        self.assertEqual(result.grid_evaluations, 64)
        self.assertGreater(result.refine_evaluations, 0)
        self.assertAlmostEqual(result.sector_infidelity, result.objective_value, places=6)
        entry = result.phase_report.by_label("j=1")
        self.assertLess(phase_distance(entry.acquired_phase, math.pi), 0.7)
        self.assertIn("best", result.to_dict())

    def test_deterministic(self):
        first = tune(self._target(grid_density=4, max_refine_evaluations=30), FAST_SETTINGS)
        second = tune(self._target(grid_density=4, max_refine_evaluations=30), FAST_SETTINGS)
        self.assertEqual((first.best.g0T, first.best.deltaT), (second.best.g0T, second.best.deltaT))

    def test_failure_carries_best_result(self):
        target = self._target(g0T_bounds=(0.5, 0.6), deltaT_bounds=(5.0, 6.0), grid_density=2,
                              objective_threshold=1e-9, max_refine_evaluations=0)
        with self.assertRaises(TuningFailedError) as ctx:
            tune(target, FAST_SETTINGS)
        self.assertEqual(ctx.exception.best.refine_evaluations, 0)
        self.assertGreater(ctx.exception.best.objective_value, 1e-9)

    def test_fixed_point_bounds(self):
        target = self._target(g0T_bounds=(1.25, 1.25), deltaT_bounds=(0.01, 0.01), objective_threshold=1.0)
        result = tune(target, FAST_SETTINGS)
        self.assertEqual((result.best.g0T, result.best.deltaT), (1.25, 0.01))
        self.assertEqual(result.grid_evaluations, 1)

    def test_oracle_phase_report(self):
        target = TuneTarget("oracle", IonConfig(4))
        report = target_phase_report(target.pulse(0.0, 1.0), target, FAST_SETTINGS)
        self.assertEqual([e.label for e in report.entries], ["phi_0", "phi_1", "phi_2"])
        np.testing.assert_allclose(report.return_populations, 1.0)


if __name__ == "__main__":
    unittest.main()
