#!/usr/bin/env python3
"""
Tests for Pulse Dynamics
========================

Unit tests for pulse parameters, both integrators, propagators and phase
extraction.
"""

import math
import unittest

import numpy as np

from collective import dicke_state, spin_ladder
from dynamics import (
    IntegratorSettings,
    PulseIntegrator,
    PulseParams,
    convergence_check,
    database_block,
    extract_phases,
    hamiltonian_at,
    ladder_return_amplitudes,
    phase_distance,
    propagate,
    propagate_trace,
    pulse_propagator,
    unitarity_defect,
    wrap_phase,
)
from exceptions import ConfigurationError, IntegrationError
from hilbert import BasisKet, StateVector, parse_ion_bits
from tests.helpers import FAST_SETTINGS, sector
from utils.metrics_collector import MetricsCollector


def _all(n_ions: int) -> int:
    return (1 << n_ions) - 1


class TestPulseParams(unittest.TestCase):
    """Test pulse parameter validation and conversion."""

    def test_validation(self):
        for kwargs in ({"g0T": -1.0}, {"deltaT": math.inf}, {"window": 0.0}, {"addressed": 0}, {"frame": "lab"}):
            params = {"g0T": 1.0, "deltaT": 1.0, "addressed": 3, **kwargs}
            with self.assertRaises(ConfigurationError):
                PulseParams(**params)

    def test_from_physical(self):
        """Test g0 = eta Omega0 / (2 sqrt(N)) and the scaling by T."""
        pulse = PulseParams.from_physical(0.1, 2.0, 3.0, 0.5, n_ions=4, addressed=_all(4))
        self.assertAlmostEqual(pulse.g0T, 0.15)
        self.assertAlmostEqual(pulse.deltaT, 1.5)
        self.assertEqual(pulse.duration, 8.0)

    def test_coupling_profile(self):
        pulse = PulseParams(3.0, 0.0, 1)
        self.assertEqual(pulse.coupling(0.0), 3.0)
        self.assertAlmostEqual(pulse.coupling(1.0), 3.0 / math.e)
        self.assertEqual(pulse.with_values(1.0, 2.0).g0T, 1.0)


class TestIntegratorSettings(unittest.TestCase):

    def test_validation(self):
        with self.assertRaises(ConfigurationError):
            IntegratorSettings(method="rk4")
        with self.assertRaises(ConfigurationError):
            IntegratorSettings(rtol=0.0)
        with self.assertRaises(ConfigurationError):
            IntegratorSettings(threads=0)

    def test_halved(self):
        halved = IntegratorSettings(rtol=1e-10, atol=1e-12, cfet_steps=100).halved()
        self.assertEqual((halved.rtol, halved.atol, halved.cfet_steps), (5e-11, 5e-13, 200))


class TestPhaseHelpers(unittest.TestCase):

    def test_wrap_and_distance(self):
        self.assertAlmostEqual(wrap_phase(-0.5), 2 * math.pi - 0.5)
        self.assertEqual(wrap_phase(0.0), 0.0)
        self.assertAlmostEqual(phase_distance(0.1, 2 * math.pi - 0.1), 0.2)
        self.assertAlmostEqual(phase_distance(0.0, math.pi), math.pi)


class TestHamiltonian(unittest.TestCase):

    def test_hermitian(self):
        basis = sector(4)
        for frame in ("chain", "addressed"):
            pulse = PulseParams(2.0, 3.0, parse_ion_bits("1100"), frame=frame)
            h = hamiltonian_at(basis, pulse, 0.3).toarray()
            np.testing.assert_allclose(h, h.conj().T, atol=1e-14)

    def test_chain_frame_detuning_vanishes_on_database(self):
        basis = sector(4)
        h = hamiltonian_at(basis, PulseParams(0.0, 5.0, parse_ion_bits("1100")), 0.0).toarray()
        np.testing.assert_allclose(database_block(h, basis), 0.0)
        np.testing.assert_allclose(np.diag(h)[6:10], -5.0)


class TestPropagation(unittest.TestCase):
    """Test the integrators against exact results."""

    def test_zero_coupling_is_identity_on_database(self):
        basis = sector(6)
        state = dicke_state(basis, 3)
        for addressed in (_all(6), parse_ion_bits("111000")):
            final = propagate(state, PulseParams(0.0, 7.3, addressed), FAST_SETTINGS)
            np.testing.assert_allclose(final.amplitudes, state.amplitudes, atol=1e-12)

    def test_resonant_transfer_for_two_ions(self):
        """Test |00,1> -> symmetric single excitation with pulse area sqrt(2) g0T sqrt(pi)."""
        basis = sector(2)
        start = StateVector(basis, basis.basis_vector(basis.position(BasisKet(0, 1))))
        for method in ("dop853", "cfet4"):
            pulse = PulseParams(0.4, 0.0, _all(2))
            final = propagate(start, pulse, IntegratorSettings(method=method))
            area = math.sqrt(2) * pulse.g0T * math.sqrt(math.pi) * math.erf(pulse.window)
            self.assertAlmostEqual(1 - final.population(BasisKet(0, 1)), math.sin(area) ** 2, places=8)

    def test_propagator_is_unitary(self):
        basis = sector(4)
        for frame in ("chain", "addressed"):
            pulse = PulseParams(5.0, 3.0, parse_ion_bits("1100"), frame=frame)
            self.assertLess(unitarity_defect(pulse_propagator(basis, pulse, FAST_SETTINGS)), 1e-8)

    def test_threaded_propagator_matches_serial(self):
        basis = sector(4)
        pulse = PulseParams(4.0, 2.0, _all(4))
        serial = pulse_propagator(basis, pulse, FAST_SETTINGS)
        threaded = pulse_propagator(basis, pulse, IntegratorSettings(rtol=1e-10, atol=1e-12, threads=3))
        np.testing.assert_allclose(threaded, serial, atol=1e-9)
        self.assertEqual(pulse_propagator(basis, pulse, FAST_SETTINGS, columns=[0, 3]).shape, (11, 2))

    def test_integrators_agree(self):
        basis = sector(4)
        pulse = PulseParams(3.0, 2.0, _all(4))
        state = dicke_state(basis, 2)
        dop = propagate(state, pulse, IntegratorSettings(method="dop853"))
        cfet = propagate(state, pulse, IntegratorSettings(method="cfet4", cfet_steps=4000))
        np.testing.assert_allclose(cfet.amplitudes, dop.amplitudes, atol=1e-7)

    def test_cfet4_converges_at_high_order(self):
        basis = sector(2)
        pulse = PulseParams(2.0, 1.0, _all(2))
        state = dicke_state(basis, 1)
        reference = propagate(state, pulse, IntegratorSettings()).amplitudes
        errors = [np.max(np.abs(propagate(state, pulse, IntegratorSettings(method="cfet4", cfet_steps=n)).amplitudes
                                - reference)) for n in (200, 800)]
        self.assertLess(errors[1], errors[0] / 10)
        self.assertAlmostEqual(propagate(state, pulse, IntegratorSettings(method="cfet4", cfet_steps=50)).norm(),
                               1.0, places=12)

    def test_window_independence(self):
        """Test that database amplitudes do not depend on K once the pulse has decayed."""
        basis = sector(4)
        state = dicke_state(basis, 2)
        short = propagate(state, PulseParams(5.0, 4.0, _all(4), window=4.0), FAST_SETTINGS)
        long = propagate(state, PulseParams(5.0, 4.0, _all(4), window=5.0), FAST_SETTINGS)
        np.testing.assert_allclose(long.amplitudes[:6], short.amplitudes[:6], atol=1e-6)

    def test_trace_ends_at_final_state(self):
        basis = sector(4)
        pulse = PulseParams(3.0, 2.0, _all(4))
        state = dicke_state(basis, 2)
        samples = propagate_trace(state, pulse, 5, FAST_SETTINGS)
        self.assertEqual(len(samples), 5)
        self.assertAlmostEqual(samples[-1][0], pulse.window)
        self.assertTrue(all(a[0] < b[0] for a, b in zip(samples, samples[1:])))
        final = propagate(state, pulse, FAST_SETTINGS)
        np.testing.assert_allclose(samples[-1][1].amplitudes, final.amplitudes, atol=1e-9)
        with self.assertRaises(ConfigurationError):
            propagate_trace(state, pulse, 0)

    def test_budget_exhaustion(self):
        state = dicke_state(sector(4), 2)
        with self.assertRaises(IntegrationError) as ctx:
            propagate(state, PulseParams(3.0, 2.0, _all(4)), IntegratorSettings(max_rhs_evaluations=10))
        self.assertIsNotNone(ctx.exception.tau_reached)
        self.assertEqual(ctx.exception.at_step(2).step, 2)

    def test_convergence_check(self):
        state = dicke_state(sector(4), 2)
        self.assertLess(convergence_check(state, PulseParams(3.0, 2.0, _all(4)), FAST_SETTINGS), 1e-7)

    def test_wrong_dimension(self):
        with self.assertRaises(ConfigurationError):
            PulseIntegrator(sector(4)).evolve(np.ones(5), PulseParams(1.0, 1.0, 1))

    def test_metrics_and_norm_warning(self):
        metrics = MetricsCollector()
        integrator = PulseIntegrator(sector(4), IntegratorSettings(rtol=1e-3, atol=1e-3, norm_tolerance=1e-16),
                                     metrics)
        with self.assertLogs("dynamics", level="WARNING"):
            integrator.evolve(dicke_state(sector(4), 2).amplitudes, PulseParams(6.0, 1.0, _all(4)), category="oracle")
        self.assertEqual(metrics.categories(), ["oracle"])
        self.assertEqual(metrics.get_summary("oracle")["rhs_evaluations"]["count"], 1)


class TestPhaseExtraction(unittest.TestCase):

    def test_zero_pulse_has_zero_phase(self):
        basis = sector(4)
        report = extract_phases(basis, PulseParams(0.0, 3.0, _all(4)), [dicke_state(basis, 2)], ["dicke"])
        self.assertEqual(report.by_label("dicke").acquired_phase, 0.0)
        self.assertAlmostEqual(report.return_populations[0], 1.0)
        self.assertIn("pulse", report.to_dict())

    def test_probe_validation(self):
        basis = sector(4)
        pulse = PulseParams(1.0, 3.0, _all(4))
        with self.assertRaises(ConfigurationError):
            extract_phases(basis, pulse, [StateVector(basis, 2 * dicke_state(basis, 2).amplitudes)])
        with self.assertRaises(ConfigurationError):
            extract_phases(basis, pulse, [dicke_state(basis, 2)], ["a", "b"])
        self.assertEqual(extract_phases(basis, pulse, []).entries, ())

    def test_phases_lie_in_zero_two_pi(self):
        basis = sector(4)
        report = extract_phases(basis, PulseParams(6.0, 9.0, _all(4)), [dicke_state(basis, 2)], settings=FAST_SETTINGS)
        self.assertTrue(0.0 <= report.phases[0] < 2 * math.pi)

    def test_ladder_reduction_matches_sector(self):
        """Test the single-ladder return amplitude against the full two-ion sector."""
        basis = sector(2)
        pulse = PulseParams(2.5, 3.0, _all(2))
        probe = dicke_state(basis, 1)
        report = extract_phases(basis, pulse, [probe], settings=FAST_SETTINGS)
        amplitude = ladder_return_amplitudes([spin_ladder(1, 0)], [pulse], FAST_SETTINGS)[0]
        self.assertAlmostEqual(abs(amplitude) ** 2, report.return_populations[0], places=8)
        self.assertLess(phase_distance(wrap_phase(float(np.angle(amplitude))), report.phases[0]), 1e-7)

    def test_ladder_batch_validation(self):
        with self.assertRaises(ConfigurationError):
            ladder_return_amplitudes([spin_ladder(1, 0)], [])
        with self.assertRaises(ConfigurationError):
            ladder_return_amplitudes([spin_ladder(1, 0)] * 2,
                                     [PulseParams(1.0, 1.0, 3), PulseParams(1.0, 1.0, 3, window=5.0)])
        self.assertEqual(ladder_return_amplitudes([], []).size, 0)


if __name__ == "__main__":
    unittest.main()
