#!/usr/bin/env python3
"""
Invariant Validation Suite
==========================

Fast numerical self-checks run by `cli.py validate`. Each check returns
(passed, detail); an exception inside a check counts as a failure.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from algorithm import AlgorithmConfig, phi_states
from collective import (
    build_collective_operators,
    build_ms_basis,
    chain_census,
    dicke_state,
)
from dynamics import IntegratorSettings, PulseIntegrator, PulseParams, pulse_propagator, unitarity_defect
from hilbert import BasisKet, IonConfig, build_sector_basis, database_dimension, parse_ion_bits, popcount
from ideal_search import Database, closed_form_population, min_steps, run_ideal
from tuner import TuneTarget, operator_infidelity, reduced_infidelity

CheckOutcome = Tuple[bool, str]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_sector_dimensions() -> CheckOutcome:
    expected = {2: 3, 6: 42, 8: 163, 10: 638}
    found = {n: build_sector_basis(IonConfig(n)).dimension for n in expected}
    return found == expected, f"dimensions {found}"


def check_bit_order() -> CheckOutcome:
    basis = build_sector_basis(IonConfig(6))
    bits = parse_ion_bits("111000")
    position = basis.position(BasisKet(bits, 0))
    return bits == 0b000111 and basis.kets[position].ion_bits == bits, f"111000 -> {bits:#08b}"


def check_chain_census() -> CheckOutcome:
    census = {spec.j: spec.degeneracy for spec in chain_census(IonConfig(6))}
    sums_ok = all(
        sum(spec.degeneracy for spec in chain_census(IonConfig(n))) == database_dimension(IonConfig(n))
        for n in (2, 4, 6, 8, 10)
    )
    return census == {3: 1, 2: 5, 1: 9, 0: 5} and sums_ok, f"N=6 census {census}"


def check_collective_algebra() -> CheckOutcome:
    basis = build_sector_basis(IonConfig(4))
    worst = 0.0
    for addressed in (basis.config.all_ions, parse_ion_bits("1100")):
        ops = build_collective_operators(basis, addressed)
        commutator = ops.j_plus @ ops.j_minus - ops.j_minus @ ops.j_plus - 2 * ops.j_z
        casimir = ops.j_squared @ ops.j_z - ops.j_z @ ops.j_squared
        worst = max(worst, abs(commutator).max(), abs(casimir).max(), abs(ops.a_dagger - ops.a.T).max())
    return worst < 1e-12, f"max commutator residual {worst:.1e}"


def check_chain_couplings() -> CheckOutcome:
    worst = 0.0
    for n in (2, 4, 6, 8):
        basis = build_sector_basis(IonConfig(n))
        ops = build_collective_operators(basis, basis.config.all_ions)
        ms_basis = build_ms_basis(basis, ops)
        coupling = ops.sector_coupling
        for spec in chain_census(basis.config):
            for k in range(1, spec.degeneracy + 1):
                for r, expected in enumerate(spec.rung_couplings):
                    upper = ms_basis.column(spec.j, -r, k)
                    lower = ms_basis.column(spec.j, -r - 1, k)
                    worst = max(worst, abs(np.vdot(lower, coupling @ upper) - expected))
    return worst < 1e-10, f"max coupling mismatch {worst:.1e}"


def check_min_steps() -> CheckOutcome:
    found = {n: min_steps(n) for n in (4, 20, 70, 252)}
    return found == {4: 1, 20: 3, 70: 6, 252: 12}, f"min_steps {found}"


def check_ideal_closed_form() -> CheckOutcome:
    worst = 0.0
    for n_db in (4, 20, 70, 252, 1024):
        steps = 2 * min_steps(n_db)
        trace = run_ideal(Database(n_db), math.pi, math.pi, steps)
        expected = np.array([closed_form_population(n_db, k) for k in range(steps + 1)])
        worst = max(worst, float(np.max(np.abs(trace - expected))))
    return worst < 1e-10, f"max deviation {worst:.1e}"


def check_resonant_transfer(settings: IntegratorSettings) -> CheckOutcome:
    basis = build_sector_basis(IonConfig(2))
    g0T = 0.3
    pulse = PulseParams(g0T, 0.0, basis.config.all_ions)
    start = basis.position(BasisKet(0, 1))
    final, _ = PulseIntegrator(basis, settings).evolve(basis.basis_vector(start), pulse)
    transferred = 1.0 - abs(final[start]) ** 2
    area = g0T * math.sqrt(math.pi) * math.erf(pulse.window)
    expected = math.sin(math.sqrt(2.0) * area) ** 2
    return abs(transferred - expected) < 1e-8, f"transfer {transferred:.10f} vs {expected:.10f}"


def check_propagator_unitarity(settings: IntegratorSettings) -> CheckOutcome:
    basis = build_sector_basis(IonConfig(4))
    defect = unitarity_defect(pulse_propagator(basis, PulseParams(5.0, 3.0, basis.config.all_ions), settings))
    return defect < 1e-8, f"unitarity defect {defect:.1e}"


def check_oracle_leakage(settings: IntegratorSettings) -> CheckOutcome:
    config = AlgorithmConfig.reference(6, n_shots=0)
    basis = build_sector_basis(config.ions)
    unaddressed = config.ions.all_ions & ~config.marked_mask
    counts = np.array([popcount(bits & unaddressed) for bits in basis.ion_bits])
    states = phi_states(config.ions, config.marked_bits, basis)
    start = np.column_stack([s.amplitudes for s in states])
    final, _ = PulseIntegrator(basis, settings).evolve(start, config.oracle_pulse)
    leakage = max(float(np.sum(np.abs(final[counts != k, k]) ** 2)) for k in range(len(states)))
    return leakage < 1e-10, f"max leakage {leakage:.1e}"


def check_dicke_casimir() -> CheckOutcome:
    basis = build_sector_basis(IonConfig(6))
    ops = build_collective_operators(basis, basis.config.all_ions)
    state = dicke_state(basis, 3).amplitudes
    value = float(np.vdot(state, ops.sector_j_squared @ state).real)
    return abs(value - 12.0) < 1e-12, f"<J^2> = {value:.12f}"


def check_reduced_objective(settings: IntegratorSettings) -> CheckOutcome:
    worst = 0.0
    for kind in ("reflection", "oracle"):
        target = TuneTarget(kind, IonConfig(4), grid_density=1)
        pulse = target.pulse(4.0, 6.0)
        reduced = float(reduced_infidelity([(4.0, 6.0)], target, settings)[0])
        worst = max(worst, abs(reduced - operator_infidelity(pulse, target, settings)))
    return worst < 1e-7, f"reduced vs sector objective {worst:.1e}"


class ValidationSuite:
    """Runs every invariant check and collects the results."""

    def __init__(self, settings: Optional[IntegratorSettings] = None):
        self.settings = settings or IntegratorSettings()
        self.logger = logging.getLogger(__name__)

    def checks(self) -> List[Tuple[str, Callable[[], CheckOutcome]]]:
        s = self.settings
        return [
            ("sector_dimensions", check_sector_dimensions),
            ("bit_order", check_bit_order),
            ("chain_census", check_chain_census),
            ("collective_algebra", check_collective_algebra),
            ("chain_couplings", check_chain_couplings),
            ("dicke_casimir", check_dicke_casimir),
            ("min_steps", check_min_steps),
            ("ideal_closed_form", check_ideal_closed_form),
            ("resonant_transfer", lambda: check_resonant_transfer(s)),
            ("propagator_unitarity", lambda: check_propagator_unitarity(s)),
            ("oracle_leakage", lambda: check_oracle_leakage(s)),
            ("reduced_objective", lambda: check_reduced_objective(s)),
        ]

    def run(self) -> List[CheckResult]:
        results = []
        for name, check in self.checks():
            try:
                passed, detail = check()
            except Exception as exc:  # a crashing check is a failed check
                self.logger.exception("check %s raised", name)
                passed, detail = False, f"{type(exc).__name__}: {exc}"
            self.logger.info("%s: %s (%s)", name, "pass" if passed else "FAIL", detail)
            results.append(CheckResult(name, bool(passed), detail))
        return results


def run_validation_suite(settings: Optional[IntegratorSettings] = None) -> List[CheckResult]:
    return ValidationSuite(settings).run()
