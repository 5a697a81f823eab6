#!/usr/bin/env python3
"""
Physical Grover Search
======================

Runs the search on the ion chain: start in the symmetric Dicke state with
N/2 excitations, then per step apply the oracle pulse (marked half of the
chain) followed by the reflection pulse (all ions), recording the
marked-state population. Dynamics run in the full sector, so off-resonant
transitions out of the database manifold are included.

Also hosts the phase diagnostics: phase reports of both pulses, the
effective coupled-reflection model built from them, and the sensitivity of
the final state to relative phase errors.
"""

import logging
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from collective import build_collective_operators, build_ms_basis, chain_representatives, dicke_state
from dynamics import (
    DEFAULT_WINDOW,
    IntegratorSettings,
    PhaseReport,
    PulseIntegrator,
    PulseParams,
    extract_phases,
    propagate,
    propagate_trace,
)
from exceptions import ConfigurationError, IntegrationError
from hilbert import (
    IonConfig,
    SectorBasis,
    StateVector,
    build_sector_basis,
    database_dimension,
    format_ion_bits,
    marked_ket,
    popcount,
    validate_marked_bits,
)
from ideal_search import coupled_reflections, min_steps
from utils.metrics_collector import MetricsCollector

logger = logging.getLogger(__name__)

# (g0T, deltaT) of the oracle and reflection pulses that reach about 99%
# after min_steps steps for the marked state with the first N/2 ions excited.
REFERENCE_PULSE_TABLE: Dict[int, Dict[str, Tuple[float, float]]] = {
    6: {"oracle": (28.610, 19.470), "reflection": (25.830, 10.320)},
    8: {"oracle": (10.800, 21.400), "reflection": (24.400, 21.050)},
    10: {"oracle": (87.142, 88.565), "reflection": (70.322, 15.687)},
}

SENSITIVITY_PATTERNS = ("uniform", "alternating")


def default_marked_bits(n_ions: int) -> str:
    half = n_ions // 2
    return "1" * half + "0" * half


@dataclass(frozen=True)
class AlgorithmConfig:
    """Everything needed to run one search."""
    ions: IonConfig
    marked_bits: str
    oracle_pulse: PulseParams
    reflection_pulse: PulseParams
    n_steps: Optional[int] = None
    rng_seed: int = 0
    n_shots: int = 1000
    record_mid_step: bool = False
    trace_points: int = 0
    extract_phases: bool = True

    def __post_init__(self) -> None:
        marked = validate_marked_bits(self.ions, self.marked_bits)
        if self.oracle_pulse.addressed != marked:
            raise ConfigurationError(
                f"oracle pulse must address the marked half {self.marked_bits}, got "
                f"{format_ion_bits(self.oracle_pulse.addressed, self.ions.n_ions)}"
            )
        if self.reflection_pulse.addressed != self.ions.all_ions:
            raise ConfigurationError("reflection pulse must address all ions")
        if self.n_steps is None:
            object.__setattr__(self, "n_steps", min_steps(database_dimension(self.ions)))
        if self.n_steps < 0 or self.n_shots < 0 or self.trace_points < 0:
            raise ConfigurationError("n_steps, n_shots and trace_points must be non-negative")

    @classmethod
    def create(cls, n_ions: int, marked_bits: Optional[str],
               oracle: Tuple[float, float], reflection: Tuple[float, float],
               window: float = DEFAULT_WINDOW, frame: str = "chain",
               **options) -> "AlgorithmConfig":
        """Build a config from (g0T, deltaT) pairs, deriving the addressed sets."""
        ions = IonConfig(n_ions)
        bits = marked_bits or default_marked_bits(n_ions)
        marked = validate_marked_bits(ions, bits)
        return cls(
            ions=ions,
            marked_bits=bits,
            oracle_pulse=PulseParams(oracle[0], oracle[1], marked, window, frame),
            reflection_pulse=PulseParams(reflection[0], reflection[1], ions.all_ions, window, frame),
            **options,
        )

    @classmethod
    def reference(cls, n_ions: int, **options) -> "AlgorithmConfig":
        """Config with the reference pulse parameters for N = 6, 8 or 10."""
        if n_ions not in REFERENCE_PULSE_TABLE:
            raise ConfigurationError(f"no reference pulses for N={n_ions}; known: {sorted(REFERENCE_PULSE_TABLE)}")
        row = REFERENCE_PULSE_TABLE[n_ions]
        return cls.create(n_ions, None, row["oracle"], row["reflection"], **options)

    @property
    def marked_mask(self) -> int:
        return self.oracle_pulse.addressed

    @property
    def step_duration(self) -> float:
        return self.oracle_pulse.duration + self.reflection_pulse.duration


@dataclass(frozen=True)
class TracePoint:
    """One row of the population trace; step is fractional for rows inside a step."""
    step: float
    tau_elapsed: float
    marked_population: float
    norm: float

    @property
    def is_step_boundary(self) -> bool:
        return float(self.step).is_integer()


@dataclass
class RunResult:
    config: AlgorithmConfig
    populations: List[Tuple[int, float]]
    final_fidelity: float
    norm_drift: float
    oracle_phases: Optional[PhaseReport]
    reflection_phases: Optional[PhaseReport]
    samples: List[str]
    final_state: StateVector
    trace: List[TracePoint] = field(default_factory=list)
    metrics: Dict[str, Dict] = field(default_factory=dict)
    wall_time: float = 0.0

    def step_rows(self) -> List[TracePoint]:
        return [row for row in self.trace if row.is_step_boundary]

    def sample_counts(self) -> Counter:
        return Counter(self.samples)


def phi_states(ions: IonConfig, marked_bits: str,
               basis: Optional[SectorBasis] = None) -> List[StateVector]:
    """Product Dicke states |W_{N/2-k}>_A |W_k>_B for k = 0..N/2 (A = marked half)."""
    basis = basis or build_sector_basis(ions)
    half_a = validate_marked_bits(ions, marked_bits)
    half_b = ions.all_ions & ~half_a
    half = ions.excitations
    database = basis.ion_bits[basis.database_slice]
    in_a = np.array([popcount(bits & half_a) for bits in database])
    in_b = np.array([popcount(bits & half_b) for bits in database])

    states = []
    for k in range(half + 1):
        mask = (in_a == half - k) & (in_b == k)
        amplitudes = np.zeros(basis.dimension, dtype=complex)
        amplitudes[:database.size][mask] = 1.0 / math.sqrt(int(mask.sum()))
        states.append(StateVector(basis, amplitudes))
    return states


def fidelity_deviation(f: StateVector, delta_f: StateVector) -> float:
    """P = 1 - 2 |Re <f|delta_f>|."""
    return 1.0 - 2.0 * abs(f.overlap(delta_f).real)


def measure_sample(state: StateVector, n_shots: int, seed: Optional[int]) -> List[str]:
    """Fluorescence outcomes: ion bitstrings drawn from |amplitude|^2, phonons traced out."""
    if n_shots <= 0:
        return []
    probabilities = state.probabilities()
    total = probabilities.sum()
    if total <= 0:
        raise ConfigurationError("cannot sample from the zero vector")
    rng = np.random.default_rng(seed)
    drawn = rng.choice(state.basis.dimension, size=n_shots, p=probabilities / total)
    n_ions = state.basis.n_ions
    return [format_ion_bits(state.basis.kets[i].ion_bits, n_ions) for i in drawn]


def oracle_phase_report(config: AlgorithmConfig, basis: Optional[SectorBasis] = None,
                        integrator: Optional[PulseIntegrator] = None,
                        settings: Optional[IntegratorSettings] = None) -> PhaseReport:
    """phi_k of the oracle pulse, probed with the product Dicke states Phi_k."""
    basis = integrator.basis if integrator is not None else (basis or build_sector_basis(config.ions))
    probes = phi_states(config.ions, config.marked_bits, basis)
    labels = [f"phi_{k}" for k in range(len(probes))]
    return extract_phases(basis, config.oracle_pulse, probes, labels, settings, integrator)


def reflection_phase_report(config: AlgorithmConfig, basis: Optional[SectorBasis] = None,
                            integrator: Optional[PulseIntegrator] = None,
                            settings: Optional[IntegratorSettings] = None) -> PhaseReport:
    """phi_j of the reflection pulse, probed with one m_j = 0 state per chain."""
    basis = integrator.basis if integrator is not None else (basis or build_sector_basis(config.ions))
    ms_basis = build_ms_basis(basis, build_collective_operators(basis, config.ions.all_ions))
    representatives = chain_representatives(ms_basis)
    labels = [f"j={j}" for j in representatives]
    return extract_phases(basis, config.reflection_pulse, list(representatives.values()),
                          labels, settings, integrator)


def run_search(config: AlgorithmConfig, settings: Optional[IntegratorSettings] = None,
               progress: Optional[Callable[[int, float], None]] = None) -> RunResult:
    """Run the full-sector search and record the marked population after every step."""
    began = time.perf_counter()
    basis = build_sector_basis(config.ions)
    metrics = MetricsCollector()
    integrator = PulseIntegrator(basis, settings, metrics)
    marked = basis.position(marked_ket(config.ions, config.marked_bits))
    pair = config.step_duration

    def row(step: float, tau_elapsed: float, state: StateVector) -> TracePoint:
        return TracePoint(step, tau_elapsed, float(abs(state.amplitudes[marked]) ** 2), state.norm())

    def advance(state: StateVector, pulse: PulseParams, role: str,
                step: int, offset: float) -> Tuple[StateVector, List[TracePoint]]:
        try:
            if config.trace_points:
                samples = propagate_trace(state, pulse, config.trace_points, integrator=integrator, category=role)
                rows = []
                for tau, sampled in samples[:-1]:
                    elapsed = (step - 1) * pair + offset + tau + pulse.window
                    rows.append(row(step - 1 + (offset + tau + pulse.window) / pair, elapsed, sampled))
                return samples[-1][1], rows
            return propagate(state, pulse, integrator=integrator, category=role), []
        except IntegrationError as exc:
            raise exc.at_step(step) from exc

    state = dicke_state(basis, config.ions.excitations)
    initial_norm = state.norm()
    trace = [row(0, 0.0, state)]
    logger.info("search N=%d marked=%s steps=%d (sector dimension %d)",
                config.ions.n_ions, config.marked_bits, config.n_steps, basis.dimension)

    for step in range(1, config.n_steps + 1):
        state, rows = advance(state, config.oracle_pulse, "oracle", step, 0.0)
        trace.extend(rows)
        if config.record_mid_step or config.trace_points:
            mid = config.oracle_pulse.duration
            trace.append(row(step - 1 + mid / pair, (step - 1) * pair + mid, state))
        state, rows = advance(state, config.reflection_pulse, "reflection", step, config.oracle_pulse.duration)
        trace.extend(rows)
        trace.append(row(step, step * pair, state))
        logger.info("step %d: marked population %.6f", step, trace[-1].marked_population)
        if progress is not None:
            progress(step, trace[-1].marked_population)

    populations = [(int(r.step), r.marked_population) for r in trace if r.is_step_boundary]
    norm_drift = max(abs(r.norm - initial_norm) for r in trace)

    oracle_phases = reflection_phases = None
    if config.extract_phases:
        oracle_phases = oracle_phase_report(config, integrator=integrator)
        reflection_phases = reflection_phase_report(config, integrator=integrator)

    return RunResult(
        config=config,
        populations=populations,
        final_fidelity=populations[-1][1],
        norm_drift=norm_drift,
        oracle_phases=oracle_phases,
        reflection_phases=reflection_phases,
        samples=measure_sample(state, config.n_shots, config.rng_seed),
        final_state=state,
        trace=trace,
        metrics=metrics.summary(),
        wall_time=time.perf_counter() - began,
    )


@dataclass(frozen=True)
class EffectiveOperators:
    """Reflection and oracle as products of Householder reflections on the database manifold."""
    reflection: np.ndarray
    oracle: np.ndarray

    def grover(self) -> np.ndarray:
        return self.reflection @ self.oracle


@dataclass(frozen=True)
class SensitivityPoint:
    epsilon: float
    pattern: str
    predicted_fidelity: float
    overlap_fidelity: float
    marked_population: float
    reference_population: float
    bracket: complex


def _chain_phases(report: PhaseReport) -> Dict[int, float]:
    return {int(entry.label.split("=")[1]): entry.acquired_phase for entry in report.entries}


def effective_operators(config: AlgorithmConfig, reflection_phases: Mapping[int, float],
                        oracle_phases: Sequence[float],
                        basis: Optional[SectorBasis] = None) -> EffectiveOperators:
    """Database-manifold model of both pulses from their chain and Phi_k phases.

    The reflection imprints reflection_phases[j] on every m_j = 0 MS state of
    chain family j; the oracle imprints oracle_phases[k] on Phi_k and acts
    trivially on the rest of the manifold.
    """
    basis = basis or build_sector_basis(config.ions)
    n_db = basis.database_dimension
    ms_basis = build_ms_basis(basis, build_collective_operators(basis, config.ions.all_ions))
    columns = ms_basis.database_columns()
    vectors = [ms_basis.matrix[:n_db, i] for i in columns]
    phases = [reflection_phases[ms_basis.labels[i].j] for i in columns]
    reflection = coupled_reflections(vectors, phases)

    probes = phi_states(config.ions, config.marked_bits, basis)
    if len(oracle_phases) != len(probes):
        raise ConfigurationError(f"expected {len(probes)} oracle phases, got {len(oracle_phases)}")
    oracle = coupled_reflections([p.amplitudes[:n_db] for p in probes], list(oracle_phases))
    return EffectiveOperators(reflection=reflection, oracle=oracle)


def _effective_final_state(operators: EffectiveOperators, start: np.ndarray, n_steps: int) -> np.ndarray:
    grover = operators.grover()
    state = start
    for _ in range(n_steps):
        state = grover @ state
    return state


def _principal(phase: float) -> float:
    """Angle in (-pi, pi]."""
    wrapped = math.remainder(phase, 2 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


def phase_sensitivity(config: AlgorithmConfig, epsilons: Sequence[float] = (0.005, 0.01),
                      pattern: str = "uniform",
                      reports: Optional[Tuple[PhaseReport, PhaseReport]] = None,
                      settings: Optional[IntegratorSettings] = None) -> List[SensitivityPoint]:
    """Perturb all extracted phases by a relative epsilon and compare predicted and direct fidelity.

    reports is (reflection report, oracle report); they are measured when omitted.
    With pattern "alternating" the sign of the perturbation alternates across
    the phase list (reflection chains by descending j, then Phi_k by k).
    The perturbed state is rotated onto the reference global phase before
    delta_f is formed, so the bracket <f|delta_f> is real.
    """
    if pattern not in SENSITIVITY_PATTERNS:
        raise ConfigurationError(f"pattern must be one of {SENSITIVITY_PATTERNS}, got {pattern!r}")
    basis = build_sector_basis(config.ions)
    if reports is None:
        integrator = PulseIntegrator(basis, settings)
        reports = (reflection_phase_report(config, integrator=integrator),
                   oracle_phase_report(config, integrator=integrator))
    reflection_report, oracle_report = reports
    chain_phases = {j: _principal(p) for j, p in _chain_phases(reflection_report).items()}
    oracle_phases = [_principal(p) for p in oracle_report.phases]

    n_db = basis.database_dimension
    start = dicke_state(basis, config.ions.excitations).amplitudes[:n_db]
    marked = basis.position(marked_ket(config.ions, config.marked_bits))

    def embed(vector: np.ndarray) -> StateVector:
        amplitudes = np.zeros(basis.dimension, dtype=complex)
        amplitudes[:n_db] = vector
        return StateVector(basis, amplitudes)

    reference = _effective_final_state(
        effective_operators(config, chain_phases, oracle_phases, basis), start, config.n_steps)
    reference_population = float(abs(reference[marked]) ** 2)
    chain_order = sorted(chain_phases, reverse=True)

    points = []
    for epsilon in epsilons:
        signs = [1.0 if pattern == "uniform" or i % 2 == 0 else -1.0
                 for i in range(len(chain_order) + len(oracle_phases))]
        perturbed_chains = {j: chain_phases[j] * (1.0 + signs[i] * epsilon) for i, j in enumerate(chain_order)}
        offset = len(chain_order)
        perturbed_oracle = [p * (1.0 + signs[offset + k] * epsilon) for k, p in enumerate(oracle_phases)]
        final = _effective_final_state(
            effective_operators(config, perturbed_chains, perturbed_oracle, basis), start, config.n_steps)

        f, f_eps = embed(reference), embed(final)
        overlap = f.overlap(f_eps)
        aligned = f_eps.amplitudes * (overlap.conjugate() / abs(overlap)) if abs(overlap) > 0 else f_eps.amplitudes
        delta = StateVector(basis, aligned - f.amplitudes)
        points.append(SensitivityPoint(
            epsilon=float(epsilon),
            pattern=pattern,
            predicted_fidelity=fidelity_deviation(f, delta),
            overlap_fidelity=float(abs(overlap) ** 2),
            marked_population=float(abs(final[marked]) ** 2),
            reference_population=reference_population,
            bracket=f.overlap(delta),
        ))
    return points
