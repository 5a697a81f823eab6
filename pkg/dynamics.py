#!/usr/bin/env python3
"""
Pulse Dynamics
==============

Schroedinger propagation of sector states through Gaussian red-sideband
pulses, in the dimensionless time tau = t/T:

    H(tau) T = g0T exp(-tau^2) (a J+ + a+ J-) + deltaT D,

with the ladder operators summed over the addressed ions and D = Jz of the
whole chain (frame "chain", default) or of the addressed ions (frame
"addressed"). Pulses are integrated on tau in [-K, K]; between pulses the
state is frozen.

Two integrators are provided:

- "dop853": adaptive eighth-order Runge-Kutta (scipy solve_ivp) in the
  interaction picture with respect to deltaT D. The diagonal phase is
  restored exactly at the end of the pulse.
- "cfet4": fixed-step fourth-order commutator-free exponential stepper built
  on scipy expm_multiply. Unitary to round-off; used for order checks.
"""

import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply

from collective import CollectiveOperators, LadderSpec, build_collective_operators
from exceptions import ConfigurationError, IntegrationError
from hilbert import SectorBasis, StateVector
from utils.metrics_collector import MetricsCollector

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 4.0
FRAMES = ("chain", "addressed")
METHODS = ("dop853", "cfet4")

_SQRT3_6 = math.sqrt(3.0) / 6.0
_CFET_NODES = (0.5 - _SQRT3_6, 0.5 + _SQRT3_6)
_CFET_WEIGHTS = (0.25 - _SQRT3_6, 0.25 + _SQRT3_6)


@dataclass(frozen=True)
class PulseParams:
    """A Gaussian pulse g(tau) = g0T exp(-tau^2) with constant detuning deltaT."""
    g0T: float
    deltaT: float
    addressed: int
    window: float = DEFAULT_WINDOW
    frame: str = "chain"

    def __post_init__(self) -> None:
        if not math.isfinite(self.g0T) or self.g0T < 0:
            raise ConfigurationError(f"g0T must be finite and >= 0, got {self.g0T}")
        if not math.isfinite(self.deltaT):
            raise ConfigurationError(f"deltaT must be finite, got {self.deltaT}")
        if not math.isfinite(self.window) or self.window <= 0:
            raise ConfigurationError(f"window K must be > 0, got {self.window}")
        if self.addressed <= 0:
            raise ConfigurationError("a pulse must address at least one ion")
        if self.frame not in FRAMES:
            raise ConfigurationError(f"detuning frame must be one of {FRAMES}, got {self.frame!r}")

    @classmethod
    def from_physical(cls, lamb_dicke: float, rabi_peak: float, duration: float,
                      detuning: float, n_ions: int, addressed: int,
                      window: float = DEFAULT_WINDOW, frame: str = "chain") -> "PulseParams":
        """Pulse from laser parameters: g0 = eta Omega0 / (2 sqrt(N)), g0T = g0 T, deltaT = delta T."""
        g0 = lamb_dicke * rabi_peak / (2.0 * math.sqrt(n_ions))
        return cls(g0T=g0 * duration, deltaT=detuning * duration, addressed=addressed,
                   window=window, frame=frame)

    @property
    def duration(self) -> float:
        return 2.0 * self.window

    def coupling(self, tau: float) -> float:
        return self.g0T * math.exp(-tau * tau)

    def with_values(self, g0T: float, deltaT: float) -> "PulseParams":
        return replace(self, g0T=g0T, deltaT=deltaT)


@dataclass(frozen=True)
class IntegratorSettings:
    method: str = "dop853"
    rtol: float = 1e-12
    atol: float = 1e-13
    max_rhs_evaluations: int = 5_000_000
    cfet_steps: int = 4000
    norm_tolerance: float = 1e-9
    threads: int = 1

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigurationError(f"integrator method must be one of {METHODS}, got {self.method!r}")
        if self.rtol <= 0 or self.atol <= 0:
            raise ConfigurationError("integrator tolerances must be positive")
        if self.cfet_steps < 1 or self.max_rhs_evaluations < 1 or self.threads < 1:
            raise ConfigurationError("step counts, evaluation budget and threads must be positive")

    def halved(self) -> "IntegratorSettings":
        """Settings with half the tolerance (dop853) or twice the steps (cfet4)."""
        return replace(self, rtol=self.rtol / 2, atol=self.atol / 2, cfet_steps=self.cfet_steps * 2)


@dataclass(frozen=True)
class PropagationStats:
    rhs_evaluations: int
    wall_time: float
    norm_drift: float


@dataclass(frozen=True)
class ProbePhase:
    label: str
    acquired_phase: float
    return_population: float


@dataclass(frozen=True)
class PhaseReport:
    """Phase and return population of each probe after one pulse."""
    entries: Tuple[ProbePhase, ...]
    pulse: Optional[PulseParams] = None

    @property
    def phases(self) -> np.ndarray:
        return np.array([entry.acquired_phase for entry in self.entries])

    @property
    def return_populations(self) -> np.ndarray:
        return np.array([entry.return_population for entry in self.entries])

    def by_label(self, label: str) -> ProbePhase:
        for entry in self.entries:
            if entry.label == label:
                return entry
        raise KeyError(label)

    def to_dict(self) -> Dict[str, object]:
        data: Dict[str, object] = {
            "probes": [
                {"label": e.label, "acquired_phase": e.acquired_phase, "return_population": e.return_population}
                for e in self.entries
            ]
        }
        if self.pulse is not None:
            data["pulse"] = {
                "g0T": self.pulse.g0T,
                "deltaT": self.pulse.deltaT,
                "window": self.pulse.window,
                "addressed": self.pulse.addressed,
                "frame": self.pulse.frame,
            }
        return data


@dataclass(frozen=True, eq=False)
class PulseStructure:
    """Time-independent pieces of the pulse Hamiltonian for one addressed set and frame."""
    operators: CollectiveOperators
    detuning: np.ndarray
    raising: sp.csr_matrix = field(repr=False)
    lowering: sp.csr_matrix = field(repr=False)

    @property
    def coupling(self) -> sp.csr_matrix:
        return (self.raising + self.lowering).tocsr()


class _BudgetExceeded(Exception):
    def __init__(self, tau: float) -> None:
        super().__init__(tau)
        self.tau = tau


def phase_distance(a: float, b: float) -> float:
    """Circular distance between two angles, in [0, pi]."""
    return abs((a - b + math.pi) % (2 * math.pi) - math.pi)


def wrap_phase(phase: float) -> float:
    """Angle in [0, 2 pi)."""
    wrapped = phase % (2 * math.pi)
    return 0.0 if wrapped >= 2 * math.pi else wrapped


def unitarity_defect(matrix: np.ndarray) -> float:
    """max |U+U - 1|."""
    return float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[1]))))


def database_block(matrix: np.ndarray, basis: SectorBasis) -> np.ndarray:
    return matrix[basis.database_slice, basis.database_slice]


def _solve_dop853(rhs: Callable[[float, np.ndarray], np.ndarray], y0: np.ndarray,
                  span: Tuple[float, float], t_eval: np.ndarray,
                  settings: IntegratorSettings) -> Tuple[np.ndarray, int]:
    """Integrate with DOP853 under the evaluation budget; returns (states at t_eval, nfev)."""
    counter = [0]

    def counted(tau: float, y: np.ndarray) -> np.ndarray:
        counter[0] += 1
        if counter[0] > settings.max_rhs_evaluations:
            raise _BudgetExceeded(tau)
        return rhs(tau, y)

    try:
        sol = solve_ivp(counted, span, y0, method="DOP853", t_eval=t_eval,
                        rtol=settings.rtol, atol=settings.atol)
    except _BudgetExceeded as exc:
        raise IntegrationError(
            f"evaluation budget of {settings.max_rhs_evaluations} exhausted",
            achieved_tolerance=settings.rtol, tau_reached=exc.tau,
        ) from None
    if sol.status != 0:
        reached = float(sol.t[-1]) if sol.t.size else span[0]
        raise IntegrationError(sol.message, achieved_tolerance=settings.rtol, tau_reached=reached)
    return sol.y, counter[0]


class PulseIntegrator:
    """Propagates sector states through pulses on one SectorBasis."""

    def __init__(self, basis: SectorBasis, settings: Optional[IntegratorSettings] = None,
                 metrics: Optional[MetricsCollector] = None):
        self.basis = basis
        self.settings = settings or IntegratorSettings()
        self.metrics = metrics
        self.logger = logging.getLogger(__name__)
        self._structures: Dict[Tuple[int, str], PulseStructure] = {}
        self._lock = threading.Lock()

    def structure(self, pulse: PulseParams) -> PulseStructure:
        key = (pulse.addressed, pulse.frame)
        with self._lock:
            cached = self._structures.get(key)
            if cached is None:
                ops = build_collective_operators(self.basis, pulse.addressed)
                if pulse.frame == "chain":
                    detuning = (self.basis.excited - self.basis.config.excitations).astype(float)
                else:
                    detuning = ops.sector_j_z.diagonal().real.astype(float)
                cached = PulseStructure(ops, detuning, ops.sector_raising.astype(complex),
                                        ops.sector_lowering.astype(complex))
                self._structures[key] = cached
            return cached

    def hamiltonian(self, pulse: PulseParams, tau: float) -> sp.csr_matrix:
        structure = self.structure(pulse)
        return (pulse.coupling(tau) * structure.coupling
                + pulse.deltaT * sp.diags(structure.detuning)).tocsr()

    def evolve(self, amplitudes: np.ndarray, pulse: PulseParams,
               sample_taus: Optional[Sequence[float]] = None,
               category: str = "pulse") -> Tuple[np.ndarray, List[Tuple[float, np.ndarray]]]:
        """Evolve a vector (or the columns of a matrix) through the whole pulse.

        Returns the final amplitudes and (tau, amplitudes) pairs at sample_taus.
        """
        start = np.asarray(amplitudes, dtype=complex)
        if start.shape[0] != self.basis.dimension:
            raise ConfigurationError(
                f"state has {start.shape[0]} rows, sector dimension is {self.basis.dimension}"
            )
        wanted = () if sample_taus is None else sample_taus
        taus = sorted(float(t) for t in wanted if -pulse.window <= t <= pulse.window)
        began = time.perf_counter()
        if self.settings.method == "cfet4":
            final, samples, evaluations = self._evolve_cfet4(start, pulse, taus)
        else:
            final, samples, evaluations = self._evolve_dop853(start, pulse, taus)

        drift = float(np.max(np.abs(np.linalg.norm(final.reshape(start.shape[0], -1), axis=0)
                                    - np.linalg.norm(start.reshape(start.shape[0], -1), axis=0))))
        stats = PropagationStats(evaluations, time.perf_counter() - began, drift)
        self.logger.debug("%s pulse g0T=%.4f deltaT=%.4f: %d evaluations, %.3fs, norm drift %.2e",
                          category, pulse.g0T, pulse.deltaT, stats.rhs_evaluations,
                          stats.wall_time, stats.norm_drift)
        if drift > self.settings.norm_tolerance:
            self.logger.warning("%s pulse norm drift %.2e exceeds %.1e",
                                category, drift, self.settings.norm_tolerance)
        if self.metrics is not None:
            with self._lock:
                self.metrics.record_integration(category, stats.rhs_evaluations,
                                                stats.wall_time, stats.norm_drift)
        return final, samples

    def _evolve_dop853(self, start: np.ndarray, pulse: PulseParams,
                       taus: List[float]) -> Tuple[np.ndarray, List[Tuple[float, np.ndarray]], int]:
        structure = self.structure(pulse)
        shape = start.shape
        tau0, tau1 = -pulse.window, pulse.window

        def restore(tau: float, z: np.ndarray) -> np.ndarray:
            phase = np.exp(-1j * pulse.deltaT * structure.detuning * (tau - tau0))
            return (phase.reshape((-1,) + (1,) * (len(shape) - 1)) * z.reshape(shape))

        if pulse.g0T == 0.0:
            return restore(tau1, start), [(t, restore(t, start)) for t in taus], 0

        raising, lowering = structure.raising, structure.lowering
        columns = start.reshape(shape[0], -1).shape[1]

        def rhs(tau: float, y: np.ndarray) -> np.ndarray:
            z = y.reshape(shape[0], columns)
            rotation = np.exp(1j * pulse.deltaT * (tau - tau0))
            coupled = rotation * (raising @ z) + rotation.conjugate() * (lowering @ z)
            return (-1j * pulse.coupling(tau) * coupled).ravel()

        t_eval = np.unique(np.append(np.asarray(taus, dtype=float), tau1))
        states, evaluations = _solve_dop853(rhs, start.ravel(), (tau0, tau1), t_eval, self.settings)
        samples = []
        for i, tau in enumerate(t_eval):
            if tau in taus:
                samples.append((float(tau), restore(tau, states[:, i])))
        return restore(tau1, states[:, -1]), samples, evaluations

    def _evolve_cfet4(self, start: np.ndarray, pulse: PulseParams,
                      taus: List[float]) -> Tuple[np.ndarray, List[Tuple[float, np.ndarray]], int]:
        structure = self.structure(pulse)
        coupling = structure.coupling.tocsc()
        detuning = sp.diags(structure.detuning, format="csc")
        steps = self.settings.cfet_steps
        h = pulse.duration / steps
        tau0 = -pulse.window
        wanted: Dict[int, List[float]] = {}
        for tau in taus:
            wanted.setdefault(int(round((tau - tau0) / h)), []).append(tau)

        state = start.copy()
        samples: List[Tuple[float, np.ndarray]] = [(t, state.copy()) for t in wanted.get(0, [])]
        (c1, c2), (w1, w2) = _CFET_NODES, _CFET_WEIGHTS
        for step in range(steps):
            tau = tau0 + step * h
            g1, g2 = pulse.coupling(tau + c1 * h), pulse.coupling(tau + c2 * h)
            first = -1j * h * ((w2 * g1 + w1 * g2) * coupling + 0.5 * pulse.deltaT * detuning)
            second = -1j * h * ((w1 * g1 + w2 * g2) * coupling + 0.5 * pulse.deltaT * detuning)
            state = expm_multiply(second, expm_multiply(first, state))
            for t in wanted.get(step + 1, []):
                samples.append((t, state.copy()))
        return state, samples, 2 * steps


def hamiltonian_at(basis: SectorBasis, pulse: PulseParams, tau: float) -> sp.csr_matrix:
    """H(tau) T as a sparse matrix over the sector.

    The detuning term follows pulse.frame. In the default "chain" frame it is
    deltaT times (excited ions - N/2) over the whole chain, for every pulse,
    so it vanishes on the database. Frame "addressed" uses Jz of the
    addressed ions only. Builds a fresh integrator per call; use
    PulseIntegrator.hamiltonian inside loops.
    """
    return PulseIntegrator(basis).hamiltonian(pulse, tau)


def _integrator_for(basis: SectorBasis, settings: Optional[IntegratorSettings],
                    integrator: Optional[PulseIntegrator]) -> PulseIntegrator:
    if integrator is not None:
        if integrator.basis is not basis:
            raise ConfigurationError("integrator was built for a different sector basis")
        return integrator
    return PulseIntegrator(basis, settings)


def propagate(state: StateVector, pulse: PulseParams,
              settings: Optional[IntegratorSettings] = None,
              integrator: Optional[PulseIntegrator] = None,
              category: str = "pulse") -> StateVector:
    """Evolve a state through tau in [-K, K]."""
    runner = _integrator_for(state.basis, settings, integrator)
    final, _ = runner.evolve(state.amplitudes, pulse, category=category)
    return StateVector(state.basis, final)


def propagate_trace(state: StateVector, pulse: PulseParams, n_points: int,
                    settings: Optional[IntegratorSettings] = None,
                    integrator: Optional[PulseIntegrator] = None,
                    category: str = "pulse") -> List[Tuple[float, StateVector]]:
    """States at n_points equally spaced times across the pulse, ending at tau = K."""
    if n_points < 1:
        raise ConfigurationError(f"n_points must be >= 1, got {n_points}")
    runner = _integrator_for(state.basis, settings, integrator)
    taus = np.linspace(-pulse.window, pulse.window, n_points + 1)[1:]
    _, samples = runner.evolve(state.amplitudes, pulse, sample_taus=taus, category=category)
    return [(tau, StateVector(state.basis, amplitudes)) for tau, amplitudes in samples]


def pulse_propagator(basis: SectorBasis, pulse: PulseParams,
                     settings: Optional[IntegratorSettings] = None,
                     columns: Optional[Sequence[int]] = None,
                     integrator: Optional[PulseIntegrator] = None) -> np.ndarray:
    """Propagator columns U[:, columns] (all columns by default), one basis ket per column."""
    runner = _integrator_for(basis, settings, integrator)
    selected = list(range(basis.dimension)) if columns is None else list(columns)
    identity = np.eye(basis.dimension, dtype=complex)
    threads = max(1, min(runner.settings.threads, len(selected)))
    size = math.ceil(len(selected) / threads)
    chunks = [selected[i:i + size] for i in range(0, len(selected), size)]

    def run(chunk: List[int]) -> np.ndarray:
        final, _ = runner.evolve(identity[:, chunk], pulse, category="propagator")
        return final

    if len(chunks) == 1:
        return run(chunks[0])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.hstack(list(pool.map(run, chunks)))


def extract_phases(basis: SectorBasis, pulse: PulseParams, probes: Sequence[StateVector],
                   labels: Optional[Sequence[str]] = None,
                   settings: Optional[IntegratorSettings] = None,
                   integrator: Optional[PulseIntegrator] = None) -> PhaseReport:
    """Return phase arg<psi|U|psi> (in [0, 2 pi)) and population |<psi|U|psi>|^2 per probe."""
    if not probes:
        return PhaseReport(entries=(), pulse=pulse)
    names = list(labels) if labels is not None else [f"probe_{i}" for i in range(len(probes))]
    if len(names) != len(probes):
        raise ConfigurationError(f"{len(probes)} probes but {len(names)} labels")
    for name, probe in zip(names, probes):
        if abs(probe.norm() - 1.0) > 1e-9:
            raise ConfigurationError(f"probe {name} is not normalized (norm={probe.norm():.6g})")

    runner = _integrator_for(basis, settings, integrator)
    start = np.column_stack([probe.amplitudes for probe in probes])
    final, _ = runner.evolve(start, pulse, category="probe")
    entries = []
    for i, name in enumerate(names):
        overlap = complex(np.vdot(start[:, i], final[:, i]))
        entries.append(ProbePhase(name, wrap_phase(float(np.angle(overlap))),
                                  min(1.0, abs(overlap) ** 2)))
    return PhaseReport(entries=tuple(entries), pulse=pulse)


def convergence_check(state: StateVector, pulse: PulseParams,
                      settings: Optional[IntegratorSettings] = None) -> float:
    """Largest amplitude change when the integrator tolerance is halved."""
    base = settings or IntegratorSettings()
    coarse = propagate(state, pulse, base, category="convergence")
    fine = propagate(state, pulse, base.halved(), category="convergence")
    return float(np.max(np.abs(coarse.amplitudes - fine.amplitudes)))


def ladder_return_amplitudes(ladders: Sequence[LadderSpec], pulses: Sequence[PulseParams],
                             settings: Optional[IntegratorSettings] = None) -> np.ndarray:
    """<top|U|top> for each (ladder, pulse) pair, integrated as one block-diagonal system.

    Each ladder starts in its top rung. All pulses must share the window K.
    """
    if len(ladders) != len(pulses):
        raise ConfigurationError(f"{len(ladders)} ladders but {len(pulses)} pulses")
    if not ladders:
        return np.zeros(0, dtype=complex)
    window = pulses[0].window
    if any(p.window != window for p in pulses):
        raise ConfigurationError("all pulses of a ladder batch must share the window K")
    base = settings or IntegratorSettings()

    blocks, energies, tops = [], [], []
    offset = 0
    for ladder, pulse in zip(ladders, pulses):
        couplings = np.asarray(ladder.couplings, dtype=float) * pulse.g0T
        blocks.append(sp.diags([couplings, couplings], [-1, 1], shape=(ladder.length, ladder.length)))
        energies.append(np.asarray(ladder.energies, dtype=float) * pulse.deltaT)
        tops.append(offset)
        offset += ladder.length

    coupling = sp.block_diag(blocks, format="csr").astype(complex)
    energy = np.concatenate(energies)
    tops_index = np.asarray(tops)
    tau0, tau1 = -window, window
    start = np.zeros(offset, dtype=complex)
    start[tops_index] = 1.0

    if coupling.nnz == 0:
        final = start
    else:
        def rhs(tau: float, z: np.ndarray) -> np.ndarray:
            rotation = np.exp(1j * energy * (tau - tau0))
            return -1j * math.exp(-tau * tau) * rotation * (coupling @ (rotation.conjugate() * z))

        states, _ = _solve_dop853(rhs, start, (tau0, tau1), np.array([tau1]), base)
        final = states[:, -1]
    return np.exp(-1j * energy[tops_index] * (tau1 - tau0)) * final[tops_index]
