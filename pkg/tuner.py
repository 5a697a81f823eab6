#!/usr/bin/env python3
"""
Pulse Parameter Tuner
=====================

Finds (g0T, deltaT) for which a single pulse acts on the database manifold
as a Householder reflection: the inversion about the Dicke state for the
all-ion reflection pulse, the marked-state phase flip for the half-chain
oracle pulse.

The merit function is the trace infidelity

    1 - |Tr(P U P U_ideal^+)| / dim P,

with P the projector onto the database manifold (or onto its
permutation-symmetric part). A coarse grid scan is followed by bounded
Nelder-Mead refinement from the best cell.

Evaluation "reduced" computes the same trace from the return amplitudes of
independent pseudospin ladders, which is exact because both pulses conserve
the relevant pseudospins. Evaluation "sector" propagates the database
columns through the full sector.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from algorithm import default_marked_bits, phi_states
from collective import (
    LadderSpec,
    build_collective_operators,
    build_ms_basis,
    chain_census,
    chain_representatives,
    spin_ladder,
    spin_multiplicity,
)
from dynamics import (
    DEFAULT_WINDOW,
    FRAMES,
    IntegratorSettings,
    PhaseReport,
    PulseIntegrator,
    PulseParams,
    extract_phases,
    ladder_return_amplitudes,
)
from exceptions import ConfigurationError, TuningFailedError
from hilbert import IonConfig, SectorBasis, build_sector_basis, marked_ket, validate_marked_bits
from ideal_search import householder

logger = logging.getLogger(__name__)

OPERATOR_KINDS = ("reflection", "oracle")
SUBSPACES = ("database", "symmetric")
EVALUATIONS = ("reduced", "sector")

Point = Tuple[float, float]


@dataclass(frozen=True)
class TuneTarget:
    operator_kind: str
    ions: IonConfig
    g0T_bounds: Point = (1.0, 40.0)
    deltaT_bounds: Point = (1.0, 40.0)
    target_phase: float = math.pi
    marked_bits: Optional[str] = None
    grid_density: int = 24
    refine_tolerance: float = 1e-6
    objective_threshold: float = 0.05
    max_refine_evaluations: int = 400
    window: float = DEFAULT_WINDOW
    frame: str = "chain"
    subspace: str = "database"
    evaluation: str = "reduced"
    tie_tolerance: float = 1e-9

    def __post_init__(self) -> None:
        if self.operator_kind not in OPERATOR_KINDS:
            raise ConfigurationError(f"operator_kind must be one of {OPERATOR_KINDS}, got {self.operator_kind!r}")
        for name, (low, high) in (("g0T", self.g0T_bounds), ("deltaT", self.deltaT_bounds)):
            if not (0 < low <= high) or not math.isfinite(high):
                raise ConfigurationError(f"{name} bounds must be positive and ordered, got ({low}, {high})")
        if self.grid_density < 1:
            raise ConfigurationError(f"grid_density must be >= 1, got {self.grid_density}")
        if self.refine_tolerance <= 0 or self.max_refine_evaluations < 0:
            raise ConfigurationError("refine_tolerance must be positive and the evaluation cap non-negative")
        if self.frame not in FRAMES:
            raise ConfigurationError(f"frame must be one of {FRAMES}, got {self.frame!r}")
        if self.subspace not in SUBSPACES:
            raise ConfigurationError(f"subspace must be one of {SUBSPACES}, got {self.subspace!r}")
        if self.evaluation not in EVALUATIONS:
            raise ConfigurationError(f"evaluation must be one of {EVALUATIONS}, got {self.evaluation!r}")
        if self.operator_kind == "oracle":
            if self.marked_bits is None:
                object.__setattr__(self, "marked_bits", default_marked_bits(self.ions.n_ions))
            validate_marked_bits(self.ions, self.marked_bits)

    @property
    def addressed(self) -> int:
        if self.operator_kind == "oracle":
            return validate_marked_bits(self.ions, self.marked_bits)
        return self.ions.all_ions

    def pulse(self, g0T: float, deltaT: float) -> PulseParams:
        return PulseParams(g0T, deltaT, self.addressed, self.window, self.frame)


@dataclass
class TuneResult:
    target: TuneTarget
    best: PulseParams
    objective_value: float
    phase_report: PhaseReport
    operator_fidelity: float
    sector_infidelity: float
    grid_evaluations: int
    refine_evaluations: int

    def to_dict(self) -> Dict[str, object]:
        return {
            "best": {"g0T": self.best.g0T, "deltaT": self.best.deltaT, "window": self.best.window,
                     "addressed": self.best.addressed, "frame": self.best.frame},
            "objective_value": self.objective_value,
            "sector_infidelity": self.sector_infidelity,
            "operator_fidelity": self.operator_fidelity,
            "phase_report": self.phase_report.to_dict(),
            "grid_evaluations": self.grid_evaluations,
            "refine_evaluations": self.refine_evaluations,
        }


@dataclass(frozen=True)
class ReducedModel:
    """Ladders whose weighted return amplitudes give the restricted trace."""
    ladders: Tuple[LadderSpec, ...]
    weights: np.ndarray
    target_index: int
    dimension: float


def reduced_model(target: TuneTarget) -> ReducedModel:
    config = target.ions
    if target.operator_kind == "reflection":
        census = chain_census(config)
        ladders = tuple(spin_ladder(spec.j, 0, target.frame) for spec in census)
        if target.subspace == "database":
            weights = np.array([spec.degeneracy for spec in census], dtype=float)
        else:
            weights = np.ones(len(census))
        return ReducedModel(ladders, weights, 0, float(weights.sum()))

    half = config.excitations
    spin = half / 2.0
    if target.subspace == "symmetric":
        ladders = tuple(spin_ladder(spin, spin - k, target.frame) for k in range(half + 1))
        return ReducedModel(ladders, np.ones(half + 1), 0, float(half + 1))

    ladder_list: List[LadderSpec] = []
    weights: List[float] = []
    for unaddressed in range(half + 1):
        m = spin - unaddressed
        for t in range(int(round(spin - abs(m))) + 1):
            j = abs(m) + t
            ladder_list.append(spin_ladder(j, m, target.frame))
            weights.append(math.comb(half, unaddressed) * spin_multiplicity(half, j))
    weight_array = np.asarray(weights, dtype=float)
    # the first ladder (n_B = 0, j_A = m_A = N/4) is the marked ket
    return ReducedModel(tuple(ladder_list), weight_array, 0, float(weight_array.sum()))


def _trace_infidelity(amplitudes: np.ndarray, weights: np.ndarray, target_index: int,
                      dimension: float, target_phase: float) -> np.ndarray:
    """1 - |sum_i w_i u_i + (e^{-i phi} - 1) u_target| / dimension, row-wise."""
    trace = amplitudes @ weights + (np.exp(-1j * target_phase) - 1.0) * amplitudes[..., target_index]
    return 1.0 - np.abs(trace) / dimension


def reduced_infidelity(points: Sequence[Point], target: TuneTarget,
                       settings: Optional[IntegratorSettings] = None,
                       model: Optional[ReducedModel] = None) -> np.ndarray:
    """Objective at many (g0T, deltaT) points from one block-diagonal ladder integration."""
    model = model or reduced_model(target)
    ladders, pulses = [], []
    for g0T, deltaT in points:
        pulse = target.pulse(g0T, deltaT)
        ladders.extend(model.ladders)
        pulses.extend([pulse] * len(model.ladders))
    amplitudes = ladder_return_amplitudes(ladders, pulses, settings).reshape(len(points), len(model.ladders))
    return _trace_infidelity(amplitudes, model.weights, model.target_index, model.dimension, target.target_phase)


def _subspace_vectors(target: TuneTarget, basis: SectorBasis) -> Tuple[np.ndarray, np.ndarray]:
    """Orthonormal columns spanning the restricted subspace and the Householder vector."""
    n_db = basis.database_dimension
    if target.operator_kind == "reflection":
        householder_vector = np.zeros(basis.dimension, dtype=complex)
        householder_vector[:n_db] = 1.0 / math.sqrt(n_db)
    else:
        householder_vector = basis.basis_vector(basis.position(marked_ket(target.ions, target.marked_bits)))

    if target.subspace == "database":
        return np.eye(basis.dimension, dtype=complex)[:, :n_db], householder_vector
    if target.operator_kind == "reflection":
        ms_basis = build_ms_basis(basis, build_collective_operators(basis, target.ions.all_ions))
        columns = [state.amplitudes for state in chain_representatives(ms_basis).values()]
    else:
        columns = [state.amplitudes for state in phi_states(target.ions, target.marked_bits, basis)]
    return np.column_stack(columns), householder_vector


def operator_infidelity(pulse: PulseParams, target: TuneTarget,
                        settings: Optional[IntegratorSettings] = None,
                        integrator: Optional[PulseIntegrator] = None) -> float:
    """1 - |Tr(P U P U_ideal^+)| / dim P, computed in the full sector."""
    basis = integrator.basis if integrator is not None else build_sector_basis(target.ions)
    runner = integrator or PulseIntegrator(basis, settings)
    subspace, vector = _subspace_vectors(target, basis)
    evolved, _ = runner.evolve(subspace, pulse, category="tuner")
    restricted = subspace.conj().T @ evolved
    ideal = householder(subspace.conj().T @ vector, target.target_phase)
    trace = np.trace(restricted @ ideal.conj().T)
    return float(1.0 - abs(trace) / subspace.shape[1])


def target_phase_report(pulse: PulseParams, target: TuneTarget,
                        settings: Optional[IntegratorSettings] = None,
                        integrator: Optional[PulseIntegrator] = None) -> PhaseReport:
    """Chain phases for a reflection pulse, Phi_k phases for an oracle pulse."""
    basis = integrator.basis if integrator is not None else build_sector_basis(target.ions)
    if target.operator_kind == "reflection":
        ms_basis = build_ms_basis(basis, build_collective_operators(basis, target.ions.all_ions))
        probes = chain_representatives(ms_basis)
        return extract_phases(basis, pulse, list(probes.values()), [f"j={j}" for j in probes],
                              settings, integrator)
    states = phi_states(target.ions, target.marked_bits, basis)
    return extract_phases(basis, pulse, states, [f"phi_{k}" for k in range(len(states))],
                          settings, integrator)


def _axis(bounds: Point, density: int) -> np.ndarray:
    low, high = bounds
    if low == high or density == 1:
        return np.array([low if low == high else 0.5 * (low + high)])
    return np.linspace(low, high, density)


class PulseTuner:
    """Grid scan plus Nelder-Mead refinement for one TuneTarget."""

    def __init__(self, target: TuneTarget, settings: Optional[IntegratorSettings] = None):
        self.target = target
        self.settings = settings or IntegratorSettings()
        self.logger = logging.getLogger(__name__)
        self.basis = build_sector_basis(target.ions)
        self.integrator = PulseIntegrator(self.basis, self.settings)
        self.model = reduced_model(target) if target.evaluation == "reduced" else None
        self._cache: Dict[Point, float] = {}

    def objective_batch(self, points: Sequence[Point]) -> np.ndarray:
        if self.model is not None:
            return reduced_infidelity(points, self.target, self.settings, self.model)
        return np.array([operator_infidelity(self.target.pulse(g, d), self.target, integrator=self.integrator)
                         for g, d in points])

    def objective(self, g0T: float, deltaT: float) -> float:
        key = (float(g0T), float(deltaT))
        if key not in self._cache:
            self._cache[key] = float(self.objective_batch([key])[0])
        return self._cache[key]

    def grid_scan(self) -> List[Tuple[float, float, float]]:
        """(objective, g0T, deltaT) for every grid cell, rows evaluated concurrently."""
        g_axis = _axis(self.target.g0T_bounds, self.target.grid_density)
        d_axis = _axis(self.target.deltaT_bounds, self.target.grid_density)
        rows = [[(float(g), float(d)) for g in g_axis] for d in d_axis]
        threads = max(1, min(self.settings.threads, len(rows)))

        if threads == 1:
            values = [self.objective_batch(row) for row in rows]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                values = list(pool.map(self.objective_batch, rows))

        cells = []
        for row, row_values in zip(rows, values):
            for (g, d), value in zip(row, row_values):
                cells.append((float(value), g, d))
        self.logger.info("grid scan of %d cells: best objective %.3e", len(cells), min(c[0] for c in cells))
        return cells

    def select(self, cells: Sequence[Tuple[float, float, float]]) -> Tuple[float, float, float]:
        """Best cell; near-ties go to the smallest g0T, then the smallest deltaT."""
        best = min(value for value, _, _ in cells)
        near = [c for c in cells if c[0] <= best + self.target.tie_tolerance]
        return min(near, key=lambda c: (c[1], c[2]))

    def refine(self, start: Point, spacing: Point) -> Tuple[Point, float, int]:
        bounds = [self.target.g0T_bounds, self.target.deltaT_bounds]
        free = [i for i, (low, high) in enumerate(bounds) if high > low]
        if not free or self.target.max_refine_evaluations == 0:
            return start, self.objective(*start), 0

        def full_point(x: np.ndarray) -> Point:
            point = list(start)
            for i, value in zip(free, x):
                low, high = bounds[i]
                point[i] = float(min(max(value, low), high))
            return point[0], point[1]

        x0 = np.array([start[i] for i in free])
        simplex = [x0]
        for axis, i in enumerate(free):
            low, high = bounds[i]
            step = spacing[i] / 2.0 if spacing[i] > 0 else 0.05 * (high - low)
            vertex = x0.copy()
            vertex[axis] = x0[axis] + step if x0[axis] + step <= high else x0[axis] - step
            simplex.append(vertex)

        result = minimize(
            lambda x: self.objective(*full_point(x)),
            x0,
            method="Nelder-Mead",
            bounds=[bounds[i] for i in free],
            options={
                "initial_simplex": np.array(simplex),
                "fatol": self.target.refine_tolerance,
                "xatol": 1e-6,
                "maxfev": self.target.max_refine_evaluations,
            },
        )
        point = full_point(result.x)
        self.logger.info("refinement: %d evaluations, objective %.3e at g0T=%.4f deltaT=%.4f",
                         result.nfev, result.fun, point[0], point[1])
        return point, self.objective(*point), int(result.nfev)

    def run(self) -> TuneResult:
        cells = self.grid_scan()
        value, g0T, deltaT = self.select(cells)
        spacing = tuple(
            (high - low) / (self.target.grid_density - 1) if self.target.grid_density > 1 else high - low
            for low, high in (self.target.g0T_bounds, self.target.deltaT_bounds)
        )
        point, refined, evaluations = self.refine((g0T, deltaT), spacing)
        if refined > value:
            point, refined = (g0T, deltaT), value

        best = self.target.pulse(*point)
        sector = operator_infidelity(best, self.target, integrator=self.integrator)
        result = TuneResult(
            target=self.target,
            best=best,
            objective_value=refined,
            phase_report=target_phase_report(best, self.target, integrator=self.integrator),
            operator_fidelity=float(min(1.0, max(0.0, 1.0 - sector))),
            sector_infidelity=sector,
            grid_evaluations=len(cells),
            refine_evaluations=evaluations,
        )
        if refined > self.target.objective_threshold:
            raise TuningFailedError(
                f"best {self.target.operator_kind} objective {refined:.3e} at g0T={best.g0T:.4f}, "
                f"deltaT={best.deltaT:.4f} is above the threshold {self.target.objective_threshold:.3e}",
                best=result,
            )
        return result


def tune(target: TuneTarget, settings: Optional[IntegratorSettings] = None) -> TuneResult:
    """Grid scan then bounded Nelder-Mead refinement; deterministic for a given target."""
    return PulseTuner(target, settings).run()
