#!/usr/bin/env python3
"""
Collective Pseudospin Algebra
=============================

Collective ion operators, Dicke states and the Morris-Shore decomposition
of the sector into independent chains labelled by the total pseudospin j.

The single ladder operators J+, J- and a, a+ change the total excitation
number, so they live on their natural factor spaces: the ion register of
dimension 2^N and the phonon ladder 0..N/2+1. The products aJ+ and a+J-
and the diagonal operators Jz, J^2 are also stored restricted to the sector,
which is where the dynamics happens.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
import scipy.sparse as sp

from exceptions import ConfigurationError, NumericalDegeneracyError
from hilbert import IonConfig, SectorBasis, StateVector, popcount

logger = logging.getLogger(__name__)

EIGENVALUE_TOLERANCE = 1e-6
SEED_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class CollectiveOperators:
    """Collective operators for one addressed-ion subset."""
    basis: SectorBasis
    addressed: int
    j_plus: sp.csr_matrix
    j_minus: sp.csr_matrix
    j_z: sp.csr_matrix
    j_squared: sp.csr_matrix
    a: sp.csr_matrix
    a_dagger: sp.csr_matrix
    sector_j_z: sp.csr_matrix
    sector_j_squared: sp.csr_matrix
    sector_raising: sp.csr_matrix
    sector_lowering: sp.csr_matrix

    @property
    def n_addressed(self) -> int:
        return popcount(self.addressed)

    @property
    def addresses_all(self) -> bool:
        return self.addressed == self.basis.config.all_ions

    @property
    def sector_coupling(self) -> sp.csr_matrix:
        """aJ+ + a+J- restricted to the sector."""
        return (self.sector_raising + self.sector_lowering).tocsr()


@dataclass(frozen=True)
class LadderSpec:
    """One tridiagonal ladder: rung couplings (in units of g) and detuning weights."""
    couplings: Tuple[float, ...]
    energies: Tuple[float, ...]

    @property
    def length(self) -> int:
        return len(self.energies)


@dataclass(frozen=True)
class ChainSpec:
    """A Morris-Shore chain family of total pseudospin j."""
    j: int
    degeneracy: int
    accessible_length: int
    rung_couplings: Tuple[float, ...]


@dataclass(frozen=True)
class MSLabel:
    j: int
    m: int
    k: int


@dataclass(frozen=True, eq=False)
class MSBasis:
    """Unitary whose columns are the chain states |j, m_j, k>."""
    basis: SectorBasis
    matrix: np.ndarray
    labels: Tuple[MSLabel, ...]
    _columns: Dict[MSLabel, int] = field(repr=False)

    def column_index(self, j: int, m: int, k: int) -> int:
        try:
            return self._columns[MSLabel(j, m, k)]
        except KeyError:
            raise ConfigurationError(f"no MS state with j={j}, m={m}, k={k}") from None

    def column(self, j: int, m: int, k: int) -> np.ndarray:
        return self.matrix[:, self.column_index(j, m, k)]

    def chain_columns(self, j: int, k: int) -> List[int]:
        return [self.column_index(j, -r, k) for r in range(j + 1)]

    def database_columns(self) -> List[int]:
        """Columns with m_j = 0, in label order."""
        return [i for i, label in enumerate(self.labels) if label.m == 0]

    def state(self, j: int, m: int, k: int) -> StateVector:
        return StateVector(self.basis, self.column(j, m, k))


def _register_operators(n_ions: int, addressed: int) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    """J+ and Jz on the full ion register for the addressed ions."""
    size = 1 << n_ions
    ions = [k for k in range(n_ions) if addressed >> k & 1]
    rows, cols = [], []
    for bits in range(size):
        for k in ions:
            if not bits >> k & 1:
                rows.append(bits | 1 << k)
                cols.append(bits)
    j_plus = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size))
    half = len(ions) / 2.0
    j_z = sp.diags([popcount(bits & addressed) - half for bits in range(size)], format="csr")
    return j_plus, j_z


def _phonon_annihilator(max_phonons: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, max_phonons + 1, dtype=float)), 1, format="csr")


def build_collective_operators(basis: SectorBasis, addressed: int) -> CollectiveOperators:
    """Collective operators summed over the addressed ions only."""
    config = basis.config
    if addressed <= 0 or addressed & ~config.all_ions:
        raise ConfigurationError(f"addressed set {addressed:#b} must be a nonempty subset of the ions")

    j_plus, j_z = _register_operators(config.n_ions, addressed)
    j_minus = j_plus.T.tocsr()
    j_squared = (0.5 * (j_plus @ j_minus + j_minus @ j_plus) + j_z @ j_z).tocsr()
    a = _phonon_annihilator(config.excitations + 1)

    selector = sp.csr_matrix(
        (np.ones(basis.dimension), (np.arange(basis.dimension), basis.ion_bits)),
        shape=(basis.dimension, 1 << config.n_ions),
    )
    phonon_factor = sp.diags(np.sqrt(basis.phonons.astype(float)))
    raising = (selector @ j_plus @ selector.T @ phonon_factor).tocsr()
    raising.eliminate_zeros()

    return CollectiveOperators(
        basis=basis,
        addressed=addressed,
        j_plus=j_plus,
        j_minus=j_minus,
        j_z=j_z,
        j_squared=j_squared,
        a=a,
        a_dagger=a.T.tocsr(),
        sector_j_z=(selector @ j_z @ selector.T).tocsr(),
        sector_j_squared=(selector @ j_squared @ selector.T).tocsr(),
        sector_raising=raising,
        sector_lowering=raising.T.conj().tocsr(),
    )


def dicke_state(basis: SectorBasis, n_excited: int) -> StateVector:
    """Symmetric Dicke state with n_excited ions up and the rest of the excitations as phonons."""
    half = basis.config.excitations
    if not 0 <= n_excited <= half:
        raise ConfigurationError(f"n_excited must lie in [0, {half}], got {n_excited}")
    mask = basis.excited == n_excited
    amplitudes = np.zeros(basis.dimension, dtype=complex)
    amplitudes[mask] = 1.0 / math.sqrt(math.comb(basis.n_ions, n_excited))
    return StateVector(basis, amplitudes)


def spin_multiplicity(n_spins: int, j: float) -> int:
    """Number of times pseudospin j occurs among n_spins spin-1/2 particles."""
    lower = n_spins / 2.0 - j
    if lower < 0 or abs(lower - round(lower)) > 1e-12:
        raise ConfigurationError(f"j={j} is not reachable with {n_spins} spins")
    lower = int(round(lower))
    return math.comb(n_spins, lower) - (math.comb(n_spins, lower - 1) if lower >= 1 else 0)


def spin_ladder(j: float, m_top: float, frame: str = "chain") -> LadderSpec:
    """Ladder reached from |j, m_top> with no phonons by repeated a+J-.

    Rung r has m = m_top - r and r phonons; the coupling to rung r+1 is
    sqrt((r+1)(j+m)(j-m+1)). Energies are the detuning weights of each rung:
    -r in the chain frame, m_top - r in the addressed frame.
    """
    if j < abs(m_top) - 1e-12 or abs((j - m_top) - round(j - m_top)) > 1e-12:
        raise ConfigurationError(f"|j={j}, m={m_top}> is not a valid pseudospin state")
    if frame not in ("chain", "addressed"):
        raise ConfigurationError(f"unknown detuning frame {frame!r}")
    length = int(round(j + m_top)) + 1
    couplings = []
    for r in range(length - 1):
        m = m_top - r
        couplings.append(math.sqrt((r + 1) * (j + m) * (j - m + 1)))
    offset = m_top if frame == "addressed" else 0.0
    energies = tuple(offset - r for r in range(length))
    return LadderSpec(couplings=tuple(couplings), energies=energies)


def chain_census(config: IonConfig) -> List[ChainSpec]:
    """One ChainSpec per j = 0..N/2, ordered by descending j."""
    census = []
    for j in range(config.excitations, -1, -1):
        ladder = spin_ladder(j, 0)
        census.append(ChainSpec(
            j=j,
            degeneracy=spin_multiplicity(config.n_ions, j),
            accessible_length=ladder.length,
            rung_couplings=ladder.couplings,
        ))
    return census


def _seed_vectors(eigenvectors: np.ndarray, count: int) -> List[np.ndarray]:
    """Orthonormal basis of span(eigenvectors), seeded by unit vectors in ascending index order."""
    chosen: List[np.ndarray] = []
    for i in range(eigenvectors.shape[0]):
        if len(chosen) == count:
            break
        candidate = eigenvectors @ eigenvectors[i].conj()
        for _ in range(2):
            for vector in chosen:
                candidate = candidate - vector * np.vdot(vector, candidate)
        norm = np.linalg.norm(candidate)
        if norm > SEED_TOLERANCE:
            chosen.append(candidate / norm)
    if len(chosen) != count:
        raise NumericalDegeneracyError(f"resolved {len(chosen)} of {count} degenerate seed vectors")
    return chosen


def build_ms_basis(basis: SectorBasis, ops: CollectiveOperators) -> MSBasis:
    """Decompose the sector into Morris-Shore chains |j, m_j, k>."""
    if not ops.addresses_all:
        raise ConfigurationError("the MS basis needs operators built for the full ion set")
    config = basis.config
    n_db = basis.database_dimension

    database_j_squared = ops.sector_j_squared[:n_db, :n_db].toarray()
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(database_j_squared)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(f"J^2 diagonalization failed: {exc}") from exc

    columns: List[np.ndarray] = []
    labels: List[MSLabel] = []
    assigned = 0
    for spec in chain_census(config):
        target = spec.j * (spec.j + 1)
        block = np.abs(eigenvalues - target) < EIGENVALUE_TOLERANCE
        if int(block.sum()) != spec.degeneracy:
            raise NumericalDegeneracyError(
                f"j={spec.j}: found {int(block.sum())} eigenvectors, expected {spec.degeneracy}"
            )
        assigned += spec.degeneracy
        for k, seed in enumerate(_seed_vectors(eigenvectors[:, block], spec.degeneracy), start=1):
            vector = np.zeros(basis.dimension, dtype=complex)
            vector[:n_db] = seed
            for r in range(spec.accessible_length):
                columns.append(vector)
                labels.append(MSLabel(spec.j, -r, k))
                if r + 1 < spec.accessible_length:
                    vector = ops.sector_lowering @ vector
                    vector = vector / np.linalg.norm(vector)

    if assigned != n_db or len(columns) != basis.dimension:
        raise NumericalDegeneracyError(
            f"MS decomposition covers {len(columns)} of {basis.dimension} sector states"
        )

    logger.debug("MS basis for N=%d: %d chains", config.n_ions, sum(s.degeneracy for s in chain_census(config)))
    return MSBasis(
        basis=basis,
        matrix=np.column_stack(columns),
        labels=tuple(labels),
        _columns={label: i for i, label in enumerate(labels)},
    )


def chain_representatives(ms_basis: MSBasis) -> Dict[int, StateVector]:
    """The m_j = 0, k = 1 member of every chain family, keyed by j (descending)."""
    half = ms_basis.basis.config.excitations
    return {j: ms_basis.state(j, 0, 1) for j in range(half, -1, -1)}
