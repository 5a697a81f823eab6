#!/usr/bin/env python3
"""
Sector Hilbert Space
====================

Basis of the fixed-excitation sector n_i + n_p = N/2 of an ion chain coupled
to one motional mode. Ions are two-level systems; ion k (1-based) maps to bit
k-1 of the ion register, and bitstrings are written with ion 1 leftmost.

Kets are ordered by block of descending n_i, so the database manifold
(n_p = 0) comes first, and by ascending ion_bits inside each block.
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from types import MappingProxyType
from typing import Dict, List, Mapping, Tuple

import numpy as np

from exceptions import ConfigurationError, InvalidMarkedStateError

logger = logging.getLogger(__name__)


def popcount(value: int) -> int:
    return bin(value).count("1")


def parse_ion_bits(bits: str) -> int:
    """'111000' -> 0b000111 (ion 1 is the leftmost character)."""
    return sum(1 << k for k, ch in enumerate(bits) if ch == "1")


def format_ion_bits(value: int, n_ions: int) -> str:
    return "".join("1" if value >> k & 1 else "0" for k in range(n_ions))


@dataclass(frozen=True)
class IonConfig:
    """A chain of N ions, N even and at least 2."""
    n_ions: int

    def __post_init__(self) -> None:
        if isinstance(self.n_ions, bool) or not isinstance(self.n_ions, int):
            raise ConfigurationError(f"n_ions must be an integer, got {self.n_ions!r}")
        if self.n_ions < 2 or self.n_ions % 2:
            raise ConfigurationError(f"n_ions must be even and >= 2, got {self.n_ions}")

    @property
    def excitations(self) -> int:
        """Total excitation number N/2 of the sector."""
        return self.n_ions // 2

    @property
    def all_ions(self) -> int:
        return (1 << self.n_ions) - 1


@dataclass(frozen=True, order=True)
class BasisKet:
    """|ion_bits, n_p> with n_p phonons in the motional mode."""
    ion_bits: int
    phonons: int

    @property
    def n_excited(self) -> int:
        return popcount(self.ion_bits)

    def label(self, n_ions: int) -> str:
        return f"|{format_ion_bits(self.ion_bits, n_ions)}, {self.phonons}>"


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """Ordered kets of the sector with a ket -> index lookup."""
    config: IonConfig
    kets: Tuple[BasisKet, ...]
    index: Mapping[BasisKet, int] = field(repr=False)

    @property
    def n_ions(self) -> int:
        return self.config.n_ions

    @property
    def dimension(self) -> int:
        return len(self.kets)

    @property
    def database_dimension(self) -> int:
        return database_dimension(self.config)

    @property
    def database_slice(self) -> slice:
        return slice(0, self.database_dimension)

    @property
    def ion_bits(self) -> np.ndarray:
        return np.fromiter((ket.ion_bits for ket in self.kets), dtype=np.int64, count=self.dimension)

    @property
    def phonons(self) -> np.ndarray:
        return np.fromiter((ket.phonons for ket in self.kets), dtype=np.int64, count=self.dimension)

    @property
    def excited(self) -> np.ndarray:
        return self.config.excitations - self.phonons

    def position(self, ket: BasisKet) -> int:
        try:
            return self.index[ket]
        except KeyError:
            raise ConfigurationError(f"{ket.label(self.n_ions)} is not in the sector") from None

    def position_of_bits(self, ion_bits: int) -> int:
        """Index of the unique ket whose ion register is ion_bits."""
        return self.position(BasisKet(ion_bits, self.config.excitations - popcount(ion_bits)))

    def basis_vector(self, position: int) -> np.ndarray:
        vector = np.zeros(self.dimension, dtype=complex)
        vector[position] = 1.0
        return vector


@dataclass
class StateVector:
    """Complex amplitudes over a SectorBasis."""
    basis: SectorBasis
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.basis.dimension,):
            raise ConfigurationError(
                f"amplitude vector of shape {self.amplitudes.shape} does not match "
                f"sector dimension {self.basis.dimension}"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        norm = self.norm()
        if norm == 0.0:
            raise ConfigurationError("cannot normalize the zero vector")
        return StateVector(self.basis, self.amplitudes / norm)

    def overlap(self, other: "StateVector") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def population(self, ket: BasisKet) -> float:
        return float(abs(self.amplitudes[self.basis.position(ket)]) ** 2)

    def database_population(self) -> float:
        return float(np.sum(self.probabilities()[self.basis.database_slice]))

    def copy(self) -> "StateVector":
        return StateVector(self.basis, self.amplitudes.copy())


def build_sector_basis(config: IonConfig) -> SectorBasis:
    """Enumerate the sector n_i + n_p = N/2 in canonical order."""
    n, half = config.n_ions, config.excitations
    kets: List[BasisKet] = []
    for n_excited in range(half, -1, -1):
        block = sorted(sum(1 << k for k in ions) for ions in combinations(range(n), n_excited))
        kets.extend(BasisKet(bits, half - n_excited) for bits in block)

    index: Dict[BasisKet, int] = {ket: i for i, ket in enumerate(kets)}
    logger.debug("sector basis for N=%d has %d kets", n, len(kets))
    return SectorBasis(config=config, kets=tuple(kets), index=MappingProxyType(index))


def database_dimension(config: IonConfig) -> int:
    """C(N, N/2): kets with all excitations in the ions."""
    return math.comb(config.n_ions, config.excitations)


def database_size_asymptotic(n_ions: int) -> float:
    """Large-N estimate 2^N / sqrt(pi N / 2) * (1 - 1/(4N)) of C(N, N/2)."""
    return 2.0 ** n_ions / math.sqrt(math.pi * n_ions / 2.0) * (1.0 - 1.0 / (4.0 * n_ions))


def manifold_dimensions(config: IonConfig) -> List[Tuple[int, int, int]]:
    """(n_i, n_p, C(N, n_i)) for each block, in basis order."""
    half = config.excitations
    return [(n_i, half - n_i, math.comb(config.n_ions, n_i)) for n_i in range(half, -1, -1)]


def validate_marked_bits(config: IonConfig, bits: str) -> int:
    """Check a marked bitstring and return its ion register."""
    if len(bits) != config.n_ions:
        raise InvalidMarkedStateError(bits, f"expected {config.n_ions} characters, got {len(bits)}")
    if set(bits) - {"0", "1"}:
        raise InvalidMarkedStateError(bits, "only '0' and '1' are allowed")
    if bits.count("1") != config.excitations:
        raise InvalidMarkedStateError(
            bits, f"expected {config.excitations} excited ions, got {bits.count('1')}"
        )
    return parse_ion_bits(bits)


def marked_ket(config: IonConfig, bits: str) -> BasisKet:
    """The database ket |bits, 0> for a marked bitstring."""
    return BasisKet(validate_marked_bits(config, bits), 0)


def basis_table(basis: SectorBasis) -> List[Tuple[int, str, int, int]]:
    """Rows (index, bits, n_i, n_p) of the basis dump."""
    return [
        (i, format_ion_bits(ket.ion_bits, basis.n_ions), ket.n_excited, ket.phonons)
        for i, ket in enumerate(basis.kets)
    ]


def basis_state(basis: SectorBasis, ket: BasisKet) -> StateVector:
    return StateVector(basis, basis.basis_vector(basis.position(ket)))
