#!/usr/bin/env python3
"""
Ideal Grover Search
===================

Database-level reference for the search: Householder reflections, the
Grover operator G = M_W(phi_W) M_s(phi_s) (oracle first), the optimal step
count and the closed-form evolution.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from exceptions import ConfigurationError

NORMALIZATION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Database:
    """N_db items, one of them marked."""
    dimension: int
    marked: int = 0

    def __post_init__(self) -> None:
        if self.dimension < 2:
            raise ConfigurationError(f"database dimension must be >= 2, got {self.dimension}")
        if not 0 <= self.marked < self.dimension:
            raise ConfigurationError(f"marked index {self.marked} outside 0..{self.dimension - 1}")

    @property
    def angle(self) -> float:
        """theta with sin(theta) = 1/sqrt(N_db)."""
        return math.asin(1.0 / math.sqrt(self.dimension))

    def marked_vector(self) -> np.ndarray:
        vector = np.zeros(self.dimension, dtype=complex)
        vector[self.marked] = 1.0
        return vector


def uniform_state(db: Database) -> np.ndarray:
    return np.full(db.dimension, 1.0 / math.sqrt(db.dimension), dtype=complex)


def householder(psi: np.ndarray, phi: float) -> np.ndarray:
    """M = 1 + (e^{i phi} - 1)|psi><psi|."""
    psi = np.asarray(psi, dtype=complex)
    if abs(np.linalg.norm(psi) - 1.0) > NORMALIZATION_TOLERANCE:
        raise ConfigurationError(f"Householder vector must be normalized, norm={np.linalg.norm(psi):.6g}")
    return np.eye(psi.size, dtype=complex) + (np.exp(1j * phi) - 1.0) * np.outer(psi, psi.conj())


def coupled_reflections(vectors: Sequence[np.ndarray], phases: Sequence[float]) -> np.ndarray:
    """Product of Householder reflections on mutually orthogonal vectors.

    For orthonormal vectors the factors commute and the product is
    1 + sum_k (e^{i phi_k} - 1)|v_k><v_k|.
    """
    if len(vectors) != len(phases):
        raise ConfigurationError(f"{len(vectors)} vectors but {len(phases)} phases")
    if not vectors:
        raise ConfigurationError("at least one reflection vector is required")
    stacked = np.column_stack([np.asarray(v, dtype=complex) for v in vectors])
    gram = stacked.conj().T @ stacked
    if np.max(np.abs(gram - np.eye(len(vectors)))) > NORMALIZATION_TOLERANCE:
        raise ConfigurationError("reflection vectors must be orthonormal")
    weights = np.exp(1j * np.asarray(phases, dtype=float)) - 1.0
    return np.eye(stacked.shape[0], dtype=complex) + (stacked * weights) @ stacked.conj().T


def grover_operator(db: Database, phi_w: float, phi_s: float) -> np.ndarray:
    oracle = householder(db.marked_vector(), phi_s)
    inversion = householder(uniform_state(db), phi_w)
    return inversion @ oracle


def apply_grover(state: np.ndarray, db: Database, phi_w: float, phi_s: float) -> np.ndarray:
    """One Grover step in O(N_db) with two rank-one updates."""
    out = np.array(state, dtype=complex)
    out[db.marked] *= np.exp(1j * phi_s)
    w = uniform_state(db)
    out += (np.exp(1j * phi_w) - 1.0) * w * np.vdot(w, out)
    return out


def min_steps(n_db: int) -> int:
    """Integer part of pi / (2 arcsin(2 sqrt(N-1) / N))."""
    if n_db < 2:
        raise ConfigurationError(f"database dimension must be >= 2, got {n_db}")
    return int(math.pi / (2.0 * math.asin(2.0 * math.sqrt(n_db - 1) / n_db)))


def closed_form_population(n_db: int, k: int) -> float:
    theta = math.asin(1.0 / math.sqrt(n_db))
    return math.sin((2 * k + 1) * theta) ** 2


def two_dimensional_leakage(state: np.ndarray, db: Database) -> float:
    """Norm of the component of state outside span{|s>, |W>}."""
    s = db.marked_vector()
    w = uniform_state(db)
    w_perp = w - s * np.vdot(s, w)
    w_perp /= np.linalg.norm(w_perp)
    residual = state - s * np.vdot(s, state) - w_perp * np.vdot(w_perp, state)
    return float(np.linalg.norm(residual))


def run_ideal(db: Database, phi_w: float, phi_s: float, n_steps: int,
              method: str = "rank_one") -> np.ndarray:
    """Marked-state population before the first step and after each of n_steps steps."""
    if n_steps < 0:
        raise ConfigurationError(f"n_steps must be non-negative, got {n_steps}")
    if method not in ("rank_one", "dense"):
        raise ConfigurationError(f"unknown apply method {method!r}")

    state = uniform_state(db)
    populations = [abs(state[db.marked]) ** 2]
    grover = grover_operator(db, phi_w, phi_s) if method == "dense" else None
    for _ in range(n_steps):
        state = grover @ state if grover is not None else apply_grover(state, db, phi_w, phi_s)
        populations.append(abs(state[db.marked]) ** 2)
    return np.asarray(populations)


def peak_population(db: Database, phi_w: float, phi_s: float, max_steps: int) -> float:
    """Largest marked population reached within max_steps steps."""
    return float(np.max(run_ideal(db, phi_w, phi_s, max_steps)))
