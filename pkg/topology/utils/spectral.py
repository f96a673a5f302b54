"""
Hermitian eigendecomposition, Fermi projections and spectral gaps.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import linalg

from topology.utils.errors import FermiLevelError, GapClosedError
from topology.utils.lattice import LatticeSpec
from topology.utils.model import Hamiltonian

logger = logging.getLogger(__name__)

FERMI_COLLISION_TOL = 1e-10
GAP_CLOSED_TOL = 1e-8
PHASE_FIX_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    spec: LatticeSpec

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def occupied(self, e_f: float) -> np.ndarray:
        return self.eigenvectors[:, self.eigenvalues < e_f]

    def empty(self, e_f: float) -> np.ndarray:
        return self.eigenvectors[:, self.eigenvalues > e_f]


@dataclass(frozen=True, eq=False)
class FermiProjection:
    matrix: np.ndarray
    rank: int
    fermi_energy: float
    spec: LatticeSpec

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class GapReport:
    highest_occupied: float
    lowest_empty: float
    gap: float
    fermi_energy: float

    @property
    def is_open(self) -> bool:
        return self.gap > GAP_CLOSED_TOL

    def to_dict(self) -> dict:
        return {
            'highest_occupied': self.highest_occupied,
            'lowest_empty': self.lowest_empty,
            'gap': self.gap,
            'fermi_energy': self.fermi_energy,
        }


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Rotate every column so its first component above PHASE_FIX_TOL is real positive."""
    first = np.argmax(np.abs(vectors) > PHASE_FIX_TOL, axis=0)
    pivots = vectors[first, np.arange(vectors.shape[1])]
    return vectors * (np.conj(pivots) / np.abs(pivots))[None, :]


def diagonalize(h: Hamiltonian) -> EigenDecomposition:
    """
    Full Hermitian eigendecomposition with ascending eigenvalues and a
    deterministic phase for every eigenvector.
    """
    eigenvalues, eigenvectors = linalg.eigh(h.matrix)
    eigenvectors = _fix_phases(eigenvectors)
    logger.debug(f"Diagonalized dim {h.dim}: spectrum [{eigenvalues[0]:.4f}, {eigenvalues[-1]:.4f}]")
    return EigenDecomposition(eigenvalues, eigenvectors, h.spec)


def _check_fermi_level(d: EigenDecomposition, e_f: float):
    distance = np.min(np.abs(d.eigenvalues - e_f))
    if distance < FERMI_COLLISION_TOL:
        raise FermiLevelError(f"Fermi level on spectrum: E_F={e_f} is {distance:.2e} from an eigenvalue")


def fermi_projection(d: EigenDecomposition, e_f: float = 0.0) -> FermiProjection:
    """P_F = sum of v_i v_i^* over eigenvalues E_i < e_f."""
    _check_fermi_level(d, e_f)
    occupied = d.occupied(e_f)
    matrix = occupied @ occupied.conj().T
    return FermiProjection(matrix, occupied.shape[1], float(e_f), d.spec)


def spectral_gap(d: EigenDecomposition, e_f: float = 0.0) -> GapReport:
    """
    Gap around e_f. A Fermi level on the spectrum reports gap 0; an empty
    side of the spectrum reports an infinite gap.
    """
    values = d.eigenvalues
    if np.min(np.abs(values - e_f)) < FERMI_COLLISION_TOL:
        return GapReport(float(e_f), float(e_f), 0.0, float(e_f))
    below = values[values < e_f]
    above = values[values > e_f]
    highest = float(below[-1]) if len(below) else -np.inf
    lowest = float(above[0]) if len(above) else np.inf
    return GapReport(highest, lowest, lowest - highest, float(e_f))


def operator_norm(matrix: np.ndarray) -> float:
    """Spectral norm of a Hermitian matrix."""
    if matrix.size == 0:
        return 0.0
    values = linalg.eigvalsh(matrix)
    return float(np.max(np.abs(values)))


def projection_perturbation_norm(h: Hamiltonian, dh: Hamiltonian, e_f: float = 0.0) -> Tuple[float, float]:
    """
    Returns:
        (||P'_F - P_F||_2, ||dH||_2) with P'_F the Fermi projection of H + dH
    """
    projections = []
    for label, operator in (('H', h), ('H + dH', h + dh)):
        d = diagonalize(operator)
        gap = spectral_gap(d, e_f)
        if not gap.is_open:
            raise GapClosedError(f"Spectral gap of {label} closed at E_F={e_f} (gap {gap.gap:.2e})")
        projections.append(fermi_projection(d, e_f).matrix)
    return operator_norm(projections[1] - projections[0]), operator_norm(dh.matrix)
