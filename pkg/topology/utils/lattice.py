"""
Finite boxes of the square lattice, the dual lattice and the indexing of
the spin/orbital Hilbert space.

States are laid out site-major, then orbital, then spin. Site (n1, n2)
has site index n1 * L2 + n2.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from topology.utils.errors import DomainError

logger = logging.getLogger(__name__)

SPIN_UP = 0
SPIN_DOWN = 1


class Boundary(str, Enum):
    OPEN = 'open'
    PERIODIC = 'periodic'


@dataclass(frozen=True)
class LatticeSpec:
    """
    Geometry of a finite L1 x L2 box.

    Args:
        L1: Sites along axis 1
        L2: Sites along axis 2
        boundary: Open drops hoppings leaving the box, Periodic wraps them
        orbitals: Orbitals per site (r)
        spins: 2 for spin-1/2 fermions, 1 for a single spinless block
    """

    L1: int
    L2: int
    boundary: Boundary = Boundary.OPEN
    orbitals: int = 2
    spins: int = 2

    def __post_init__(self):
        object.__setattr__(self, 'boundary', Boundary(self.boundary))
        if self.L1 < 2 or self.L2 < 2:
            raise DomainError(f"Box must be at least 2x2, got {self.L1}x{self.L2}")
        if self.orbitals < 1:
            raise DomainError(f"orbitals must be positive, got {self.orbitals}")
        if self.spins not in (1, 2):
            raise DomainError(f"spins must be 1 or 2, got {self.spins}")

    @classmethod
    def square(cls, size: int, boundary: Boundary = Boundary.OPEN, **kwargs) -> 'LatticeSpec':
        return cls(L1=size, L2=size, boundary=boundary, **kwargs)

    @property
    def n_sites(self) -> int:
        return self.L1 * self.L2

    @property
    def channels(self) -> int:
        """Internal states per site (orbital x spin)."""
        return self.orbitals * self.spins

    @property
    def dim(self) -> int:
        return self.n_sites * self.channels

    @property
    def is_open(self) -> bool:
        return self.boundary == Boundary.OPEN

    def with_boundary(self, boundary: Boundary) -> 'LatticeSpec':
        return LatticeSpec(self.L1, self.L2, Boundary(boundary), self.orbitals, self.spins)

    def with_spins(self, spins: int) -> 'LatticeSpec':
        return LatticeSpec(self.L1, self.L2, self.boundary, self.orbitals, spins)

    def site_coordinates(self) -> np.ndarray:
        """(n_sites, 2) integer array of site coordinates in site-index order."""
        n1, n2 = np.meshgrid(np.arange(self.L1), np.arange(self.L2), indexing='ij')
        return np.stack([n1.ravel(), n2.ravel()], axis=1)

    def shifted_sites(self, offset: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
        """
        Pair every site with its neighbour at the given offset.

        Returns:
            (source_sites, target_sites) site indices; pairs leaving an
            open box are dropped, periodic boxes wrap.
        """
        coords = self.site_coordinates()
        target = coords + np.asarray(offset, dtype=int)
        if self.is_open:
            keep = (
                (target[:, 0] >= 0) & (target[:, 0] < self.L1)
                & (target[:, 1] >= 0) & (target[:, 1] < self.L2)
            )
            source = np.nonzero(keep)[0]
            target = target[keep]
        else:
            source = np.arange(self.n_sites)
            target = target % np.array([self.L1, self.L2])
        return source, target[:, 0] * self.L2 + target[:, 1]

    def hull_distance(self, a1: float, a2: float) -> float:
        """l-infinity distance of a point to the boundary of the box hull."""
        return min(a1, self.L1 - 1 - a1, a2, self.L2 - 1 - a2)


@dataclass(frozen=True)
class DualPoint:
    """A point of the dual lattice Z^2 - (1/2, 1/2)."""

    a1: float
    a2: float

    def __post_init__(self):
        for value in (self.a1, self.a2):
            shifted = value + 0.5
            if not np.isfinite(value) or shifted != np.round(shifted):
                raise DomainError(f"Dual point components must be half-integers, got ({self.a1}, {self.a2})")
        object.__setattr__(self, 'a1', float(self.a1))
        object.__setattr__(self, 'a2', float(self.a2))

    @classmethod
    def from_cell(cls, m1: int, m2: int) -> 'DualPoint':
        """Dual point at the centre of the plaquette with lower-left site (m1, m2)."""
        return cls(m1 + 0.5, m2 + 0.5)

    @classmethod
    def center(cls, spec: LatticeSpec) -> 'DualPoint':
        return cls.from_cell((spec.L1 - 2) // 2, (spec.L2 - 2) // 2)

    def shifted(self, d1: int, d2: int) -> 'DualPoint':
        return DualPoint(self.a1 + d1, self.a2 + d2)

    def as_tuple(self) -> Tuple[float, float]:
        return (self.a1, self.a2)

    def __str__(self):
        return f"({self.a1:g}, {self.a2:g})"


def interior_dual_points(spec: LatticeSpec, margin: int) -> List[DualPoint]:
    """
    Dual points inside the box at l-infinity distance >= margin from its boundary.

    Ordered row-major by the lower-left site of their plaquette. A margin
    larger than the box allows yields an empty list.
    """
    if margin < 0:
        raise DomainError(f"margin must be non-negative, got {margin}")
    points = []
    for m1 in range(spec.L1 - 1):
        for m2 in range(spec.L2 - 1):
            point = DualPoint.from_cell(m1, m2)
            if spec.hull_distance(point.a1, point.a2) >= margin:
                points.append(point)
    return points


class StateIndexer:
    """Bijection (site, orbital, spin) <-> flat index."""

    def __init__(self, spec: LatticeSpec):
        self.spec = spec

    @property
    def dim(self) -> int:
        return self.spec.dim

    def flat_index(self, n: Tuple[int, int], mu: int, alpha: int) -> int:
        spec = self.spec
        n1, n2 = n
        if not (0 <= n1 < spec.L1 and 0 <= n2 < spec.L2):
            raise DomainError(f"Site {n} outside the {spec.L1}x{spec.L2} box")
        if not 0 <= mu < spec.orbitals:
            raise DomainError(f"Orbital {mu} out of range (r={spec.orbitals})")
        if not 0 <= alpha < spec.spins:
            raise DomainError(f"Spin {alpha} out of range")
        return ((n1 * spec.L2 + n2) * spec.orbitals + mu) * spec.spins + alpha

    def unflat_index(self, index: int) -> Tuple[Tuple[int, int], int, int]:
        spec = self.spec
        if not 0 <= index < spec.dim:
            raise DomainError(f"Flat index {index} out of range [0, {spec.dim})")
        site, rest = divmod(index, spec.channels)
        mu, alpha = divmod(rest, spec.spins)
        n1, n2 = divmod(site, spec.L2)
        return (n1, n2), mu, alpha

    def states(self, sites: np.ndarray, mu: int, alpha: int) -> np.ndarray:
        """Vectorised flat indices for an array of site indices."""
        return (np.asarray(sites) * self.spec.orbitals + mu) * self.spec.spins + alpha


def state_coordinates(spec: LatticeSpec) -> np.ndarray:
    """(dim, 2) array of the site coordinate carried by every state; the diagonals of X1, X2."""
    return np.repeat(spec.site_coordinates(), spec.channels, axis=0).astype(float)


@dataclass(frozen=True, eq=False)
class RegionMask:
    """Characteristic function of a set of sites, shape (L1, L2)."""

    spec: LatticeSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != (self.spec.L1, self.spec.L2):
            raise DomainError(f"Region mask shape {values.shape} does not match the box")
        if not np.all((values == 0) | (values == 1)):
            raise DomainError("Region mask values must be 0 or 1")
        object.__setattr__(self, 'values', values.astype(bool))

    @classmethod
    def full(cls, spec: LatticeSpec) -> 'RegionMask':
        return cls(spec, np.ones((spec.L1, spec.L2), dtype=bool))

    @classmethod
    def square(cls, spec: LatticeSpec, size: int, corner: Optional[Tuple[int, int]] = None) -> 'RegionMask':
        """size x size block; centred in the box unless a lower-left corner is given."""
        if not 1 <= size <= min(spec.L1, spec.L2):
            raise DomainError(f"Region side {size} does not fit a {spec.L1}x{spec.L2} box")
        if corner is None:
            corner = ((spec.L1 - size) // 2, (spec.L2 - size) // 2)
        values = np.zeros((spec.L1, spec.L2), dtype=bool)
        values[corner[0]:corner[0] + size, corner[1]:corner[1] + size] = True
        return cls(spec, values)

    @classmethod
    def around(cls, spec: LatticeSpec, a: DualPoint, radius: float) -> 'RegionMask':
        """Sites at l-infinity distance < radius from the dual point a."""
        if radius <= 0:
            raise DomainError(f"radius must be positive, got {radius}")
        coords = spec.site_coordinates()
        distance = np.max(np.abs(coords - np.array(a.as_tuple())), axis=1)
        return cls(spec, (distance < radius).reshape(spec.L1, spec.L2))

    def touches_boundary(self) -> bool:
        values = self.values
        return bool(values[0, :].any() or values[-1, :].any() or values[:, 0].any() or values[:, -1].any())

    @property
    def n_sites(self) -> int:
        return int(self.values.sum())

    def state_mask(self) -> np.ndarray:
        """Boolean mask over flat states (repeated over every orbital-spin channel)."""
        return np.repeat(self.values.ravel(), self.spec.channels)

    def trace_per_channel(self) -> int:
        return int(self.state_mask().sum() // self.spec.channels)
