"""
Haldane and Kane-Mele tight-binding Hamiltonians on the square-lattice box,
on-site disorder and the odd time-reversal operator.

Hopping tables are written in the model frame (n1, n2). The box stores the
model's n1 along its second axis, so a model offset (d1, d2) is the box
offset (d2, d1).
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional, Tuple

import numpy as np

from topology.utils.errors import ConfigError, DomainError
from topology.utils.lattice import SPIN_DOWN, SPIN_UP, LatticeSpec, StateIndexer

logger = logging.getLogger(__name__)

ORBITAL_A = 0
ORBITAL_B = 1

HERMITICITY_TOL = 1e-12

# a(n) -> b(n + d) carries t
NEAREST_NEIGHBOR_OFFSETS: Tuple[Tuple[int, int], ...] = ((-1, 0), (0, 0), (0, 1))

# psi_a(n + e) enters (H psi)_a(n) with i * t' * sign; orbital b carries the opposite sign
SECOND_NEIGHBOR_OFFSETS: Tuple[Tuple[Tuple[int, int], int], ...] = (
    ((-1, -1), +1),
    ((0, -1), -1),
    ((1, 0), +1),
    ((1, 1), -1),
    ((0, 1), +1),
    ((-1, 0), -1),
)

# In-plane unit vectors of the three t-bonds, used by the Rashba term
BOND_VECTORS = {
    (0, 0): (0.0, 1.0),
    (-1, 0): (-np.sqrt(3) / 2, -0.5),
    (0, 1): (np.sqrt(3) / 2, -0.5),
}

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
ODD_SPIN_ROTATION = np.array([[0, 1], [-1, 0]], dtype=complex)


class Chirality(str, Enum):
    PLUS = 'plus'
    MINUS = 'minus'

    @property
    def sign(self) -> int:
        return 1 if self == Chirality.PLUS else -1


def _require_finite(**values):
    for name, value in values.items():
        if not np.isfinite(value):
            raise ConfigError(f"{name} must be a finite real, got {value}")


@dataclass(frozen=True)
class HaldaneParams:
    t: float = 1.0
    t_prime: float = 0.1
    lambda_v: float = 0.0

    def __post_init__(self):
        _require_finite(t=self.t, t_prime=self.t_prime, lambda_v=self.lambda_v)


@dataclass(frozen=True)
class KaneMeleParams:
    haldane: HaldaneParams = field(default_factory=HaldaneParams)
    lambda_R: float = 0.0
    disorder_W: float = 0.0
    seed: int = 0

    def __post_init__(self):
        _require_finite(lambda_R=self.lambda_R, disorder_W=self.disorder_W)
        if self.disorder_W < 0:
            raise DomainError(f"disorder_W must be non-negative, got {self.disorder_W}")

    def with_value(self, name: str, value: float) -> 'KaneMeleParams':
        """Copy with one named parameter replaced (haldane fields included)."""
        if name in ('t', 't_prime', 'lambda_v'):
            return replace(self, haldane=replace(self.haldane, **{name: value}))
        if name in ('lambda_R', 'disorder_W', 'seed'):
            return replace(self, **{name: value})
        raise ConfigError(f"Unknown model parameter: {name}")


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Dense Hermitian matrix on the box Hilbert space."""

    matrix: np.ndarray
    spec: LatticeSpec

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.shape != (self.spec.dim, self.spec.dim):
            raise DomainError(f"Matrix shape {matrix.shape} does not match dim {self.spec.dim}")
        deviation = np.linalg.norm(matrix - matrix.conj().T)
        if deviation >= HERMITICITY_TOL * self.spec.dim:
            raise DomainError(f"Hamiltonian is not Hermitian: ||H - H^*|| = {deviation:.3e}")
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)

    @property
    def dim(self) -> int:
        return self.spec.dim

    @classmethod
    def zeros(cls, spec: LatticeSpec) -> 'Hamiltonian':
        return cls(np.zeros((spec.dim, spec.dim), dtype=complex), spec)

    def _check_compatible(self, other: 'Hamiltonian'):
        if other.spec != self.spec:
            raise DomainError("Hamiltonians live on different lattices")

    def __add__(self, other: 'Hamiltonian') -> 'Hamiltonian':
        self._check_compatible(other)
        return Hamiltonian(self.matrix + other.matrix, self.spec)

    def __sub__(self, other: 'Hamiltonian') -> 'Hamiltonian':
        self._check_compatible(other)
        return Hamiltonian(self.matrix - other.matrix, self.spec)

    def scaled(self, factor: float) -> 'Hamiltonian':
        return Hamiltonian(float(factor) * self.matrix, self.spec)

    def off_spin_block_norm(self) -> float:
        """Frobenius norm of the spin-flip part; zero when the spin sectors decouple."""
        if self.spec.spins != 2:
            return 0.0
        up = np.arange(self.dim) % 2 == SPIN_UP
        return float(np.linalg.norm(self.matrix[np.ix_(up, ~up)]))


def _box_offset(offset: Tuple[int, int]) -> Tuple[int, int]:
    return (offset[1], offset[0])


def _add_hopping(
    matrix: np.ndarray,
    spec: LatticeSpec,
    offset: Tuple[int, int],
    from_orbital: int,
    to_orbital: int,
    spin_block: np.ndarray,
):
    """
    Add H[(n + offset, to_orbital), (n, from_orbital)] += spin_block for every site n.

    spin_block is spins x spins, indexed [target spin, source spin].
    """
    indexer = StateIndexer(spec)
    source, target = spec.shifted_sites(_box_offset(offset))
    if len(source) == 0:
        return
    for beta in range(spec.spins):
        for alpha in range(spec.spins):
            amplitude = spin_block[beta, alpha]
            if amplitude == 0:
                continue
            rows = indexer.states(target, to_orbital, beta)
            cols = indexer.states(source, from_orbital, alpha)
            np.add.at(matrix, (rows, cols), amplitude)


def _add_onsite(matrix: np.ndarray, spec: LatticeSpec, orbital: int, spin_block: np.ndarray):
    _add_hopping(matrix, spec, (0, 0), orbital, orbital, spin_block)


def _haldane_matrix(params: HaldaneParams, spec: LatticeSpec, spin_blocks: dict) -> np.ndarray:
    """
    Assemble the Haldane hopping table.

    Args:
        spin_blocks: chirality sign -> spins x spins projector selecting the
            spin sectors that carry that chirality
    """
    matrix = np.zeros((spec.dim, spec.dim), dtype=complex)
    identity = np.eye(spec.spins, dtype=complex)

    for offset in NEAREST_NEIGHBOR_OFFSETS:
        block = params.t * identity
        _add_hopping(matrix, spec, offset, ORBITAL_A, ORBITAL_B, block)
        _add_hopping(matrix, spec, (-offset[0], -offset[1]), ORBITAL_B, ORBITAL_A, block.conj().T)

    for chirality_sign, projector in spin_blocks.items():
        for offset, sign in SECOND_NEIGHBOR_OFFSETS:
            amplitude = 1j * params.t_prime * sign * chirality_sign
            reverse = (-offset[0], -offset[1])
            _add_hopping(matrix, spec, reverse, ORBITAL_A, ORBITAL_A, amplitude * projector)
            _add_hopping(matrix, spec, reverse, ORBITAL_B, ORBITAL_B, -amplitude * projector)

    if params.lambda_v:
        _add_onsite(matrix, spec, ORBITAL_A, params.lambda_v * identity)
        _add_onsite(matrix, spec, ORBITAL_B, -params.lambda_v * identity)
    return matrix


def _require_two_orbitals(spec: LatticeSpec):
    if spec.orbitals != 2:
        raise ConfigError(f"Haldane-type models need 2 orbitals per site, got {spec.orbitals}")


def build_haldane(
    params: HaldaneParams,
    spec: LatticeSpec,
    chirality: Chirality = Chirality.PLUS,
) -> Hamiltonian:
    """
    Haldane model on the box.

    On a spinless spec this is the single Haldane block. On a spinful spec
    both spin sectors carry the same chirality (a spin-degenerate copy,
    not time-reversal symmetric).
    """
    _require_two_orbitals(spec)
    chirality = Chirality(chirality)
    projector = np.eye(spec.spins, dtype=complex)
    matrix = _haldane_matrix(params, spec, {chirality.sign: projector})
    logger.debug(f"Built Haldane {chirality.value} on {spec.L1}x{spec.L2} {spec.boundary.value}, dim {spec.dim}")
    return Hamiltonian(matrix, spec)


def embed_spin_block(block: Hamiltonian, spin: int = SPIN_UP) -> Hamiltonian:
    """Place a spinless Hamiltonian into one spin sector of the spinful space; the other sector is zero."""
    if block.spec.spins != 1:
        raise DomainError("Only spinless Hamiltonians can be embedded into a spin sector")
    if spin not in (SPIN_UP, SPIN_DOWN):
        raise DomainError(f"Spin {spin} out of range")
    spec = block.spec.with_spins(2)
    matrix = np.zeros((spec.dim, spec.dim), dtype=complex)
    states = np.arange(block.dim) * 2 + spin
    matrix[np.ix_(states, states)] = block.matrix
    return Hamiltonian(matrix, spec)


def rashba_block(offset: Tuple[int, int], lambda_R: float) -> np.ndarray:
    """Spin matrix i * lambda_R * (sigma_x * dy - sigma_y * dx) of the bond a(n) -> b(n + offset)."""
    dx, dy = BOND_VECTORS[offset]
    return 1j * lambda_R * (SIGMA_X * dy - SIGMA_Y * dx)


def _add_rashba(matrix: np.ndarray, spec: LatticeSpec, lambda_R: float):
    for offset in NEAREST_NEIGHBOR_OFFSETS:
        block = rashba_block(offset, lambda_R)
        _add_hopping(matrix, spec, offset, ORBITAL_A, ORBITAL_B, block)
        _add_hopping(matrix, spec, (-offset[0], -offset[1]), ORBITAL_B, ORBITAL_A, block.conj().T)


def build_kane_mele(params: KaneMeleParams, spec: LatticeSpec) -> Hamiltonian:
    """
    Kane-Mele model: Haldane(+t') on spin up, Haldane(-t') on spin down,
    Rashba spin-flip hopping on the t-bonds and on-site disorder.
    """
    _require_two_orbitals(spec)
    if spec.spins != 2:
        raise ConfigError("Kane-Mele needs a spinful lattice (spins=2)")

    up = np.diag([1, 0]).astype(complex)
    down = np.diag([0, 1]).astype(complex)
    matrix = _haldane_matrix(params.haldane, spec, {+1: up, -1: down})
    if params.lambda_R:
        _add_rashba(matrix, spec, params.lambda_R)

    h = Hamiltonian(matrix, spec)
    if params.disorder_W > 0:
        h = add_disorder(h, params.disorder_W, params.seed)
    logger.debug(
        f"Built Kane-Mele on {spec.L1}x{spec.L2} {spec.boundary.value}: "
        f"lambda_R={params.lambda_R}, W={params.disorder_W}, seed={params.seed}"
    )
    return h


def disorder_potential(spec: LatticeSpec, W: float, seed: int) -> Hamiltonian:
    """On-site energies drawn uniformly from [-W/2, W/2], identical on every orbital and spin of a site."""
    if W < 0:
        raise DomainError(f"Disorder amplitude must be non-negative, got {W}")
    if W == 0:
        return Hamiltonian.zeros(spec)
    rng = np.random.default_rng(seed)
    site_energies = rng.uniform(-W / 2, W / 2, size=spec.n_sites)
    return Hamiltonian(np.diag(np.repeat(site_energies, spec.channels)).astype(complex), spec)


def add_disorder(h: Hamiltonian, W: float, seed: int) -> Hamiltonian:
    if W < 0:
        raise DomainError(f"Disorder amplitude must be non-negative, got {W}")
    if W == 0:
        return h
    return h + disorder_potential(h.spec, W, seed)


def _spin_flip(x: np.ndarray, axis: int) -> np.ndarray:
    """Apply the odd spin rotation along one axis of an array in flat-state layout."""
    moved = np.moveaxis(x, axis, 0)
    out = np.empty_like(moved)
    out[SPIN_UP::2] = moved[SPIN_DOWN::2]
    out[SPIN_DOWN::2] = -moved[SPIN_UP::2]
    return np.moveaxis(out, 0, axis)


class TimeReversalOp:
    """
    Odd time reversal: u_theta composed with complex conjugation.

    u_theta is the identity on sites and orbitals and the 2x2 rotation with
    entries (up, down) = +1, (down, up) = -1 on spin.
    """

    def __init__(self, spec: LatticeSpec):
        if spec.spins != 2:
            raise DomainError("Odd time reversal needs a spinful lattice")
        self.spec = spec

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def u_theta(self) -> np.ndarray:
        return np.kron(np.eye(self.dim // 2), ODD_SPIN_ROTATION)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Theta(psi) for a vector, or column-wise for a (dim, k) array."""
        psi = np.asarray(psi)
        if psi.shape[0] != self.dim:
            raise DomainError(f"Vector length {psi.shape[0]} does not match dim {self.dim}")
        return _spin_flip(np.conj(psi), axis=0)

    def conjugate_operator(self, matrix: np.ndarray) -> np.ndarray:
        """u_theta conj(M) u_theta^*, i.e. Theta M Theta^-1."""
        matrix = np.asarray(matrix)
        if matrix.shape != (self.dim, self.dim):
            raise DomainError(f"Operator shape {matrix.shape} does not match dim {self.dim}")
        return _spin_flip(_spin_flip(np.conj(matrix), axis=0), axis=1)


def check_odd_trs(h: Hamiltonian, theta: TimeReversalOp, tol: float = 1e-12) -> bool:
    """True iff ||u_theta conj(H) u_theta^* - H||_F < tol * dim."""
    if h.dim != theta.dim:
        raise DomainError(f"Dimension mismatch: H has {h.dim}, Theta has {theta.dim}")
    deviation = np.linalg.norm(theta.conjugate_operator(h.matrix) - h.matrix)
    symmetric = bool(deviation < tol * h.dim)
    if symmetric:
        logger.debug(f"✓ Odd time-reversal symmetry holds (deviation {deviation:.2e})")
    else:
        logger.info(f"✗ Odd time-reversal symmetry broken (deviation {deviation:.2e})")
    return symmetric


def _random_vectors(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((dim, count)) + 1j * rng.standard_normal((dim, count))


def check_theta_conditions(
    theta: TimeReversalOp,
    u_a,
    samples: int = 100,
    seed: Optional[int] = 0,
) -> bool:
    """
    Check Theta^2 = -1, antiunitarity and u_theta U_a u_theta^* = U_a.

    Args:
        u_a: flux unitary exposing its per-state phases as ``diagonal``
    """
    if u_a.spec.dim != theta.dim:
        raise DomainError("Flux unitary and time reversal act on different spaces")
    rng = np.random.default_rng(seed)
    psi = _random_vectors(theta.dim, samples, rng)
    phi = _random_vectors(theta.dim, samples, rng)

    squares_to_minus_one = np.max(np.abs(theta.apply(theta.apply(psi)) + psi)) < 1e-14

    overlaps = np.einsum('ij,ij->j', theta.apply(psi).conj(), theta.apply(phi))
    expected = np.einsum('ij,ij->j', phi.conj(), psi)
    scale = np.linalg.norm(psi, axis=0) * np.linalg.norm(phi, axis=0)
    antiunitary = np.max(np.abs(overlaps - expected) / scale) < 1e-12

    phases = np.asarray(u_a.diagonal)[:, None]
    commutator = _spin_flip(phases * psi, axis=0) - phases * _spin_flip(psi, axis=0)
    commutes = np.max(np.abs(commutator)) < 1e-14

    result = bool(squares_to_minus_one and antiunitary and commutes)
    status = '✓' if result else '✗'
    logger.debug(
        f"{status} Theta conditions: square={squares_to_minus_one}, "
        f"antiunitary={antiunitary}, commutes={commutes}"
    )
    return result


def kramers_pairs_hold(eigenvalues: Iterable[float], tol: float = 1e-9) -> bool:
    """Sorted spectrum satisfies E_2k = E_2k+1 within tol."""
    values = np.sort(np.asarray(list(eigenvalues), dtype=float))
    if len(values) % 2:
        return False
    return bool(np.all(np.abs(values[0::2] - values[1::2]) < tol))
