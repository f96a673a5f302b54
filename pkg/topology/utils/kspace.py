"""
Momentum-space invariants of the translation-invariant models.

H(k) = [[-s Delta(k) + lambda_v, conj Gamma(k)], [Gamma(k), s Delta(k) - lambda_v]]
with Delta(k) = 2 t' [sin k1 + sin k2 - sin(k1 + k2)],
Gamma(k) = t (1 + exp(i k1) + exp(-i k2)) and s the chirality sign.
The spinful form stacks the two chiralities with the Rashba term, in the
(orbital, spin) order of the real-space box.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize

from topology.utils.errors import DomainError, GapClosedError, QualityGateError
from topology.utils.model import (
    NEAREST_NEIGHBOR_OFFSETS,
    ODD_SPIN_ROTATION,
    Chirality,
    HaldaneParams,
    rashba_block,
)

logger = logging.getLogger(__name__)

DIRAC_MOMENTUM = (2 * np.pi / 3, 2 * np.pi / 3)
BAND_GAP_TOL = 1e-8
INTEGER_TOL = 1e-9
TRANSITION_TOL = 1e-10
GAMMA_CUTOFF = 1e-6


def haldane_mass(params: HaldaneParams, k1, k2) -> np.ndarray:
    """Delta(k)."""
    return 2 * params.t_prime * (np.sin(k1) + np.sin(k2) - np.sin(k1 + k2))


def gamma(params: HaldaneParams, k1, k2) -> np.ndarray:
    """Gamma(k)."""
    return params.t * (1 + np.exp(1j * k1) + np.exp(-1j * k2))


@dataclass(frozen=True)
class BlochHamiltonian:
    params: HaldaneParams = field(default_factory=HaldaneParams)
    chirality: Chirality = Chirality.PLUS
    spinful: bool = False
    lambda_R: float = 0.0

    @property
    def n_bands(self) -> int:
        return 4 if self.spinful else 2

    @property
    def n_occupied(self) -> int:
        return self.n_bands // 2

    def diagonal_mass(self, k1, k2) -> np.ndarray:
        """d(k) = s Delta(k) - lambda_v, so H(k) = [[-d, conj Gamma], [Gamma, d]]."""
        sign = Chirality(self.chirality).sign
        return sign * haldane_mass(self.params, k1, k2) - self.params.lambda_v

    def block(self, k1, k2, chirality: Chirality) -> np.ndarray:
        k1, k2 = np.broadcast_arrays(np.asarray(k1, dtype=float), np.asarray(k2, dtype=float))
        sign = Chirality(chirality).sign
        d = sign * haldane_mass(self.params, k1, k2) - self.params.lambda_v
        g = gamma(self.params, k1, k2)
        out = np.zeros(k1.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = -d
        out[..., 0, 1] = np.conj(g)
        out[..., 1, 0] = g
        out[..., 1, 1] = d
        return out


def bloch_eval(bh: BlochHamiltonian, k) -> np.ndarray:
    """
    H(k) at one momentum or at an array of momenta.

    Args:
        k: (k1, k2); each may be an array, the result then has shape
            k1.shape + (n, n)
    """
    k1, k2 = k
    if not bh.spinful:
        return bh.block(k1, k2, bh.chirality)

    up = bh.block(k1, k2, Chirality.PLUS)
    down = bh.block(k1, k2, Chirality.MINUS)
    shape = up.shape[:-2]
    out = np.zeros(shape + (4, 4), dtype=complex)
    # state (orbital, spin) -> 2 * orbital + spin
    for mu in range(2):
        for nu in range(2):
            out[..., 2 * mu, 2 * nu] = up[..., mu, nu]
            out[..., 2 * mu + 1, 2 * nu + 1] = down[..., mu, nu]

    if bh.lambda_R:
        k1b, k2b = np.broadcast_arrays(np.asarray(k1, dtype=float), np.asarray(k2, dtype=float))
        rashba = np.zeros(shape + (2, 2), dtype=complex)
        for offset in NEAREST_NEIGHBOR_OFFSETS:
            phase = np.asarray(np.exp(-1j * (k1b * offset[0] + k2b * offset[1])))
            rashba = rashba + phase[..., None, None] * rashba_block(offset, bh.lambda_R)
        # rows are orbital b, columns orbital a
        out[..., 2:4, 0:2] += rashba
        out[..., 0:2, 2:4] += np.conj(np.swapaxes(rashba, -1, -2))
    return out


def band_energy(bh: BlochHamiltonian, k1, k2) -> np.ndarray:
    """E(k) = sqrt(d(k)^2 + |Gamma(k)|^2) of the spinless block."""
    return np.sqrt(bh.diagonal_mass(k1, k2) ** 2 + np.abs(gamma(bh.params, k1, k2)) ** 2)


@dataclass(frozen=True)
class BZGrid:
    """k = 2 pi (m1, m2) / N with m_j in 0..N-1."""

    N: int
    require_dirac: bool = False

    def __post_init__(self):
        if self.N < 6:
            raise DomainError(f"Grid needs N >= 6, got {self.N}")
        if self.require_dirac and self.N % 3:
            raise DomainError(f"Dirac momenta are on the grid only for N divisible by 3, got {self.N}")

    @property
    def spacing(self) -> float:
        return 2 * np.pi / self.N

    def momenta(self) -> Tuple[np.ndarray, np.ndarray]:
        m = np.arange(self.N) * self.spacing
        return np.meshgrid(m, m, indexing='ij')


@dataclass(frozen=True)
class DiracPoint:
    momentum: Tuple[float, float]
    mass: float
    gap: float


def _wrap(k: np.ndarray) -> np.ndarray:
    """Map momenta into (-pi, pi]."""
    wrapped = np.mod(k + np.pi, 2 * np.pi) - np.pi
    return np.where(np.isclose(wrapped, -np.pi), np.pi, wrapped)


def dirac_report(bh: BlochHamiltonian) -> List[DiracPoint]:
    """The two zeros +-K of Gamma with the mass s Delta and the local gap there."""
    if bh.params.t == 0:
        raise DomainError("Γ identically degenerate: t = 0")
    sign = Chirality(bh.chirality).sign
    points = []
    for orientation in (1, -1):
        k1, k2 = orientation * DIRAC_MOMENTUM[0], orientation * DIRAC_MOMENTUM[1]
        mass = float(sign * haldane_mass(bh.params, k1, k2))
        gap = float(2 * abs(bh.diagonal_mass(k1, k2)))
        points.append(DiracPoint((k1, k2), mass, gap))
    return points


def locate_dirac_points(
    bh: BlochHamiltonian,
    guesses: Tuple[Tuple[float, float], ...] = ((2.0, 2.0), (-2.0, -2.0)),
) -> List[Tuple[float, float]]:
    """Numerical zeros of Gamma near the given guesses, wrapped into (-pi, pi]."""
    if bh.params.t == 0:
        raise DomainError("Γ identically degenerate: t = 0")

    def residual(k):
        g = gamma(bh.params, k[0], k[1])
        return [g.real, g.imag]

    roots = []
    for guess in guesses:
        solution, info, status, message = optimize.fsolve(residual, guess, full_output=True, xtol=1e-14)
        if status != 1:
            logger.warning(f"✗ Dirac point search from {guess} did not converge: {message}")
        roots.append(tuple(float(x) for x in _wrap(np.asarray(solution))))
    return roots


def _occupied_frames(bh: BlochHamiltonian, k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    """Occupied eigenvectors on a momentum array, shape k1.shape + (n, n_occ)."""
    energies, vectors = np.linalg.eigh(bloch_eval(bh, (k1, k2)))
    n_occ = bh.n_occupied
    gap = np.min(energies[..., n_occ] - energies[..., n_occ - 1])
    if gap < BAND_GAP_TOL:
        raise GapClosedError(f"Band gap closes on the grid (minimum {gap:.2e})")
    return vectors[..., :n_occ]


def _link(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Normalized det(left^* right) over the trailing two axes."""
    overlap = np.linalg.det(np.conj(np.swapaxes(left, -1, -2)) @ right)
    return overlap / np.abs(overlap)


def _plaquette_fluxes(frames: np.ndarray) -> np.ndarray:
    """Principal-branch plaquette phases on a periodic grid, indexed by lower-left corner."""
    U1 = _link(frames, np.roll(frames, -1, axis=0))
    U2 = _link(frames, np.roll(frames, -1, axis=1))
    loop = U1 * np.roll(U2, -1, axis=0) * np.conj(np.roll(U1, -1, axis=1)) * np.conj(U2)
    return np.angle(loop)


def chern_lattice(bh: BlochHamiltonian, grid: BZGrid, band: str = 'lower') -> int:
    """
    Chern number of the occupied (lower) bands by the plaquette field-strength method.

    Oriented as (1/2 pi) integral of F = d1 A2 - d2 A1 with A = i <u|grad u>.
    """
    if band != 'lower':
        raise DomainError(f"Only the lower band set is supported, got {band}")
    k1, k2 = grid.momenta()
    fluxes = _plaquette_fluxes(_occupied_frames(bh, k1, k2))
    value = -np.sum(fluxes) / (2 * np.pi)
    chern = int(np.round(value))
    if abs(value - chern) > INTEGER_TOL:
        raise QualityGateError(f"Lattice Chern number {value:.12f} is not an integer")
    logger.debug(f"Lattice Chern number {chern} on N={grid.N}")
    return chern


def berry_curvature_table(bh: BlochHamiltonian, grid: BZGrid) -> List[Dict[str, float]]:
    """Per-plaquette Berry flux and curvature of the occupied bands."""
    k1, k2 = grid.momenta()
    flux = -_plaquette_fluxes(_occupied_frames(bh, k1, k2))
    area = grid.spacing ** 2
    rows = []
    for m1 in range(grid.N):
        for m2 in range(grid.N):
            rows.append({
                'm1': m1,
                'm2': m2,
                'k1': float(k1[m1, m2]),
                'k2': float(k2[m1, m2]),
                'berry_flux': float(flux[m1, m2]),
                'curvature': float(flux[m1, m2] / area),
            })
    return rows


def _time_reverse(vectors: np.ndarray) -> np.ndarray:
    """Theta on Bloch vectors in (orbital, spin) order, acting on the second-to-last axis."""
    rotation = np.kron(np.eye(2), ODD_SPIN_ROTATION)
    return rotation @ np.conj(vectors)


def z2_ebz(bh: BlochHamiltonian, grid: BZGrid, gauge_seed: Optional[int] = None) -> int:
    """
    Z2 index by the discretized effective-Brillouin-zone integral.

    The EBZ is k1 in [0, 2 pi), k2 in [0, pi]. On its time-reversal
    invariant edges k2 = 0 and k2 = pi the frames at -k are fixed from
    those at k by phi1(-k) = -Theta phi2(k), phi2(-k) = Theta phi1(k), and at
    the invariant momenta phi2 = Theta phi1. Then
    D = (sum of edge link phases - sum of plaquette fluxes) / 2 pi, and the
    index is D mod 2.

    Args:
        gauge_seed: when given, the interior frames are re-phased at random
            first; the result must not change
    """
    if not bh.spinful:
        raise DomainError("z2_ebz needs the spinful Bloch Hamiltonian")
    N = grid.N
    if N % 2:
        raise DomainError(f"z2_ebz needs an even grid, got N={N}")
    half = N // 2

    m = np.arange(N) * grid.spacing
    k1, k2 = np.meshgrid(m, m[:half + 1], indexing='ij')
    frames = _occupied_frames(bh, k1, k2).copy()

    if gauge_seed is not None:
        rng = np.random.default_rng(gauge_seed)
        phases = np.exp(2j * np.pi * rng.random(frames.shape[:2] + (1, frames.shape[-1])))
        frames = frames * phases

    for row in (0, half):
        for m1 in (0, half):
            first = frames[m1, row, :, 0]
            frames[m1, row, :, 1] = _time_reverse(first[:, None])[:, 0]
        for m1 in range(1, half):
            partner = N - m1
            reversed_frame = _time_reverse(frames[m1, row])
            frames[partner, row, :, 0] = -reversed_frame[:, 1]
            frames[partner, row, :, 1] = reversed_frame[:, 0]

    U1 = _link(frames, np.roll(frames, -1, axis=0))
    U2 = _link(frames[:, :-1], frames[:, 1:])
    loop = U1[:, :-1] * np.roll(U2, -1, axis=0) * np.conj(U1[:, 1:]) * np.conj(U2)
    surface = np.sum(np.angle(loop))
    edge = np.sum(np.angle(U1[:, 0])) - np.sum(np.angle(U1[:, half]))

    value = (edge - surface) / (2 * np.pi)
    D = int(np.round(value))
    if abs(value - D) > INTEGER_TOL:
        raise QualityGateError(f"EBZ integral {value:.12f} is not an integer")
    logger.debug(f"EBZ integral D={D} on N={N}")
    return D % 2


def spin_block_chern_parity(bh: BlochHamiltonian, grid: BZGrid) -> int:
    """Chern parity of the spin-up block; equals the Z2 index when the spins decouple."""
    if bh.lambda_R:
        raise DomainError("Spin blocks decouple only at lambda_R = 0")
    block = BlochHamiltonian(bh.params, Chirality.PLUS, spinful=False)
    return chern_lattice(block, grid) % 2


@dataclass(frozen=True)
class GaugePatchPair:
    """
    Lower-band eigenvectors f (singular at the Dirac point where d < 0) and
    g (singular where d > 0), related by f = exp(i eta) g with
    exp(i eta) = -Gamma / |Gamma|.
    """

    bloch: BlochHamiltonian

    def _pieces(self, k1, k2):
        d = self.bloch.diagonal_mass(k1, k2)
        g = gamma(self.bloch.params, k1, k2)
        energy = np.sqrt(d ** 2 + np.abs(g) ** 2)
        gamma_sq = np.abs(g) ** 2
        # E + d and E - d without cancellation
        with np.errstate(divide='ignore', invalid='ignore'):
            e_plus = np.where(d >= 0, energy + d, gamma_sq / (energy - d))
            e_minus = np.where(d <= 0, energy - d, gamma_sq / (energy + d))
        return d, g, energy, e_plus, e_minus

    def norm_factors(self, k1, k2) -> Tuple[np.ndarray, np.ndarray]:
        """Squared normalizations 2E(E + d) of f and 2E(E - d) of g."""
        _, _, energy, e_plus, e_minus = self._pieces(k1, k2)
        return 2 * energy * e_plus, 2 * energy * e_minus

    def f(self, k1, k2) -> np.ndarray:
        _, g, energy, e_plus, _ = self._pieces(k1, k2)
        norm = np.sqrt(2 * energy * e_plus)
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.stack([e_plus / norm, -g / norm], axis=-1)

    def g(self, k1, k2) -> np.ndarray:
        _, g, energy, _, e_minus = self._pieces(k1, k2)
        norm = np.sqrt(2 * energy * e_minus)
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.stack([-np.conj(g) / norm, e_minus / norm], axis=-1)

    def transition(self, k1, k2) -> np.ndarray:
        """exp(i eta) = -Gamma / |Gamma|."""
        g = gamma(self.bloch.params, k1, k2)
        with np.errstate(divide='ignore', invalid='ignore'):
            return -g / np.abs(g)


def loop_winding(values: np.ndarray) -> float:
    """Total phase accumulated along a closed loop of nonzero complex numbers."""
    values = np.asarray(values)
    steps = values[np.r_[1:len(values), 0]] * np.conj(values)
    return float(np.sum(np.angle(steps)))


def _line_winding(pair: GaugePatchPair, k2: float, samples: int) -> float:
    k1 = np.arange(samples) * 2 * np.pi / samples
    return loop_winding(pair.transition(k1, np.full_like(k1, k2)))


@dataclass(frozen=True)
class GaugePatchReport:
    max_transition_error: float
    checked_points: int
    winding_k2_zero: float
    winding_k2_pi: float
    f_norm_at_singularity: float
    g_norm_at_singularity: float

    @property
    def winding_difference(self) -> float:
        return self.winding_k2_zero - self.winding_k2_pi

    @property
    def patch_sum(self) -> complex:
        """K^up + K^low = i times the winding difference."""
        return 1j * self.winding_difference

    def to_dict(self) -> dict:
        return {
            'max_transition_error': self.max_transition_error,
            'checked_points': self.checked_points,
            'winding_k2_zero': self.winding_k2_zero,
            'winding_k2_pi': self.winding_k2_pi,
            'winding_difference': self.winding_difference,
            'patch_sum_imag': self.patch_sum.imag,
            'f_norm_at_singularity': self.f_norm_at_singularity,
            'g_norm_at_singularity': self.g_norm_at_singularity,
        }


def gauge_patch_report(p: GaugePatchPair, grid: BZGrid) -> GaugePatchReport:
    if p.bloch.params.t == 0:
        raise DomainError("Γ identically degenerate: t = 0")
    k1, k2 = grid.momenta()
    g_abs = np.abs(gamma(p.bloch.params, k1, k2))
    regular = g_abs > GAMMA_CUTOFF
    f_vals = p.f(k1[regular], k2[regular])
    g_vals = p.g(k1[regular], k2[regular])
    eta = p.transition(k1[regular], k2[regular])
    error = np.max(np.abs(f_vals - eta[:, None] * g_vals)) if regular.any() else 0.0

    # f is singular where d < 0 at the Dirac point, g where d > 0
    f_norms, g_norms = [], []
    for point in dirac_report(p.bloch):
        f_factor, g_factor = p.norm_factors(*point.momentum)
        f_norms.append(float(f_factor))
        g_norms.append(float(g_factor))

    samples = max(grid.N, 8)
    return GaugePatchReport(
        max_transition_error=float(error),
        checked_points=int(regular.sum()),
        winding_k2_zero=_line_winding(p, 0.0, samples),
        winding_k2_pi=_line_winding(p, np.pi, samples),
        f_norm_at_singularity=min(f_norms),
        g_norm_at_singularity=min(g_norms),
    )


def gauge_patch_check(p: GaugePatchPair, grid: BZGrid) -> bool:
    """
    f = exp(i eta) g to 1e-10 wherever |Gamma| > 1e-6, and the eta winding
    along k2 = 0 minus along k2 = pi equals -2 pi to 1%.
    """
    report = gauge_patch_report(p, grid)
    transition_ok = report.max_transition_error < TRANSITION_TOL
    winding_ok = abs(report.winding_difference + 2 * np.pi) < 0.01 * 2 * np.pi
    result = bool(transition_ok and winding_ok)
    logger.info(
        f"{'✓' if result else '✗'} Gauge patches: transition error {report.max_transition_error:.2e}, "
        f"winding difference {report.winding_difference:.6f}"
    )
    return result
