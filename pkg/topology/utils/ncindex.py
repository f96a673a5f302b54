"""
Index of a pair of projections.

For the Fermi projection P and the flux unitary U_a the operators
A = P - U_a P U_a^* and B = 1 - P - U_a P U_a^* anticommute, and
Tr A^3 = dim ker(A - 1) - dim ker(A + 1). Under odd time reversal the
parity of dim ker(A - 1) is the Z2 index.

On a finite box Tr A^3 = Tr A = 0: the modes bound to the flux are
cancelled by modes running along the edge. Traces and kernel counts are
therefore taken over an l-infinity ball of radius L/4 around a, and the
Kubo sum is truncated the same way.

Every Chern estimator here is oriented like Tr A^3.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from topology.utils.errors import DomainError, GapClosedError, PreconditionError, QualityGateError
from topology.utils.lattice import DualPoint, LatticeSpec, RegionMask, state_coordinates
from topology.utils.model import Hamiltonian, TimeReversalOp
from topology.utils.spectral import (
    EigenDecomposition,
    FermiProjection,
    diagonalize,
    fermi_projection,
    spectral_gap,
)

logger = logging.getLogger(__name__)

DEFAULT_DELTA = 0.5
WINDOW_EDGE_TOL = 1e-3
RESIDUAL_GATE = 0.25
TRACE_IMAG_TOL = 1e-9
TRACE_AGREEMENT_TOL = 1e-8
CLUSTER_TOL = 1e-6
TRS_PROJECTION_TOL = 1e-9
WEIGHT_EDGE_TOL = 0.1


def flux_phase(u, a) -> np.ndarray:
    """
    U_a(u) = (u1 + i u2 - (a1 + i a2)) / |u1 + i u2 - (a1 + i a2)|.

    Args:
        u: site coordinates, shape (2,) or (n, 2)
        a: dual point or (a1, a2)
    """
    a1, a2 = a.as_tuple() if isinstance(a, DualPoint) else a
    u = np.asarray(u, dtype=float)
    z = (u[..., 0] - a1) + 1j * (u[..., 1] - a2)
    return z / np.abs(z)


@dataclass(frozen=True, eq=False)
class FluxUnitary:
    """Site-diagonal phase operator anchored at a dual point."""

    spec: LatticeSpec
    a: DualPoint
    phases: np.ndarray

    @property
    def diagonal(self) -> np.ndarray:
        """Per-state phases, broadcast over orbital and spin."""
        return np.repeat(self.phases, self.spec.channels)

    def conjugate(self, matrix: np.ndarray) -> np.ndarray:
        """U_a M U_a^*."""
        diagonal = self.diagonal
        return diagonal[:, None] * matrix * np.conj(diagonal)[None, :]


def flux_unitary(spec: LatticeSpec, a: DualPoint) -> FluxUnitary:
    if not spec.is_open:
        raise DomainError("flux requires open boundary")
    if spec.hull_distance(a.a1, a.a2) <= 0:
        raise DomainError(f"Flux anchor {a} is not strictly inside the {spec.L1}x{spec.L2} box")
    return FluxUnitary(spec, a, flux_phase(spec.site_coordinates(), a))


@dataclass(frozen=True, eq=False)
class PairProjectionOps:
    A: np.ndarray
    B: np.ndarray
    projection: FermiProjection
    flux: FluxUnitary

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def identity_residuals(self) -> Dict[str, float]:
        """Frobenius norms of AB + BA and A^2 + B^2 - 1."""
        A, B = self.A, self.B
        return {
            'anticommutator': float(np.linalg.norm(A @ B + B @ A)),
            'pythagoras': float(np.linalg.norm(A @ A + B @ B - np.eye(self.dim))),
        }


def build_pair_ops(p: FermiProjection, u: FluxUnitary) -> PairProjectionOps:
    if p.dim != u.spec.dim:
        raise DomainError(f"Dimension mismatch: projection {p.dim}, flux unitary {u.spec.dim}")
    rotated = u.conjugate(p.matrix)
    A = p.matrix - rotated
    B = np.eye(p.dim) - p.matrix - rotated
    return PairProjectionOps(A, B, p, u)


@dataclass(frozen=True, eq=False)
class IndexReport:
    eigenvalues_of_A: np.ndarray
    n_plus: int
    n_minus: int
    trace_A3: float
    trace_A3_spectral: float
    chern: int
    z2: int
    residual: float
    delta: float
    ambiguous_window: bool
    flux: Optional[Tuple[float, float]] = None
    radius: Optional[float] = None
    localized_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def counts_agree(self) -> bool:
        return self.chern == self.n_plus - self.n_minus

    def passes_quality_gate(self, max_residual: float = RESIDUAL_GATE) -> bool:
        return self.residual <= max_residual and not self.ambiguous_window

    def to_record(self) -> dict:
        """Flat record; eigenvalues and weights are left out."""
        return {
            'n_plus': self.n_plus,
            'n_minus': self.n_minus,
            'trace_A3': self.trace_A3,
            'trace_A3_spectral': self.trace_A3_spectral,
            'chern': self.chern,
            'z2': self.z2,
            'residual': self.residual,
            'delta': self.delta,
            'radius': self.radius,
            'ambiguous_window': self.ambiguous_window,
            'counts_agree': self.counts_agree,
            'flux_a1': self.flux[0] if self.flux else None,
            'flux_a2': self.flux[1] if self.flux else None,
        }


def _hermitian_part(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.conj().T) / 2


def default_radius(spec: LatticeSpec) -> int:
    return max(1, min(spec.L1, spec.L2) // 4)


def flux_region(spec: LatticeSpec, a: DualPoint, radius: Optional[float] = None) -> RegionMask:
    """Ball around the flux the index traces run over."""
    radius = default_radius(spec) if radius is None else radius
    region = RegionMask.around(spec, a, radius)
    if region.touches_boundary():
        logger.warning(f"✗ Index region of radius {radius} around {a} reaches the box boundary")
    return region


def _localized_weights(eigenvectors: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Eigenvalues of V^* chi V for the columns V; 1 is a mode fully inside the region."""
    if eigenvectors.shape[1] == 0:
        return np.zeros(0)
    block = eigenvectors[mask, :]
    return np.clip(linalg.eigvalsh(block.conj().T @ block), 0.0, 1.0)


def index_report(
    ops: PairProjectionOps,
    delta: float = DEFAULT_DELTA,
    radius: Optional[float] = None,
) -> IndexReport:
    """
    Tr chi A^3 chi over the ball chi around the flux, as a matrix trace and
    as sum lambda^3 |chi phi|^2 over the eigenpairs of A.

    n_plus and n_minus count the modes with eigenvalue in [1 - delta, 1]
    and [-1, -1 + delta] that carry more than half their weight inside the
    ball. Modes in a window are counted jointly, so mixing between
    degenerate bulk and edge modes does not change the count.
    """
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")

    spec = ops.flux.spec
    radius = default_radius(spec) if radius is None else radius
    mask = flux_region(spec, ops.flux.a, radius).state_mask()

    A = ops.A
    eigenvalues, eigenvectors = linalg.eigh(_hermitian_part(A))
    trace = np.sum((A[mask, :] @ A) * A[:, mask].T)
    if abs(trace.imag) > TRACE_IMAG_TOL:
        raise QualityGateError(f"Tr chi A^3 chi has imaginary part {trace.imag:.2e}")
    trace_A3 = float(trace.real)
    inside = np.sum(np.abs(eigenvectors[mask, :]) ** 2, axis=0)
    trace_spectral = float(np.sum(eigenvalues ** 3 * inside))
    if abs(trace_A3 - trace_spectral) > TRACE_AGREEMENT_TOL:
        raise QualityGateError(
            f"Tr A^3 estimators disagree: trace {trace_A3:.10f}, eigenvalues {trace_spectral:.10f}"
        )

    plus = _localized_weights(eigenvectors[:, eigenvalues >= 1 - delta], mask)
    minus = _localized_weights(eigenvectors[:, eigenvalues <= -1 + delta], mask)
    weights = np.concatenate([plus, minus])
    n_plus = int(np.sum(plus > 0.5))
    n_minus = int(np.sum(minus > 0.5))

    edges = np.array([1 - delta, -1 + delta])
    near_edge = np.any(np.abs(eigenvalues[:, None] - edges[None, :]) < WINDOW_EDGE_TOL, axis=1)
    ambiguous = bool(np.any(near_edge & (inside > WEIGHT_EDGE_TOL)))
    if ambiguous:
        logger.warning(f"✗ Eigenvalue of A within {WINDOW_EDGE_TOL} of the delta={delta} window edge")
    if np.any(np.abs(weights - 0.5) < WEIGHT_EDGE_TOL):
        ambiguous = True
        logger.warning("✗ Mode of A near +-1 is split between the index region and the rest of the box")
    chern = int(np.round(trace_A3))

    report = IndexReport(
        eigenvalues_of_A=eigenvalues,
        n_plus=n_plus,
        n_minus=n_minus,
        trace_A3=trace_A3,
        trace_A3_spectral=trace_spectral,
        chern=chern,
        z2=n_plus % 2,
        residual=abs(trace_A3 - chern),
        delta=delta,
        ambiguous_window=ambiguous,
        flux=ops.flux.a.as_tuple(),
        radius=float(radius),
        localized_weights=weights,
    )
    logger.debug(
        f"Index at a={ops.flux.a}: Tr chi A^3 chi={trace_A3:.6f}, n+={n_plus}, n-={n_minus}, z2={report.z2}"
    )
    return report


def index_at(
    p: FermiProjection,
    a: DualPoint,
    delta: float = DEFAULT_DELTA,
    radius: Optional[float] = None,
) -> IndexReport:
    return index_report(build_pair_ops(p, flux_unitary(p.spec, a)), delta, radius)


def eigenvalue_clusters(values: Sequence[float], tol: float = CLUSTER_TOL) -> List[np.ndarray]:
    """Split sorted values wherever consecutive entries differ by more than tol."""
    values = np.sort(np.asarray(values, dtype=float))
    if len(values) == 0:
        return []
    breaks = np.nonzero(np.diff(values) > tol)[0] + 1
    return np.split(values, breaks)


def _validate_window(window: Tuple[float, float]):
    lo, hi = window
    if not 0 < lo < hi < 1:
        raise DomainError(f"Window must satisfy 0 < lo < hi < 1, got {window}")


def _in_window(values: np.ndarray, window: Tuple[float, float]) -> np.ndarray:
    magnitudes = np.abs(values)
    return (magnitudes > window[0]) & (magnitudes < window[1])


def _sample_indices(indices: np.ndarray, samples: int) -> np.ndarray:
    if len(indices) <= samples:
        return indices
    return indices[np.linspace(0, len(indices) - 1, samples).round().astype(int)]


def _is_eigenvector(A: np.ndarray, vector: np.ndarray, value: float, tol: float) -> bool:
    norm = np.linalg.norm(vector)
    if norm == 0:
        return False
    return bool(np.linalg.norm(A @ vector - value * vector) < tol * norm)


def susy_pairing_check(
    ops: PairProjectionOps,
    lambda_window: Tuple[float, float] = (0.01, 0.99),
    tol: float = CLUSTER_TOL,
    samples: int = 8,
) -> bool:
    """
    Eigenvalues of A with |lambda| in the window come in (lambda, -lambda)
    pairs of equal multiplicity, and B maps each eigenvector to the partner.
    """
    _validate_window(lambda_window)
    eigenvalues, eigenvectors = linalg.eigh(_hermitian_part(ops.A))
    selected = _in_window(eigenvalues, lambda_window)
    positive = np.sort(eigenvalues[selected & (eigenvalues > 0)])
    negative = np.sort(-eigenvalues[selected & (eigenvalues < 0)])

    if len(positive) != len(negative) or np.any(np.abs(positive - negative) > tol):
        logger.info(f"✗ Spectrum of A not symmetric: {len(positive)} positive, {len(negative)} negative")
        return False

    A, B = ops.A, ops.B
    for index in _sample_indices(np.nonzero(selected)[0], samples):
        phi = eigenvectors[:, index]
        value = eigenvalues[index]
        defect = (phi - A @ (A @ phi)) - B @ (B @ phi)
        if np.linalg.norm(defect) >= tol:
            logger.info(f"✗ (1 - A^2) and B^2 differ on the eigenvector of {value:.6f}")
            return False
        if not _is_eigenvector(A, B @ phi, -value, tol):
            logger.info(f"✗ B does not map the {value:.6f} eigenvector to -lambda")
            return False
    logger.debug(f"✓ SUSY pairing holds for {len(positive)} pairs")
    return True


def _check_projection_trs(p: FermiProjection, theta: TimeReversalOp):
    deviation = np.linalg.norm(theta.conjugate_operator(p.matrix) - p.matrix)
    if deviation >= TRS_PROJECTION_TOL * p.dim:
        raise PreconditionError(
            f"Fermi projection is not time-reversal symmetric (deviation {deviation:.2e})"
        )


def trs_even_degeneracy_check(
    ops: PairProjectionOps,
    theta: TimeReversalOp,
    u: Optional[FluxUnitary] = None,
    window: Tuple[float, float] = (0.01, 0.99),
    tol: float = CLUSTER_TOL,
    samples: int = 8,
) -> bool:
    """
    Under odd time reversal every eigenvalue cluster of A with |lambda| in
    the window has even multiplicity.

    For sampled eigenvectors phi with eigenvalue lambda, U_a Theta(B phi) is
    a lambda-eigenvector orthogonal to phi and U_a Theta(phi) is a
    (-lambda)-eigenvector.
    """
    _validate_window(window)
    if theta.dim != ops.dim:
        raise DomainError("Time reversal and A act on different spaces")
    _check_projection_trs(ops.projection, theta)
    u = u or ops.flux

    eigenvalues, eigenvectors = linalg.eigh(_hermitian_part(ops.A))
    selected = _in_window(eigenvalues, window)
    for cluster in eigenvalue_clusters(eigenvalues[selected], tol):
        if len(cluster) % 2:
            logger.info(f"✗ Odd multiplicity {len(cluster)} at lambda={cluster.mean():.6f}")
            return False

    A, B = ops.A, ops.B
    phases = u.diagonal
    for index in _sample_indices(np.nonzero(selected)[0], samples):
        phi = eigenvectors[:, index]
        value = eigenvalues[index]
        partner = phases * theta.apply(B @ phi)
        if not _is_eigenvector(A, partner, value, tol):
            logger.info(f"✗ U_a Theta(B phi) is not an eigenvector at lambda={value:.6f}")
            return False
        overlap = abs(np.vdot(phi, partner))
        if overlap >= tol * np.linalg.norm(phi) * np.linalg.norm(partner):
            logger.info(f"✗ U_a Theta(B phi) not orthogonal to phi at lambda={value:.6f}")
            return False
        mirror = phases * theta.apply(phi)
        if not _is_eigenvector(A, mirror, -value, tol):
            logger.info(f"✗ U_a Theta(phi) is not a (-lambda)-eigenvector at lambda={value:.6f}")
            return False
    logger.debug(f"✓ Even degeneracy holds for {int(selected.sum())} in-window eigenvalues")
    return True


def default_margin(spec: LatticeSpec) -> int:
    return min(spec.L1, spec.L2) // 4


def _check_margin(spec: LatticeSpec, a: DualPoint, margin: int):
    if spec.hull_distance(a.a1, a.a2) < margin:
        raise DomainError(f"Dual point {a} is closer than {margin} to the box boundary")


def flux_position_invariance(
    h: Hamiltonian,
    e_f: float,
    a_list: Sequence[DualPoint],
    delta: float = DEFAULT_DELTA,
    margin: Optional[int] = None,
    radius: Optional[float] = None,
) -> bool:
    """chern and z2 agree for every flux position in a_list."""
    margin = default_margin(h.spec) if margin is None else margin
    for a in a_list:
        _check_margin(h.spec, a, margin)
    p = fermi_projection(diagonalize(h), e_f)
    reports = [index_at(p, a, delta, radius) for a in a_list]
    invariant = len({(r.chern, r.z2) for r in reports}) <= 1
    summary = ', '.join(f"{a}: chern={r.chern} z2={r.z2}" for a, r in zip(a_list, reports))
    logger.info(f"{'✓' if invariant else '✗'} Flux position invariance: {summary}")
    return invariant


def connes_area_target(u, v, w) -> complex:
    """2 pi i (v - w) x (w - u), with a x b = a1 b2 - a2 b1."""
    (u1, u2), (v1, v2), (w1, w2) = u, v, w
    return 2j * np.pi * ((v1 - w1) * (w2 - u2) - (v2 - w2) * (w1 - u1))


def connes_area_sum(u, v, w, radius: int) -> complex:
    """
    Sum over dual points a with |a| <= radius of tau_uv tau_vw tau_wu,
    tau_uv = 1 - exp(i (theta_a(u) - theta_a(v))).
    """
    sites = np.asarray([u, v, w], dtype=float)
    distances = [np.linalg.norm(sites[i] - sites[j]) for i in range(3) for j in range(i + 1, 3)]
    if radius < 8 * max(distances):
        raise DomainError(f"radius {radius} is below 8x the largest pairwise distance {max(distances):.3f}")

    m = np.arange(-radius - 1, radius + 1)
    a1, a2 = np.meshgrid(m + 0.5, m + 0.5, indexing='ij')
    inside = a1 ** 2 + a2 ** 2 <= radius ** 2
    a = np.stack([a1[inside], a2[inside]], axis=1)

    anchors = (a[:, 0], a[:, 1])
    phase_u, phase_v, phase_w = (flux_phase(site, anchors) for site in sites)
    tau_uv = 1 - phase_u * np.conj(phase_v)
    tau_vw = 1 - phase_v * np.conj(phase_w)
    tau_wu = 1 - phase_w * np.conj(phase_u)
    return complex(np.sum(tau_uv * tau_vw * tau_wu))


def local_chern_marker(p: FermiProjection, region: RegionMask) -> float:
    """
    2 pi i |region|^-1 Tr chi P [[X1, P], [X2, P]] chi, with |region| the
    number of sites in the region.
    """
    if region.n_sites == 0:
        raise DomainError("Local Chern marker needs a non-empty region")
    if region.spec.dim != p.dim:
        raise DomainError("Region and projection live on different lattices")

    P = p.matrix
    coords = state_coordinates(p.spec)
    X1, X2 = coords[:, 0], coords[:, 1]
    C1 = X1[:, None] * P - P * X1[None, :]
    C2 = X2[:, None] * P - P * X2[None, :]
    mask = region.state_mask()
    K_cols = C1 @ C2[:, mask] - C2 @ C1[:, mask]
    trace = np.sum(P[mask, :] * K_cols.T)
    value = 2j * np.pi * trace / region.n_sites
    if abs(value.imag) > TRACE_IMAG_TOL:
        raise QualityGateError(f"Local Chern marker has imaginary part {value.imag:.2e}")
    return float(value.real)


def kubo_hall(
    d: EigenDecomposition,
    e_f: float,
    a: DualPoint,
    margin: Optional[int] = None,
    radius: Optional[float] = None,
) -> float:
    """
    Finite-volume Hall conductance with step-function currents anchored at a.

    The current matrix elements <i|J_j|k> = i (E_i - E_k) <i|theta_j|k>
    cancel the energy denominators, leaving T_j = V_occ^* theta_j V_emp and
    the occupied-space operator G = T_1 T_2^*. Summed over the whole box
    Im Tr G vanishes; the value is 4 pi Im Tr chi V_occ G V_occ^* chi over the
    ball chi around a.
    """
    spec = d.spec
    if not spec.is_open:
        raise DomainError("Kubo formula with step currents requires open boundary")
    margin = default_margin(spec) if margin is None else margin
    _check_margin(spec, a, margin)
    gap = spectral_gap(d, e_f)
    if not gap.is_open:
        raise GapClosedError(f"Spectral gap closed at E_F={e_f} (gap {gap.gap:.2e})")

    coords = state_coordinates(spec)
    step1 = (coords[:, 0] - a.a1 >= 0).astype(float)
    step2 = (coords[:, 1] - a.a2 >= 0).astype(float)
    occupied, empty = d.occupied(e_f), d.empty(e_f)
    T1 = occupied.conj().T @ (step1[:, None] * empty)
    T2 = occupied.conj().T @ (step2[:, None] * empty)
    G = T1 @ T2.conj().T

    rows = occupied[flux_region(spec, a, radius).state_mask(), :]
    S = np.sum((rows @ G) * rows.conj())
    return float(4 * np.pi * S.imag)
