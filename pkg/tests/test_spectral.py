"""Unit tests for eigendecomposition, Fermi projections and gaps."""

import numpy as np
import pytest

from topology.utils.errors import FermiLevelError, GapClosedError
from topology.utils.lattice import Boundary, LatticeSpec
from topology.utils.model import (
    HaldaneParams,
    Hamiltonian,
    KaneMeleParams,
    TimeReversalOp,
    build_kane_mele,
    disorder_potential,
)
from topology.utils.spectral import (
    diagonalize,
    fermi_projection,
    operator_norm,
    projection_perturbation_norm,
    spectral_gap,
)


def _diagonal(values):
    spec = LatticeSpec(L1=2, L2=len(values) // 4, spins=1)
    return Hamiltonian(np.diag(np.asarray(values, dtype=complex)), spec)


@pytest.mark.unit
class TestDiagonalize:
    """Test cases for the eigendecomposition."""

    def test_ascending_and_orthonormal(self, haldane_box):
        """Test eigenvalues ascend and eigenvectors are orthonormal."""
        d = diagonalize(haldane_box)
        assert np.all(np.diff(d.eigenvalues) >= 0)
        assert np.allclose(d.eigenvectors.conj().T @ d.eigenvectors, np.eye(d.dim), atol=1e-10)

    def test_reconstructs_hamiltonian(self, haldane_box):
        """Test V diag(E) V^* reproduces H."""
        d = diagonalize(haldane_box)
        rebuilt = (d.eigenvectors * d.eigenvalues) @ d.eigenvectors.conj().T
        assert np.allclose(rebuilt, haldane_box.matrix, atol=1e-10)

    def test_deterministic_phase(self, haldane_box):
        """Test the first significant component of every eigenvector is real and positive."""
        d = diagonalize(haldane_box)
        pivots = np.argmax(np.abs(d.eigenvectors) > 1e-10, axis=0)
        first = d.eigenvectors[pivots, np.arange(d.dim)]
        assert np.allclose(first.imag, 0, atol=1e-12)
        assert np.all(first.real > 0)


@pytest.mark.unit
class TestFermiProjection:
    """Test cases for the Fermi projection."""

    def test_projection_properties(self, haldane_box):
        """Test P is Hermitian, idempotent and has rank equal to the occupied count."""
        d = diagonalize(haldane_box)
        p = fermi_projection(d, 0.0)
        assert np.allclose(p.matrix, p.matrix.conj().T)
        assert np.allclose(p.matrix @ p.matrix, p.matrix, atol=1e-10)
        assert p.rank == int(np.sum(d.eigenvalues < 0))
        assert np.isclose(np.trace(p.matrix).real, p.rank)

    def test_commutes_with_hamiltonian_and_time_reversal(self, km_box):
        """Test [H, P_F] = 0 and P_F is invariant under odd time reversal."""
        p = fermi_projection(diagonalize(km_box), 0.0).matrix
        h = km_box.matrix
        assert np.linalg.norm(h @ p - p @ h) < 1e-9 * km_box.dim
        theta = TimeReversalOp(km_box.spec)
        assert np.linalg.norm(theta.conjugate_operator(p) - p) < 1e-9 * km_box.dim

    def test_fermi_level_on_spectrum(self):
        """Test E_F on an eigenvalue is rejected."""
        d = diagonalize(_diagonal([-1, -1, 0, 0, 1, 1, 2, 2]))
        with pytest.raises(FermiLevelError):
            fermi_projection(d, 0.0)

    def test_empty_and_full_projection(self):
        """Test E_F below or above the spectrum gives rank 0 or full rank."""
        d = diagonalize(_diagonal([-1, -1, 0.5, 0.5, 1, 1, 2, 2]))
        assert fermi_projection(d, -5.0).rank == 0
        assert fermi_projection(d, 5.0).rank == 8


@pytest.mark.unit
class TestSpectralGap:
    """Test cases for gap reporting."""

    def test_gap_around_fermi_level(self):
        """Test the gap is the distance between the neighbouring eigenvalues."""
        gap = spectral_gap(diagonalize(_diagonal([-2, -1, -1, -0.5, 0.25, 1, 1, 2])), 0.0)
        assert gap.highest_occupied == pytest.approx(-0.5)
        assert gap.lowest_empty == pytest.approx(0.25)
        assert gap.gap == pytest.approx(0.75)
        assert gap.is_open

    def test_collision_reports_zero(self):
        """Test a Fermi level on the spectrum reports a closed gap."""
        gap = spectral_gap(diagonalize(_diagonal([-1, -1, 0, 0, 1, 1, 2, 2])), 0.0)
        assert gap.gap == 0.0
        assert not gap.is_open

    def test_one_sided_spectrum(self):
        """Test an empty side of the spectrum gives an infinite gap."""
        gap = spectral_gap(diagonalize(_diagonal([1, 1, 2, 2, 3, 3, 4, 4])), 0.0)
        assert gap.highest_occupied == -np.inf
        assert gap.gap == np.inf

    def test_kane_mele_bulk_gap(self):
        """Test the periodic Kane-Mele box is gapped at E_F = 0."""
        spec = LatticeSpec.square(12, Boundary.PERIODIC)
        h = build_kane_mele(KaneMeleParams(haldane=HaldaneParams(t_prime=0.1)), spec)
        gap = spectral_gap(diagonalize(h), 0.0)
        assert gap.gap == pytest.approx(2 * 3 * np.sqrt(3) * 0.1, abs=1e-8)

    def test_to_dict(self):
        """Test the gap report serializes its fields."""
        data = spectral_gap(diagonalize(_diagonal([-1, -1, -1, -1, 1, 1, 1, 1])), 0.0).to_dict()
        assert set(data) == {'highest_occupied', 'lowest_empty', 'gap', 'fermi_energy'}
        assert data['gap'] == pytest.approx(2.0)


@pytest.mark.unit
class TestPerturbation:
    """Test cases for the continuity of the Fermi projection."""

    def test_operator_norm(self):
        """Test the spectral norm of a Hermitian matrix."""
        assert operator_norm(np.diag([1.0, -3.0, 2.0])) == pytest.approx(3.0)
        assert operator_norm(np.zeros((0, 0))) == 0.0

    def test_small_perturbation_moves_projection_little(self):
        """Test ||P' - P|| stays below a multiple of ||dH|| / gap on a gapped torus."""
        spec = LatticeSpec.square(12, Boundary.PERIODIC)
        h = build_kane_mele(KaneMeleParams(haldane=HaldaneParams(t_prime=0.1)), spec)
        dh = disorder_potential(spec, 0.02, seed=5)
        change, size = projection_perturbation_norm(h, dh, 0.0)
        assert size <= 0.01
        gap = 2 * 3 * np.sqrt(3) * 0.1
        assert change <= 2 * size / (gap - 2 * size)

    def test_halving_the_perturbation(self):
        """Test halving dH roughly halves ||P' - P||."""
        spec = LatticeSpec.square(12, Boundary.PERIODIC)
        h = build_kane_mele(KaneMeleParams(haldane=HaldaneParams(t_prime=0.1)), spec)
        dh = disorder_potential(spec, 0.02, seed=5)
        full, _ = projection_perturbation_norm(h, dh, 0.0)
        half, _ = projection_perturbation_norm(h, dh.scaled(0.5), 0.0)
        assert 0.3 <= half / full <= 0.7

    def test_closed_gap(self):
        """Test a closed gap is reported."""
        spec = LatticeSpec.square(6, Boundary.PERIODIC)
        h = build_kane_mele(KaneMeleParams(haldane=HaldaneParams(t_prime=0.0)), spec)
        with pytest.raises((GapClosedError, FermiLevelError)):
            projection_perturbation_norm(h, Hamiltonian.zeros(spec), 0.0)
