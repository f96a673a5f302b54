"""Integration tests that run the full index pipeline on the reference models."""

import numpy as np
import pytest

from topology.utils.experiment import (
    SweepConfig,
    disorder_sweep,
    find_flips,
    finite_size_study,
    no_flip_without_closure,
    transition_sweep,
)
from topology.utils.kspace import BlochHamiltonian, BZGrid, chern_lattice, z2_ebz
from topology.utils.lattice import Boundary, DualPoint, LatticeSpec, RegionMask
from topology.utils.model import (
    HaldaneParams,
    KaneMeleParams,
    TimeReversalOp,
    add_disorder,
    build_haldane,
    build_kane_mele,
)
from topology.utils.ncindex import (
    build_pair_ops,
    eigenvalue_clusters,
    flux_position_invariance,
    flux_unitary,
    index_at,
    index_report,
    kubo_hall,
    local_chern_marker,
    susy_pairing_check,
    trs_even_degeneracy_check,
)
from topology.utils.spectral import diagonalize, fermi_projection

HALDANE = HaldaneParams(t=1.0, t_prime=0.1)
WINDOW = (0.01, 0.99)


def _open_box(size, spins):
    return LatticeSpec.square(size, Boundary.OPEN, spins=spins)


def _flux_points(spec):
    center = DualPoint.center(spec)
    return [center, center.shifted(1, 0), center.shifted(-1, 1)]


@pytest.mark.integration
@pytest.mark.slow
@pytest.mark.timeout(600)
class TestHaldaneChern:
    """Integration tests for the Chern number of the Haldane model."""

    def test_momentum_space(self):
        """Test the lattice Berry flux on N = 24 is exactly 1."""
        assert chern_lattice(BlochHamiltonian(HALDANE), BZGrid(24)) == 1

    def test_real_space_convergence(self):
        """Test the index is 1 on L = 12, 16, 20 with a shrinking residual."""
        rows = finite_size_study(HALDANE, [12, 16, 20])
        assert [row.chern for row in rows] == [1, 1, 1]
        residuals = [row.residual for row in rows]
        assert residuals == sorted(residuals, reverse=True)
        assert residuals[-1] < 0.15

    def test_local_marker(self):
        """Test the central 8x8 marker on L = 24 is within 0.1 of 1."""
        spec = _open_box(24, spins=1)
        p = fermi_projection(diagonalize(build_haldane(HALDANE, spec)), 0.0)
        assert local_chern_marker(p, RegionMask.square(spec, 8)) == pytest.approx(1.0, abs=0.1)

    def test_kubo(self):
        """Test the Kubo formula on L = 20 is within 0.2 of 1 and all three estimators agree."""
        spec = _open_box(20, spins=1)
        d = diagonalize(build_haldane(HALDANE, spec))
        p = fermi_projection(d, 0.0)
        center = DualPoint.center(spec)
        kubo = kubo_hall(d, 0.0, center)
        report = index_at(p, center)
        marker = local_chern_marker(p, RegionMask.square(spec, 8))
        assert kubo == pytest.approx(1.0, abs=0.2)
        assert abs(report.trace_A3 - kubo) < 0.3
        assert abs(report.trace_A3 - marker) < 0.2

    def test_flux_and_window_invariance(self):
        """Test the index is the same for three flux positions and three windows."""
        spec = _open_box(16, spins=1)
        p = fermi_projection(diagonalize(build_haldane(HALDANE, spec)), 0.0)
        charges = {
            index_at(p, a, delta).chern
            for a in _flux_points(spec)
            for delta in (0.3, 0.5, 0.7)
        }
        assert charges == {1}


@pytest.mark.integration
@pytest.mark.slow
@pytest.mark.timeout(600)
class TestKaneMeleZ2:
    """Integration tests for the Z2 index of the Kane-Mele model."""

    @pytest.mark.parametrize('lambda_R', [0.0, 0.05])
    def test_z2_and_vanishing_total_chern(self, lambda_R):
        """Test z2 = 1 and |Tr A^3| < 0.1 on L = 16."""
        spec = _open_box(16, spins=2)
        h = build_kane_mele(KaneMeleParams(haldane=HALDANE, lambda_R=lambda_R), spec)
        p = fermi_projection(diagonalize(h), 0.0)
        report = index_at(p, DualPoint.center(spec))
        assert report.z2 == 1
        assert abs(report.trace_A3) < 0.1

        bh = BlochHamiltonian(HALDANE, spinful=True, lambda_R=lambda_R)
        assert z2_ebz(bh, BZGrid(24)) == report.z2

    def test_flux_and_window_invariance(self):
        """Test z2 is the same for three flux positions and three windows."""
        spec = _open_box(16, spins=2)
        h = build_kane_mele(KaneMeleParams(haldane=HALDANE, lambda_R=0.05), spec)
        p = fermi_projection(diagonalize(h), 0.0)
        values = {
            index_at(p, a, delta).z2
            for a in _flux_points(spec)
            for delta in (0.3, 0.5, 0.7)
        }
        assert values == {1}
        assert flux_position_invariance(h, 0.0, _flux_points(spec))


@pytest.mark.integration
@pytest.mark.slow
@pytest.mark.timeout(600)
class TestDisorderedInstances:
    """Integration tests for algebraic identities and pairing on disordered instances."""

    SEEDS = range(10)

    def test_identities_pairing_and_degeneracy(self):
        """Test AB + BA = 0, A^2 + B^2 = 1, SUSY pairing and even degeneracy on 10 instances."""
        spec = _open_box(12, spins=2)
        theta = TimeReversalOp(spec)
        flux = flux_unitary(spec, DualPoint.center(spec))
        for seed in self.SEEDS:
            params = KaneMeleParams(haldane=HALDANE, lambda_R=0.05, disorder_W=0.3, seed=seed)
            ops = build_pair_ops(fermi_projection(diagonalize(build_kane_mele(params, spec)), 0.0), flux)
            residuals = ops.identity_residuals()
            assert residuals['anticommutator'] < 1e-9 * ops.dim
            assert residuals['pythagoras'] < 1e-9 * ops.dim
            assert susy_pairing_check(ops, WINDOW, tol=1e-6)
            assert trs_even_degeneracy_check(ops, theta, window=WINDOW, tol=1e-6)
            assert index_report(ops).z2 == 1

    def test_single_block_negative_control(self):
        """Test the disordered Haldane block shows odd multiplicities somewhere in the window."""
        spec = _open_box(12, spins=1)
        flux = flux_unitary(spec, DualPoint.center(spec))
        clean = build_haldane(HALDANE, spec)
        odd = 0
        for seed in self.SEEDS:
            h = add_disorder(clean, 0.3, seed=seed)
            values = index_report(build_pair_ops(fermi_projection(diagonalize(h), 0.0), flux)).eigenvalues_of_A
            in_window = values[(np.abs(values) > WINDOW[0]) & (np.abs(values) < WINDOW[1])]
            odd += sum(len(cluster) % 2 for cluster in eigenvalue_clusters(in_window, tol=1e-6))
        assert odd > 0


@pytest.mark.integration
@pytest.mark.slow
@pytest.mark.timeout(900)
class TestRobustness:
    """Integration tests for disorder robustness and the topological transition."""

    def test_disorder_keeps_z2(self):
        """Test z2 stays 1 over W in [0, 0.5] and five seeds."""
        cfg = SweepConfig(
            base=KaneMeleParams(haldane=HALDANE, lambda_R=0.05),
            parameter='disorder_W',
            values=np.linspace(0.0, 0.5, 6),
            spec=_open_box(12, spins=2),
            realizations=5,
            threads=4,
        )
        records = disorder_sweep(cfg)
        assert len(records) == 30
        assert {r.z2 for r in records if not r.gap_closed} == {1}
        assert no_flip_without_closure(records)

    def test_transition_flips_once_at_mass_inversion(self):
        """Test z2 flips once along lambda_v, across a gap minimum near 3 sqrt(3) t'."""
        critical = 3 * np.sqrt(3) * HALDANE.t_prime
        cfg = SweepConfig(
            base=KaneMeleParams(haldane=HALDANE),
            parameter='lambda_v',
            values=(0.0, 0.15, 0.3, critical, 0.75, 0.9, 1.04),
            spec=_open_box(12, spins=2),
            threads=4,
        )
        (flip,) = find_flips(transition_sweep(cfg))
        assert (flip.z2_before, flip.z2_after) == (1, 0)
        assert flip.before < critical < flip.after
        assert flip.min_gap < 0.1
