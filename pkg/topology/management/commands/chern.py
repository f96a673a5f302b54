"""
Cross-check the Chern number of the Haldane model with four estimators:
the pair-of-projections index, the local Chern marker, the Kubo formula
and the lattice Berry flux in momentum space.
"""
from topology.management.commands._base import IndexCommand
from topology.utils.kspace import BlochHamiltonian, BZGrid, chern_lattice
from topology.utils.lattice import Boundary, DualPoint, RegionMask
from topology.utils.model import build_haldane
from topology.utils.ncindex import index_at, kubo_hall, local_chern_marker
from topology.utils.spectral import diagonalize, fermi_projection, spectral_gap

# Distance to the integer reference allowed for the real-space estimators
MARKER_TOL = 0.2
KUBO_TOL = 0.3


class Command(IndexCommand):
    help = 'Chern number of the Haldane model from four estimators, cross-tabulated'

    name = 'chern'
    command_defaults = {'model': 'haldane', 'spins': 1, 'size': 20}
    models = ('haldane',)

    def run(self, config):
        params = config.haldane_params()
        chirality = config.chirality_enum

        # Momentum space first: a closed bulk gap stops the run with exit 3
        reference = chern_lattice(BlochHamiltonian(params, chirality), BZGrid(config.grid_N))
        self.stdout.write(f'Lattice Berry flux (N={config.grid_N}): {reference}')

        spec = config.lattice_spec(spins=1, boundary=Boundary.OPEN)
        h = build_haldane(params, spec, chirality)
        d = diagonalize(h)
        gap = spectral_gap(d, config.e_f)
        p = fermi_projection(d, config.e_f)
        center = DualPoint.center(spec)

        report = index_at(p, center, config.delta)
        marker = local_chern_marker(p, RegionMask.square(spec, config.region_size))
        kubo = kubo_hall(d, config.e_f, center)

        self.stdout.write(
            f'Index {report.chern} (Tr A^3 = {report.trace_A3:.6f}), '
            f'marker {marker:.4f}, Kubo {kubo:.4f}'
        )
        self.check(
            report.passes_quality_gate(config.residual_gate),
            f'index residual {report.residual:.3e} <= {config.residual_gate} and unambiguous window',
        )
        self.check(report.chern == reference, f'index {report.chern} equals lattice Berry flux {reference}')
        self.check(abs(marker - reference) <= MARKER_TOL, f'local marker {marker:.4f} within {MARKER_TOL} of {reference}')
        self.check(abs(kubo - reference) <= KUBO_TOL, f'Kubo {kubo:.4f} within {KUBO_TOL} of {reference}')

        return {
            'estimators': {
                'index': report.chern,
                'chern_lattice': reference,
                'local_chern_marker': marker,
                'kubo_hall': kubo,
            },
            'tolerances': {
                'residual_gate': config.residual_gate,
                'marker': MARKER_TOL,
                'kubo': KUBO_TOL,
            },
            'index_report': report.to_record(),
            'eigenvalues_of_A': report.eigenvalues_of_A,
            'gap': gap.to_dict(),
            'region_size': config.region_size,
        }
