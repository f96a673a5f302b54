"""
Momentum-space view of the Haldane model: Dirac points, lattice Berry flux,
the f/g gauge patches and a per-plaquette Berry curvature table.
"""

from topology.management.commands._base import IndexCommand
from topology.utils.kspace import (
    BlochHamiltonian,
    BZGrid,
    GaugePatchPair,
    berry_curvature_table,
    chern_lattice,
    dirac_report,
    gauge_patch_check,
    gauge_patch_report,
    locate_dirac_points,
)
from topology.utils.reporting import write_csv


class Command(IndexCommand):
    help = 'Dirac points, lattice Chern number, gauge patch transition and Berry curvature table'

    name = 'kspace'
    command_defaults = {'model': 'haldane', 'grid_N': 48}

    def run(self, config):
        bh = BlochHamiltonian(config.haldane_params(), config.chirality_enum)
        grid = BZGrid(config.grid_N)

        dirac = dirac_report(bh)
        roots = locate_dirac_points(bh)
        chern = chern_lattice(bh, grid)
        table = write_csv(
            self.output_path(config, 'kspace_berry.csv'),
            berry_curvature_table(bh, grid),
            ['m1', 'm2', 'k1', 'k2', 'berry_flux', 'curvature'],
        )
        self.stdout.write(f'Lattice Chern number {chern} on N={grid.N}')
        for point in dirac:
            self.stdout.write(f'  Dirac point {point.momentum}: mass {point.mass:+.6f}, gap {point.gap:.6f}')

        body = {
            'chern_lattice': chern,
            'dirac_points': [
                {'momentum': point.momentum, 'mass': point.mass, 'gap': point.gap} for point in dirac
            ],
            'located_dirac_points': roots,
            'tables': {'berry_curvature': str(table)},
        }

        pair = GaugePatchPair(bh)
        report = gauge_patch_report(pair, grid)
        body['gauge_patches'] = report.to_dict()
        self.check(
            gauge_patch_check(pair, grid),
            f'f = exp(i eta) g to {report.max_transition_error:.2e}; K^up + K^low = {report.patch_sum.imag:+.6f}i',
        )
        return body
