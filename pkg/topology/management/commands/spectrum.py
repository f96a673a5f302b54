"""
Energy spectrum of the configured box and, on an open box, the spectrum of
A = P - U_a P U_a^* at the central dual point. Both are written as CSV.
"""
from topology.management.commands._base import IndexCommand
from topology.utils.lattice import DualPoint
from topology.utils.model import build_haldane, build_kane_mele
from topology.utils.ncindex import index_at
from topology.utils.reporting import write_csv
from topology.utils.spectral import diagonalize, fermi_projection, spectral_gap


class Command(IndexCommand):
    help = 'Write the energy spectrum and the eigenvalues of A as CSV tables'

    name = 'spectrum'
    command_defaults = {'model': 'kane_mele', 'spins': 2, 'size': 12}

    def build(self, config):
        if config.model == 'kane_mele':
            return build_kane_mele(config.kane_mele_params(), config.lattice_spec(spins=2))
        return build_haldane(config.haldane_params(), config.lattice_spec(), config.chirality_enum)

    def run(self, config):
        h = self.build(config)
        d = diagonalize(h)
        gap = spectral_gap(d, config.e_f)
        energy_csv = write_csv(
            self.output_path(config, 'spectrum_energies.csv'),
            ({'index': i, 'energy': e} for i, e in enumerate(d.eigenvalues)),
            ['index', 'energy'],
        )
        self.stdout.write(f'{d.dim} eigenvalues, gap {gap.gap:.6f} at E_F={config.e_f}')
        body = {
            'model': config.model,
            'dim': d.dim,
            'gap': gap.to_dict(),
            'tables': {'energies': str(energy_csv)},
        }

        if h.spec.is_open:
            report = index_at(fermi_projection(d, config.e_f), DualPoint.center(h.spec), config.delta)
            a_csv = write_csv(
                self.output_path(config, 'spectrum_A.csv'),
                ({'index': i, 'eigenvalue': v} for i, v in enumerate(report.eigenvalues_of_A)),
                ['index', 'eigenvalue'],
            )
            body['tables']['eigenvalues_of_A'] = str(a_csv)
            body['index_report'] = report.to_record()
            self.stdout.write(f'A: n+ = {report.n_plus}, n- = {report.n_minus}, Tr A^3 = {report.trace_A3:.6f}')
        return body
