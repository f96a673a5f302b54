"""
Z2 index of the (possibly disordered) Kane-Mele model on an open box, with
the pairing and even-degeneracy structure of A checked alongside.
"""
from topology.management.commands._base import IndexCommand
from topology.utils.errors import PreconditionError
from topology.utils.lattice import Boundary, DualPoint
from topology.utils.model import TimeReversalOp, build_kane_mele, check_odd_trs
from topology.utils.ncindex import (
    build_pair_ops,
    flux_unitary,
    index_report,
    susy_pairing_check,
    trs_even_degeneracy_check,
)
from topology.utils.spectral import diagonalize, fermi_projection, spectral_gap

IDENTITY_TOL = 1e-9
# |Tr A^3| bound: the spin sectors carry opposite Chern numbers
TOTAL_CHERN_TOL = 0.1


class Command(IndexCommand):
    help = 'Z2 index of the Kane-Mele model with SUSY pairing and Kramers degeneracy checks'

    name = 'z2'
    command_defaults = {'model': 'kane_mele', 'spins': 2, 'size': 16}
    models = ('kane_mele',)

    def run(self, config):
        spec = config.lattice_spec(spins=2, boundary=Boundary.OPEN)
        h = build_kane_mele(config.kane_mele_params(), spec)
        theta = TimeReversalOp(spec)
        if not check_odd_trs(h, theta):
            raise PreconditionError("Hamiltonian is not odd time-reversal symmetric")

        d = diagonalize(h)
        gap = spectral_gap(d, config.e_f)
        p = fermi_projection(d, config.e_f)
        ops = build_pair_ops(p, flux_unitary(spec, DualPoint.center(spec)))
        report = index_report(ops, config.delta)
        residuals = ops.identity_residuals()
        window = (0.01, 0.99)
        susy = susy_pairing_check(ops, window, tol=config.tolerance)
        even = trs_even_degeneracy_check(ops, theta, window=window, tol=config.tolerance)

        self.stdout.write(
            f'z2 = {report.z2} (n+ = {report.n_plus}, n- = {report.n_minus}, Tr A^3 = {report.trace_A3:.6f})'
        )
        self.check(
            report.passes_quality_gate(config.residual_gate),
            f'index residual {report.residual:.3e} <= {config.residual_gate} and unambiguous window',
        )
        self.check(abs(report.trace_A3) < TOTAL_CHERN_TOL, f'|Tr A^3| = {abs(report.trace_A3):.3e} < {TOTAL_CHERN_TOL}')
        bound = IDENTITY_TOL * ops.dim
        for name, value in residuals.items():
            self.check(value < bound, f'{name} residual {value:.3e} < {bound:.1e}')
        self.check(susy, 'eigenvalues of A pair as (lambda, -lambda)')
        self.check(even, 'in-window eigenvalues of A have even multiplicity')

        return {
            'z2': report.z2,
            'index_report': report.to_record(),
            'identity_residuals': residuals,
            'susy_pairing': susy,
            'even_degeneracy': even,
            'eigenvalues_of_A': report.eigenvalues_of_A,
            'gap': gap.to_dict(),
        }
