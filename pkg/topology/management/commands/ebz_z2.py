"""
Z2 index of the Kane-Mele Bloch Hamiltonian from the effective Brillouin
zone integral. With decoupled spins it is cross-checked against the parity
of the spin-up Chern number.
"""
from topology.management.commands._base import IndexCommand
from topology.utils.kspace import BlochHamiltonian, BZGrid, spin_block_chern_parity, z2_ebz
from topology.utils.model import Chirality


class Command(IndexCommand):
    help = 'Z2 index over the effective Brillouin zone'

    name = 'ebz_z2'
    command_defaults = {'model': 'kane_mele', 'spins': 2}

    def run(self, config):
        bh = BlochHamiltonian(config.haldane_params(), Chirality.PLUS, spinful=True, lambda_R=config.lambda_R)
        grid = BZGrid(config.grid_N)
        z2 = z2_ebz(bh, grid)
        gauge_check = z2_ebz(bh, grid, gauge_seed=config.seed)
        self.stdout.write(f'EBZ z2 = {z2} on N={grid.N}')
        self.check(gauge_check == z2, f'z2 unchanged under a random gauge (seed {config.seed})')

        body = {'z2': z2, 'grid_N': grid.N, 'lambda_R': config.lambda_R}
        if not config.lambda_R:
            parity = spin_block_chern_parity(bh, grid)
            body['spin_block_chern_parity'] = parity
            self.check(parity == z2, f'spin-up Chern parity {parity} equals z2')
        return body
