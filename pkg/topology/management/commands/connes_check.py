"""
Check the Connes area formula: the truncated sum over dual points of
tau_uv tau_vw tau_wu against 2 pi i (v - w) x (w - u).
"""
import numpy as np

from topology.management.commands._base import IndexCommand
from topology.utils.ncindex import connes_area_sum, connes_area_target

# Site triples with pairwise distance <= 2
DEFAULT_TRIPLES = (
    ((0, 0), (1, 0), (0, 1)),
    ((0, 0), (0, 1), (1, 0)),
    ((0, 0), (2, 0), (1, 1)),
    ((1, 1), (1, 2), (0, 1)),
    ((0, 0), (1, 0), (2, 0)),
)
RELATIVE_TOL = 0.05


class Command(IndexCommand):
    help = 'Compare truncated Connes area sums with 2 pi i times the oriented triangle area'

    name = 'connes_check'
    report_name = 'connes'

    def run(self, config):
        rows = []
        for u, v, w in DEFAULT_TRIPLES:
            total = connes_area_sum(u, v, w, config.radius)
            target = connes_area_target(u, v, w)
            scale = max(abs(target), 2 * np.pi)
            error = abs(total - target) / scale
            rows.append({
                'u': u,
                'v': v,
                'w': w,
                'sum': total,
                'target': target,
                'relative_error': error,
            })
            self.check(
                error <= RELATIVE_TOL,
                f'{u} {v} {w}: sum {total.imag:+.4f}i vs {target.imag:+.4f}i (error {error:.2%})',
            )
        return {'radius': config.radius, 'relative_tol': RELATIVE_TOL, 'triples': rows}
