"""
Robustness sweep of the Kane-Mele Z2 index.

Every finished point is stored in the database and appended to the CSV
table; rerunning with the same configuration skips the stored points.
"""
from topology.management.commands._base import IndexCommand
from topology.utils.experiment import disorder_sweep, summarize, transition_sweep
from topology.utils.reporting import SweepWriter, open_sweep_run


class Command(IndexCommand):
    help = 'Sweep disorder, Rashba coupling, staggered potential or t\' and track gap and Z2 index'

    name = 'sweep'
    report_name = 'sweep_summary'
    command_defaults = {'model': 'kane_mele', 'spins': 2, 'size': 12}
    models = ('kane_mele',)

    def run(self, config):
        cfg = config.sweep_config()
        run, created = open_sweep_run(self.name, config.to_dict())
        writer = SweepWriter(run, self.output_path(config, f'sweep_{run.fingerprint[:12]}.csv'))
        completed = writer.start()
        if completed:
            self.stdout.write(self.style.WARNING(f'Resuming: {len(completed)} of {cfg.n_points} points already stored'))

        sweep = transition_sweep if cfg.parameter == 'lambda_v' else disorder_sweep
        try:
            records = sweep(cfg, writer.append, completed)
        except Exception:
            writer.finish('failed')
            raise
        writer.finish('complete', records)

        summary = summarize(records, cfg)
        for flip in summary['flips']:
            self.stdout.write(
                f"z2 {flip['z2_before']} -> {flip['z2_after']} between {flip['before']} and {flip['after']} "
                f"(realization {flip['realization']}, min gap {flip['min_gap']:.4f})"
            )
        if cfg.parameter != 'lambda_v':
            self.check(summary['no_flip_without_closure'], 'z2 constant between gap closures')

        return {
            'run': {
                'fingerprint': run.fingerprint,
                'resumed_points': len(completed),
                'points': len(records),
            },
            'table': str(writer.csv_path),
            'summary': summary,
        }
