"""
Shared plumbing for the topology management commands: common flags,
config resolution, report writing and exit codes.
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple

from django.core.management.base import BaseCommand, CommandError

from topology.utils.errors import ConfigError, QualityGateError, TopologyError
from topology.utils.reporting import provenance, write_json
from topology.utils.run_config import RunConfig, load_run_config

logger = logging.getLogger(__name__)


class IndexCommand(BaseCommand):
    """
    Base class for commands driven by a RunConfig.

    Subclasses set name and command_defaults and implement run(config),
    returning the report body; models, when set, lists the config models
    the command accepts. Failed checks are collected with check() and
    turned into exit 4 after the report is written.
    """

    name = None
    report_name = None
    command_defaults: Dict[str, Any] = {}
    models: Tuple[str, ...] = ()

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON run configuration file')
        parser.add_argument('--seed', type=int, help='Random seed (disorder, audits)')
        parser.add_argument('--size', type=int, help='Box side L')
        parser.add_argument('--delta', type=float, help='Counting window for the eigenvalues of A, in (0, 1)')
        parser.add_argument('--out', help='Output directory for reports and tables')
        parser.add_argument('--threads', type=int, help='Worker cap')

    def handle(self, *args, **options):
        self.failures: List[str] = []
        overrides = {key: options.get(key) for key in ('seed', 'size', 'delta', 'out', 'threads')}
        try:
            config = load_run_config(
                options.get('config'),
                overrides,
                {'command': self.name, **self.command_defaults},
            )
            if self.models and config.model not in self.models:
                raise ConfigError(f"{self.name} runs model {', '.join(self.models)}, got {config.model}")
            logger.info(f"Running {self.name} with seed={config.seed} size={config.size}")
            body = self.run(config)
            path = self.write_report(config, body)
            if self.failures:
                raise QualityGateError('; '.join(self.failures))
        except TopologyError as e:
            self.stdout.write(self.style.ERROR(f'✗ {e}'))
            raise CommandError(str(e), returncode=e.exit_code)

        self.stdout.write(self.style.SUCCESS(f'✓ {self.name} passed; report at {path}'))

    def run(self, config: RunConfig) -> Dict[str, Any]:
        raise NotImplementedError

    def check(self, ok: bool, message: str):
        """Record a named check; failures make the command exit 4 after reporting."""
        if ok:
            self.stdout.write(f'  ✓ {message}')
        else:
            self.stdout.write(self.style.WARNING(f'  ✗ {message}'))
            self.failures.append(message)

    def output_path(self, config: RunConfig, filename: str) -> Path:
        return config.output_dir / filename

    def write_report(self, config: RunConfig, body: Dict[str, Any]) -> Path:
        payload = {
            'provenance': provenance(self.name, config.to_dict()),
            'passed': not self.failures,
            'failures': list(self.failures),
            **body,
        }
        return write_json(self.output_path(config, f'{self.report_name or self.name}.json'), payload)
