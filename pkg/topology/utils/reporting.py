"""
Report files and provenance.

JSON reports keep every number in full precision; CSV tables are written
with csv.DictWriter. Sweeps append each finished record to the database
and to their CSV so an interrupted run can resume.
"""

import csv
import hashlib
import json
import logging
import platform
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import django
import numpy as np
import psutil
import scipy
from django.core.serializers.json import DjangoJSONEncoder
from django.utils import timezone

from topology import __version__
from topology.utils.experiment import FIELDNAMES, SweepRecord

logger = logging.getLogger(__name__)

# Keys that do not change any computed number
FINGERPRINT_EXCLUDE = ('out', 'threads')


class ResultEncoder(DjangoJSONEncoder):
    """DjangoJSONEncoder that also understands numpy scalars, arrays and complex numbers."""

    def default(self, o):
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (complex, np.complexfloating)):
            return {'real': float(o.real), 'imag': float(o.imag)}
        if isinstance(o, Enum):
            return o.value
        if isinstance(o, Path):
            return str(o)
        return super().default(o)


def canonical_json(data: Dict[str, Any]) -> str:
    return json.dumps(data, cls=ResultEncoder, sort_keys=True, separators=(',', ':'))


def config_fingerprint(config: Dict[str, Any]) -> str:
    """SHA-256 of the resolved config, ignoring keys that only affect where or how fast it runs."""
    relevant = {k: v for k, v in config.items() if k not in FINGERPRINT_EXCLUDE}
    return hashlib.sha256(canonical_json(relevant).encode('utf-8')).hexdigest()


def host_summary() -> Dict[str, Any]:
    memory = psutil.virtual_memory()
    return {
        'platform': platform.platform(),
        'python': platform.python_version(),
        'cpu_logical': psutil.cpu_count(logical=True),
        'cpu_physical': psutil.cpu_count(logical=False),
        'memory_total_gb': round(memory.total / 1024 ** 3, 2),
    }


def provenance(command: str, config: Dict[str, Any]) -> Dict[str, Any]:
    """Provenance block carried by every report: resolved config, seed and versions."""
    return {
        'command': command,
        'version': __version__,
        'seed': config.get('seed'),
        'fingerprint': config_fingerprint(config),
        'config': config,
        'created_at': timezone.now().isoformat(),
        'libraries': {
            'django': django.get_version(),
            'numpy': np.__version__,
            'scipy': scipy.__version__,
        },
        'host': host_summary(),
    }


def write_json(path, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(payload, f, cls=ResultEncoder, indent=2)
    logger.info(f"Wrote {path}")
    return path


def _csv_value(value):
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    if value is None:
        return ''
    return value


def write_csv(path, rows: Iterable[Dict[str, Any]], fieldnames: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_value(v) for k, v in row.items()})
            count += 1
    logger.info(f"Wrote {path} ({count} rows)")
    return path


def open_sweep_run(command: str, config: Dict[str, Any]) -> Tuple[Any, bool]:
    """
    Fetch the run with this config's fingerprint or create it.

    Returns:
        (run, created); a resumed run is set back to running
    """
    from topology.models import SweepRun

    fingerprint = config_fingerprint(config)
    run, created = SweepRun.objects.get_or_create(
        fingerprint=fingerprint,
        defaults={
            'command': command,
            'config': json.loads(canonical_json(config)),
            'seed': config.get('seed', 0),
            'version': __version__,
        },
    )
    if created:
        logger.info(f"Created sweep run {fingerprint[:12]}")
    else:
        logger.info(f"Resuming sweep run {fingerprint[:12]} with {run.points.count()} stored point(s)")
        if run.status != 'running':
            run.status = 'running'
            run.finished_at = None
            run.save(update_fields=['status', 'finished_at', 'updated_at'])
    return run, created


class SweepWriter:
    """Append-only sink for sweep records, mirrored to the database and a CSV file."""

    def __init__(self, run, csv_path):
        self.run = run
        self.csv_path = Path(csv_path)

    def completed_records(self) -> List[SweepRecord]:
        return self.run.records()

    def start(self) -> List[SweepRecord]:
        """Rewrite the CSV from the stored points and return them for resumption."""
        completed = self.completed_records()
        write_csv(self.csv_path, (r.to_dict() for r in completed), FIELDNAMES)
        return completed

    def append(self, record: SweepRecord):
        from topology.models import SweepPoint

        SweepPoint.objects.create(run=self.run, **record.to_dict())
        with open(self.csv_path, 'a', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=FIELDNAMES)
            writer.writerow({k: _csv_value(v) for k, v in record.to_dict().items()})
        logger.debug(f"Stored sweep point {record.key}")

    def finish(self, status: str = 'complete', records: Optional[Sequence[SweepRecord]] = None):
        """Mark the run finished; when records are given the CSV is rewritten in key order."""
        if records is not None:
            write_csv(self.csv_path, (r.to_dict() for r in records), FIELDNAMES)
        self.run.mark_finished(status)
