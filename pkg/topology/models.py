from django.db import models
from django.utils import timezone
import logging

from topology.utils.experiment import FIELDNAMES, SweepRecord

logger = logging.getLogger(__name__)


class SweepRun(models.Model):
    """One sweep, identified by the fingerprint of its resolved configuration."""

    STATUS_CHOICES = [
        ('running', 'Running'),
        ('complete', 'Complete'),
        ('failed', 'Failed'),
    ]

    fingerprint = models.CharField(max_length=64, unique=True, help_text='SHA-256 of the canonical resolved config')
    command = models.CharField(max_length=50)
    config = models.JSONField(default=dict)
    seed = models.BigIntegerField(default=0)
    version = models.CharField(max_length=20)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='running')

    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.command} {self.fingerprint[:12]} ({self.status})"

    def mark_finished(self, status: str = 'complete'):
        self.status = status
        self.finished_at = timezone.now()
        self.save(update_fields=['status', 'finished_at', 'updated_at'])
        logger.info(f"Sweep run {self.fingerprint[:12]} marked {status}")

    def records(self):
        """Stored points as SweepRecords in (value_index, realization) order."""
        return [point.to_record() for point in self.points.order_by('value_index', 'realization')]


class SweepPoint(models.Model):
    """One finished (value, realization) point of a sweep; rows are append-only."""

    run = models.ForeignKey(SweepRun, on_delete=models.CASCADE, related_name='points')
    value = models.FloatField()
    value_index = models.IntegerField()
    realization = models.IntegerField()
    seed = models.BigIntegerField()
    gap = models.FloatField(help_text='Bulk gap on the periodic twin')
    open_gap = models.FloatField(help_text='Gap of the open box')
    trace_A3 = models.FloatField(null=True, blank=True)
    chern = models.IntegerField(null=True, blank=True)
    z2 = models.IntegerField(null=True, blank=True)
    residual = models.FloatField(null=True, blank=True)
    gap_closed = models.BooleanField(default=False)
    ambiguous_window = models.BooleanField(default=False)
    degeneracy_audit = models.BooleanField(null=True, blank=True)
    wall_time = models.FloatField(default=0.0, help_text='Seconds')

    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['value_index', 'realization']
        constraints = [
            models.UniqueConstraint(fields=['run', 'value_index', 'realization'], name='unique_sweep_point'),
        ]

    def __str__(self):
        return f"{self.run.command} #{self.value_index}/{self.realization} z2={self.z2}"

    def to_record(self) -> SweepRecord:
        return SweepRecord(**{name: getattr(self, name) for name in FIELDNAMES})
