# Generated by Django 5.1.4 on 2026-10-18 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SweepRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('fingerprint', models.CharField(help_text='SHA-256 of the canonical resolved config', max_length=64, unique=True)),
                ('command', models.CharField(max_length=50)),
                ('config', models.JSONField(default=dict)),
                ('seed', models.BigIntegerField(default=0)),
                ('version', models.CharField(max_length=20)),
                ('status', models.CharField(choices=[('running', 'Running'), ('complete', 'Complete'), ('failed', 'Failed')], default='running', max_length=20)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='SweepPoint',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('value', models.FloatField()),
                ('value_index', models.IntegerField()),
                ('realization', models.IntegerField()),
                ('seed', models.BigIntegerField()),
                ('gap', models.FloatField(help_text='Bulk gap on the periodic twin')),
                ('open_gap', models.FloatField(help_text='Gap of the open box')),
                ('trace_A3', models.FloatField(blank=True, null=True)),
                ('chern', models.IntegerField(blank=True, null=True)),
                ('z2', models.IntegerField(blank=True, null=True)),
                ('residual', models.FloatField(blank=True, null=True)),
                ('gap_closed', models.BooleanField(default=False)),
                ('ambiguous_window', models.BooleanField(default=False)),
                ('degeneracy_audit', models.BooleanField(blank=True, null=True)),
                ('wall_time', models.FloatField(default=0.0, help_text='Seconds')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='points', to='topology.sweeprun')),
            ],
            options={
                'ordering': ['value_index', 'realization'],
                'constraints': [models.UniqueConstraint(fields=('run', 'value_index', 'realization'), name='unique_sweep_point')],
            },
        ),
    ]
