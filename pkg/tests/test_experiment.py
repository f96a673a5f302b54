"""Tests for sweeps, flip detection and the robustness studies."""

import time

import numpy as np
import pytest

from topology.utils.errors import ConfigError, DomainError
from topology.utils.experiment import (
    FIELDNAMES,
    SweepConfig,
    SweepRecord,
    continuity_study,
    disorder_sweep,
    evaluate_point,
    find_flips,
    finite_size_study,
    no_flip_without_closure,
    summarize,
    transition_sweep,
    window_study,
)
from topology.utils.lattice import Boundary, DualPoint, LatticeSpec
from topology.utils.model import HaldaneParams, KaneMeleParams, build_kane_mele, disorder_potential
from topology.utils.ncindex import build_pair_ops, flux_unitary
from topology.utils.spectral import diagonalize, fermi_projection

CRITICAL_LAMBDA_V = 3 * np.sqrt(3) * 0.1


def _record(index, value, z2, gap=0.5, realization=0, closed=False):
    return SweepRecord(
        value=value,
        value_index=index,
        realization=realization,
        seed=realization,
        gap=gap,
        open_gap=gap / 2,
        trace_A3=None if closed else float(z2),
        chern=None if closed else z2,
        z2=None if closed else z2,
        residual=None if closed else 0.01,
        gap_closed=closed,
    )


@pytest.fixture
def sweep_config(km_params, spinful_box):
    return SweepConfig(base=km_params, parameter='disorder_W', values=(0.0, 0.5), spec=spinful_box, realizations=2)


@pytest.mark.unit
class TestSweepConfig:
    """Test cases for sweep configuration."""

    def test_keys_and_seeds(self, sweep_config):
        """Test every (value, realization) pair is a key and seeds offset the base seed."""
        assert sweep_config.n_points == 4
        assert sweep_config.keys() == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert sweep_config.seed_for(1) == 1

    def test_params_at(self, sweep_config):
        """Test the swept value and seed are written into the model parameters."""
        params = sweep_config.params_at(1, 1)
        assert params.disorder_W == 0.5
        assert params.seed == 1
        assert params.lambda_R == 0.05

    @pytest.mark.parametrize('overrides', [
        {'parameter': 'mass'},
        {'values': ()},
        {'values': (0.0, 0.5, 0.2)},
        {'realizations': 0},
        {'audit_fraction': 1.5},
        {'threads': 0},
    ])
    def test_invalid(self, km_params, spinful_box, overrides):
        """Test invalid sweep settings are config errors."""
        kwargs = {'base': km_params, 'parameter': 'disorder_W', 'values': (0.0, 0.1), 'spec': spinful_box}
        kwargs.update(overrides)
        with pytest.raises(ConfigError):
            SweepConfig(**kwargs)

    def test_requires_open_box(self, km_params):
        """Test the index box must be open."""
        with pytest.raises(ConfigError):
            SweepConfig(km_params, 'disorder_W', (0.0,), LatticeSpec.square(6, Boundary.PERIODIC))

    def test_decreasing_values(self, km_params, spinful_box):
        """Test strictly decreasing sweeps are allowed."""
        assert SweepConfig(km_params, 'lambda_R', (0.2, 0.1), spinful_box).values == (0.2, 0.1)

    def test_audit_keys(self, km_params, spinful_box):
        """Test the audit subset is empty at 0, everything at 1 and reproducible in between."""
        base = {'base': km_params, 'parameter': 'disorder_W', 'values': (0.0, 0.1, 0.2), 'spec': spinful_box}
        assert SweepConfig(**base).audit_keys() == set()
        full = SweepConfig(**base, audit_fraction=1.0)
        assert full.audit_keys() == set(full.keys())
        half = SweepConfig(**base, audit_fraction=0.5, base_seed=9)
        assert half.audit_keys() == SweepConfig(**base, audit_fraction=0.5, base_seed=9).audit_keys()


@pytest.mark.unit
class TestFlipDetection:
    """Test cases for flip detection on synthetic records."""

    def test_constant_series(self):
        """Test a constant z2 series has no flips."""
        records = [_record(i, 0.1 * i, 1) for i in range(4)]
        assert no_flip_without_closure(records)
        assert find_flips(records) == []

    def test_flip_without_closure(self):
        """Test a change of z2 between unflagged neighbours is caught."""
        records = [_record(0, 0.0, 1), _record(1, 0.1, 0)]
        assert not no_flip_without_closure(records)
        assert len(find_flips(records)) == 1

    def test_flip_across_closure(self):
        """Test a change across a flagged record is allowed and located."""
        records = [
            _record(0, 0.0, 1, gap=0.6),
            _record(1, 0.3, 0, gap=0.0, closed=True),
            _record(2, 0.6, 0, gap=0.4),
        ]
        assert no_flip_without_closure(records)
        (flip,) = find_flips(records)
        assert (flip.before, flip.after) == (0.0, 0.6)
        assert (flip.z2_before, flip.z2_after) == (1, 0)
        assert flip.min_gap == 0.0

    def test_realizations_are_separate_series(self):
        """Test series of different realizations are not compared with each other."""
        records = [_record(0, 0.0, 1, realization=0), _record(0, 0.0, 0, realization=1)]
        assert no_flip_without_closure(records)

    def test_summarize(self):
        """Test per-value aggregates."""
        records = [
            _record(0, 0.0, 1, realization=0),
            _record(0, 0.0, 1, realization=1, gap=0.2),
            _record(1, 0.5, 0, realization=0, closed=True),
            _record(1, 0.5, 1, realization=1),
        ]
        summary = summarize(records)
        first, second = summary['per_value']
        assert first['records'] == 2
        assert first['z2_consensus'] == 1
        assert first['min_gap'] == 0.2
        assert second['flagged'] == 1
        assert summary['no_flip_without_closure']
        assert summary['flips'] == []

    def test_fieldnames_follow_record(self):
        """Test CSV columns are the record fields."""
        assert FIELDNAMES[:3] == ['value', 'value_index', 'realization']
        assert set(FIELDNAMES) == set(_record(0, 0.0, 1).to_dict())


@pytest.mark.integration
class TestSweeps:
    """Test cases for running sweeps."""

    def test_evaluate_point_with_audit(self, sweep_config):
        """Test a clean Kane-Mele point with Rashba coupling keeps Z2 = 1 and passes the audit."""
        record = evaluate_point(sweep_config, 0, 0, audit=True)
        assert not record.gap_closed
        assert record.z2 == 1
        assert record.degeneracy_audit is True
        assert record.gap == pytest.approx(2 * CRITICAL_LAMBDA_V, abs=0.1)

    def test_disorder_sweep_reuses_completed_records(self, sweep_config):
        """Test completed points are not recomputed and the result is ordered."""
        done = evaluate_point(sweep_config, 0, 0)
        seen = []
        records = disorder_sweep(sweep_config, on_record=seen.append, completed=[done])
        assert len(seen) == 3
        assert [r.key for r in records] == sweep_config.keys()
        assert records[0] is done
        assert no_flip_without_closure(records)

    def test_error_keeps_finished_points(self, sweep_config, monkeypatch):
        """Test points that finish after another point fails still reach on_record."""
        finished = []

        def evaluate(cfg, value_index, realization, audit=False):
            if (value_index, realization) == (0, 1):
                raise DomainError('broken point')
            if (value_index, realization) == (0, 0):
                time.sleep(0.2)
            record = _record(value_index, cfg.values[value_index], 1, realization=realization)
            finished.append(record.key)
            return record

        monkeypatch.setattr('topology.utils.experiment.evaluate_point', evaluate)
        cfg = SweepConfig(
            base=sweep_config.base,
            parameter='disorder_W',
            values=(0.0, 0.5),
            spec=sweep_config.spec,
            realizations=2,
            threads=2,
        )
        seen = []
        with pytest.raises(DomainError):
            disorder_sweep(cfg, on_record=seen.append)
        assert (0, 0) in finished
        assert sorted(r.key for r in seen) == sorted(finished)

    @pytest.mark.slow
    def test_transition_sweep_flips_across_closure(self, spinful_box):
        """Test Z2 changes from 1 to 0 across the gap closure at 3 sqrt(3) t'."""
        cfg = SweepConfig(
            base=KaneMeleParams(haldane=HaldaneParams(t=1.0, t_prime=0.1)),
            parameter='lambda_v',
            values=(0.0, 0.3, CRITICAL_LAMBDA_V, 0.75, 1.0),
            spec=spinful_box,
            threads=2,
        )
        records = transition_sweep(cfg)
        assert [r.z2 for r in records if not r.gap_closed] == [1, 1, 0, 0]
        assert records[2].gap_closed
        (flip,) = summarize(records, cfg)['flips']
        assert (flip['before'], flip['after']) == (0.3, 0.75)

    def test_transition_sweep_parameter(self, sweep_config):
        """Test transition sweeps only run along lambda_v."""
        with pytest.raises(ConfigError):
            transition_sweep(sweep_config)


@pytest.mark.integration
class TestStudies:
    """Test cases for the continuity, finite-size and window studies."""

    def test_continuity(self, km_box):
        """Test drifts are reported per scale and eigenvalue drift is bounded by the operator drift."""
        direction = disorder_potential(km_box.spec, 1.0, seed=2)
        rows = continuity_study(km_box, direction, [0.02, 0.01])
        assert [row.scale for row in rows] == [0.01, 0.02]
        for row in rows:
            assert not row.gap_closed
            assert row.perturbation_norm <= row.scale / 2 + 1e-12
            assert row.eigenvalue_drift <= row.operator_drift + 1e-10
            assert row.operator_drift <= 2 * row.projection_drift + 1e-10
        assert 0.25 <= rows[0].projection_drift / rows[1].projection_drift <= 1.0

    def test_continuity_requires_open_box(self):
        """Test a periodic box is refused."""
        spec = LatticeSpec.square(6, Boundary.PERIODIC)
        h = build_kane_mele(KaneMeleParams(), spec)
        with pytest.raises(DomainError):
            continuity_study(h, disorder_potential(spec, 1.0, seed=0), [0.1])

    @pytest.mark.slow
    def test_finite_size(self, haldane_params):
        """Test the Haldane index is 1 on growing boxes."""
        rows = finite_size_study(haldane_params, [12, 16])
        assert [row.size for row in rows] == [12, 16]
        assert all(row.chern == 1 for row in rows)

    def test_window_independence(self, haldane_box):
        """Test the index does not depend on delta."""
        spec = haldane_box.spec
        ops = build_pair_ops(fermi_projection(diagonalize(haldane_box), 0.0), flux_unitary(spec, DualPoint.center(spec)))
        assert {report.chern for report in window_study(ops)} == {1}
