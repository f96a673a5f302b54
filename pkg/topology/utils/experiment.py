"""
Robustness studies: parameter sweeps with gap and index tracking,
continuity of the Fermi projection, finite-size and window studies.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from topology.utils.errors import ConfigError, DomainError, PreconditionError
from topology.utils.lattice import Boundary, DualPoint, LatticeSpec
from topology.utils.model import (
    Chirality,
    HaldaneParams,
    Hamiltonian,
    KaneMeleParams,
    TimeReversalOp,
    build_haldane,
    build_kane_mele,
    check_odd_trs,
)
from topology.utils.ncindex import (
    DEFAULT_DELTA,
    IndexReport,
    build_pair_ops,
    flux_unitary,
    index_at,
    index_report,
    trs_even_degeneracy_check,
)
from topology.utils.spectral import diagonalize, fermi_projection, operator_norm, spectral_gap

logger = logging.getLogger(__name__)

SWEEP_PARAMETERS = ('disorder_W', 'lambda_R', 'lambda_v', 't_prime')
DEFAULT_GAP_THRESHOLD = 0.01
AUDIT_WINDOW = (0.01, 0.99)


@dataclass(frozen=True)
class SweepConfig:
    """
    Args:
        base: model parameters the swept value is written into
        parameter: name of the swept parameter
        values: monotone list of values
        realizations: disorder realizations per value; seed = base_seed + realization
        spec: open box the index is computed on
        gap_threshold: bulk gaps below this suppress the index claim
        audit_fraction: share of points that also run the even-degeneracy check
        threads: worker cap
    """

    base: KaneMeleParams
    parameter: str
    values: Tuple[float, ...]
    spec: LatticeSpec
    realizations: int = 1
    base_seed: int = 0
    e_f: float = 0.0
    delta: float = DEFAULT_DELTA
    gap_threshold: float = DEFAULT_GAP_THRESHOLD
    audit_fraction: float = 0.0
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'values', tuple(float(v) for v in self.values))
        if self.parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"Cannot sweep {self.parameter}; choose one of {', '.join(SWEEP_PARAMETERS)}")
        if not self.values:
            raise ConfigError("Sweep needs at least one value")
        steps = np.diff(self.values)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise ConfigError("Sweep values must be strictly monotone")
        if self.realizations < 1:
            raise ConfigError(f"realizations must be >= 1, got {self.realizations}")
        if not self.spec.is_open:
            raise ConfigError("Sweeps compute the index on an open box")
        if not 0 <= self.audit_fraction <= 1:
            raise ConfigError(f"audit_fraction must lie in [0, 1], got {self.audit_fraction}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")

    @property
    def n_points(self) -> int:
        return len(self.values) * self.realizations

    def keys(self) -> List[Tuple[int, int]]:
        return [(i, r) for i in range(len(self.values)) for r in range(self.realizations)]

    def seed_for(self, realization: int) -> int:
        return self.base_seed + realization

    def params_at(self, value_index: int, realization: int) -> KaneMeleParams:
        params = self.base.with_value(self.parameter, self.values[value_index])
        return params.with_value('seed', self.seed_for(realization))

    def audit_keys(self) -> set:
        """Deterministic subset of keys that run the even-degeneracy audit."""
        if self.audit_fraction <= 0:
            return set()
        draws = np.random.default_rng(self.base_seed).random(self.n_points)
        return {key for key, draw in zip(self.keys(), draws) if draw < self.audit_fraction}


@dataclass
class SweepRecord:
    value: float
    value_index: int
    realization: int
    seed: int
    gap: float
    open_gap: float
    trace_A3: Optional[float] = None
    chern: Optional[int] = None
    z2: Optional[int] = None
    residual: Optional[float] = None
    gap_closed: bool = False
    ambiguous_window: bool = False
    degeneracy_audit: Optional[bool] = None
    wall_time: float = 0.0

    @property
    def key(self) -> Tuple[int, int]:
        return (self.value_index, self.realization)

    def to_dict(self) -> dict:
        return asdict(self)


FIELDNAMES = list(SweepRecord.__dataclass_fields__)


def evaluate_point(cfg: SweepConfig, value_index: int, realization: int, audit: bool = False) -> SweepRecord:
    """
    One sweep point: Kane-Mele on the open box, bulk gap from its periodic
    twin, index at the box centre.
    """
    started = time.perf_counter()
    params = cfg.params_at(value_index, realization)
    seed = cfg.seed_for(realization)

    h = build_kane_mele(params, cfg.spec)
    theta = TimeReversalOp(cfg.spec)
    if not check_odd_trs(h, theta):
        raise PreconditionError(
            f"Perturbed Hamiltonian breaks odd time reversal at {cfg.parameter}={cfg.values[value_index]}"
        )

    bulk = build_kane_mele(params, cfg.spec.with_boundary(Boundary.PERIODIC))
    bulk_gap = spectral_gap(diagonalize(bulk), cfg.e_f).gap
    d = diagonalize(h)
    open_gap = spectral_gap(d, cfg.e_f).gap

    record = SweepRecord(
        value=cfg.values[value_index],
        value_index=value_index,
        realization=realization,
        seed=seed,
        gap=float(bulk_gap),
        open_gap=float(open_gap),
    )
    if bulk_gap < cfg.gap_threshold or open_gap == 0:
        record.gap_closed = True
        logger.info(
            f"✗ Gap closed at {cfg.parameter}={record.value} seed={seed}: bulk {bulk_gap:.3e}, open {open_gap:.3e}"
        )
    else:
        ops = build_pair_ops(fermi_projection(d, cfg.e_f), flux_unitary(cfg.spec, DualPoint.center(cfg.spec)))
        report = index_report(ops, cfg.delta)
        record.trace_A3 = report.trace_A3
        record.chern = report.chern
        record.z2 = report.z2
        record.residual = report.residual
        record.ambiguous_window = report.ambiguous_window
        if audit:
            record.degeneracy_audit = trs_even_degeneracy_check(ops, theta, window=AUDIT_WINDOW)
    record.wall_time = time.perf_counter() - started
    return record


def _run_sweep(
    cfg: SweepConfig,
    on_record: Optional[Callable[[SweepRecord], None]] = None,
    completed: Iterable[SweepRecord] = (),
) -> List[SweepRecord]:
    """
    Evaluate every missing (value, realization) point on a thread pool.

    on_record is called on the calling thread as each record finishes;
    records in completed are reused, not recomputed.
    """
    records: Dict[Tuple[int, int], SweepRecord] = {r.key: r for r in completed}
    pending = [key for key in cfg.keys() if key not in records]
    audit = cfg.audit_keys()
    logger.info(
        f"Sweep over {cfg.parameter}: {cfg.n_points} points, {len(records)} already done, "
        f"{len(pending)} to run on {cfg.threads} thread(s)"
    )

    def store(record: SweepRecord):
        records[record.key] = record
        if on_record is not None:
            on_record(record)

    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        futures = {
            pool.submit(evaluate_point, cfg, index, realization, (index, realization) in audit): (index, realization)
            for index, realization in pending
        }
        try:
            for future in as_completed(futures):
                store(future.result())
        except Exception:
            # Queued points are dropped; points already running are kept for resumption
            pool.shutdown(wait=True, cancel_futures=True)
            finished = [
                future.result() for future in futures
                if not future.cancelled() and future.exception() is None and futures[future] not in records
            ]
            for record in finished:
                store(record)
            logger.warning(f"✗ Sweep stopped on an error; kept {len(finished)} more finished point(s)")
            raise

    return [records[key] for key in sorted(records)]


def disorder_sweep(
    cfg: SweepConfig,
    on_record: Optional[Callable[[SweepRecord], None]] = None,
    completed: Iterable[SweepRecord] = (),
) -> List[SweepRecord]:
    """Sweep a time-reversal preserving perturbation (disorder or Rashba) at fixed model."""
    base_h = build_kane_mele(cfg.base, cfg.spec)
    if not check_odd_trs(base_h, TimeReversalOp(cfg.spec)):
        raise PreconditionError("Base model breaks odd time reversal")
    return _run_sweep(cfg, on_record, completed)


def transition_sweep(
    cfg: SweepConfig,
    on_record: Optional[Callable[[SweepRecord], None]] = None,
    completed: Iterable[SweepRecord] = (),
) -> List[SweepRecord]:
    """Drive the model through a gap closure along lambda_v."""
    if cfg.parameter != 'lambda_v':
        raise ConfigError(f"Transition sweeps run along lambda_v, got {cfg.parameter}")
    return _run_sweep(cfg, on_record, completed)


def _unflagged(record: SweepRecord) -> bool:
    return not record.gap_closed and record.z2 is not None


def _by_realization(records: Sequence[SweepRecord]) -> Dict[int, List[SweepRecord]]:
    groups: Dict[int, List[SweepRecord]] = {}
    for record in sorted(records, key=lambda r: r.key):
        groups.setdefault(record.realization, []).append(record)
    return groups


def no_flip_without_closure(records: Sequence[SweepRecord]) -> bool:
    """Within every maximal run of unflagged records along the sweep, z2 is constant."""
    for realization, series in _by_realization(records).items():
        current = None
        for record in series:
            if not _unflagged(record):
                current = None
                continue
            if current is not None and record.z2 != current:
                logger.info(f"✗ z2 changed without gap closure at value {record.value} (realization {realization})")
                return False
            current = record.z2
    return True


@dataclass(frozen=True)
class Flip:
    realization: int
    before: float
    after: float
    z2_before: int
    z2_after: int
    min_gap: float


def find_flips(records: Sequence[SweepRecord]) -> List[Flip]:
    """Intervals between consecutive unflagged records whose z2 differs, with the smallest gap seen in between."""
    flips = []
    for realization, series in _by_realization(records).items():
        previous = None
        gaps_since = []
        for record in series:
            gaps_since.append(record.gap)
            if not _unflagged(record):
                continue
            if previous is not None and record.z2 != previous.z2:
                flips.append(Flip(realization, previous.value, record.value, previous.z2, record.z2, min(gaps_since)))
            previous = record
            gaps_since = [record.gap]
    return flips


def summarize(records: Sequence[SweepRecord], cfg: Optional[SweepConfig] = None) -> dict:
    """Per-value aggregates, flip locations and the no-flip-without-closure property."""
    per_value = []
    for value in [v for _, v in sorted({(r.value_index, r.value) for r in records})]:
        rows = [r for r in records if r.value == value]
        clean = [r for r in rows if _unflagged(r)]
        z2_values = sorted({r.z2 for r in clean})
        chern_values = sorted({r.chern for r in clean})
        audits = [r.degeneracy_audit for r in rows if r.degeneracy_audit is not None]
        per_value.append({
            'value': value,
            'records': len(rows),
            'flagged': len(rows) - len(clean),
            'min_gap': min(r.gap for r in rows),
            'min_open_gap': min(r.open_gap for r in rows),
            'z2_consensus': z2_values[0] if len(z2_values) == 1 else None,
            'chern_consensus': chern_values[0] if len(chern_values) == 1 else None,
            'mean_trace_A3': float(np.mean([r.trace_A3 for r in clean])) if clean else None,
            'max_residual': max(r.residual for r in clean) if clean else None,
            'ambiguous': sum(r.ambiguous_window for r in clean),
            'audits_passed': sum(audits),
            'audits_run': len(audits),
        })
    summary = {
        'per_value': per_value,
        'flips': [asdict(flip) for flip in find_flips(records)],
        'no_flip_without_closure': no_flip_without_closure(records),
    }
    if cfg is not None:
        summary['parameter'] = cfg.parameter
        summary['gap_threshold'] = cfg.gap_threshold
    return summary


@dataclass
class ContinuityRow:
    scale: float
    perturbation_norm: Optional[float] = None
    projection_drift: Optional[float] = None
    operator_drift: Optional[float] = None
    eigenvalue_drift: Optional[float] = None
    gap_closed: bool = False


def _eigenvalues_of_A(ops) -> np.ndarray:
    return linalg.eigvalsh((ops.A + ops.A.conj().T) / 2)


def continuity_study(
    h: Hamiltonian,
    dh_direction: Hamiltonian,
    scales: Sequence[float],
    e_f: float = 0.0,
    a: Optional[DualPoint] = None,
) -> List[ContinuityRow]:
    """
    Per scale s: ||s dH||_2, ||P' - P||_2, ||A' - A||_2 and the largest
    shift between sorted eigenvalues of A' and A.

    Scales are visited in increasing order; once the gap closes the row is
    flagged and larger scales are skipped.
    """
    if not h.spec.is_open:
        raise DomainError("Continuity study tracks A and needs an open box")
    a = a or DualPoint.center(h.spec)
    flux = flux_unitary(h.spec, a)
    reference = build_pair_ops(fermi_projection(diagonalize(h), e_f), flux)
    reference_eigenvalues = _eigenvalues_of_A(reference)

    rows = []
    for scale in sorted(float(s) for s in scales):
        dh = dh_direction.scaled(scale)
        d = diagonalize(h + dh)
        if not spectral_gap(d, e_f).is_open:
            logger.info(f"✗ Gap closed at scale {scale}; skipping larger scales")
            rows.append(ContinuityRow(scale, gap_closed=True))
            break
        perturbed = build_pair_ops(fermi_projection(d, e_f), flux)
        drift_A = perturbed.A - reference.A
        eigenvalues = _eigenvalues_of_A(perturbed)
        rows.append(ContinuityRow(
            scale=scale,
            perturbation_norm=operator_norm(dh.matrix),
            projection_drift=operator_norm(perturbed.projection.matrix - reference.projection.matrix),
            operator_drift=operator_norm((drift_A + drift_A.conj().T) / 2),
            eigenvalue_drift=float(np.max(np.abs(eigenvalues - reference_eigenvalues))),
        ))
    return rows


@dataclass(frozen=True)
class FiniteSizeRow:
    size: int
    chern: int
    trace_A3: float
    residual: float
    z2: int
    n_plus: int
    n_minus: int


def finite_size_study(
    params: HaldaneParams,
    sizes: Sequence[int],
    chirality: Chirality = Chirality.PLUS,
    e_f: float = 0.0,
    delta: float = DEFAULT_DELTA,
) -> List[FiniteSizeRow]:
    """Index of the single Haldane block on open L x L boxes, flux at the centre."""
    rows = []
    for size in sizes:
        spec = LatticeSpec.square(size, Boundary.OPEN, spins=1)
        p = fermi_projection(diagonalize(build_haldane(params, spec, chirality)), e_f)
        report = index_at(p, DualPoint.center(spec), delta)
        rows.append(FiniteSizeRow(
            size=size,
            chern=report.chern,
            trace_A3=report.trace_A3,
            residual=report.residual,
            z2=report.z2,
            n_plus=report.n_plus,
            n_minus=report.n_minus,
        ))
        logger.info(f"L={size}: Tr A^3={report.trace_A3:.6f}, residual {report.residual:.3e}")
    return rows


def window_study(ops, deltas: Sequence[float] = (0.3, 0.5, 0.7)) -> List[IndexReport]:
    """index_report of one operator pair across several delta windows."""
    return [index_report(ops, delta) for delta in deltas]
