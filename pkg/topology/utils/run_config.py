"""
Run configuration: built-in defaults, then a JSON config file, then
command-line flags. The merged document is validated by RunConfigForm.
"""

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from django import forms
from django.conf import settings

from topology.utils.errors import ConfigError
from topology.utils.experiment import DEFAULT_GAP_THRESHOLD, SWEEP_PARAMETERS, SweepConfig
from topology.utils.lattice import Boundary, LatticeSpec
from topology.utils.model import Chirality, HaldaneParams, KaneMeleParams
from topology.utils.ncindex import DEFAULT_DELTA, RESIDUAL_GATE

logger = logging.getLogger(__name__)

COMMAND_CHOICES = [
    ('chern', 'Chern number cross-check'),
    ('z2', 'Z2 index of the Kane-Mele box'),
    ('spectrum', 'Spectrum and A-eigenvalues'),
    ('sweep', 'Robustness sweep'),
    ('connes_check', 'Connes area formula'),
    ('kspace', 'Momentum-space Chern number and gauge patches'),
    ('ebz_z2', 'Z2 over the effective Brillouin zone'),
]

MODEL_CHOICES = [
    ('haldane', 'Haldane'),
    ('kane_mele', 'Kane-Mele'),
]

BOUNDARY_CHOICES = [(b.value, b.value.title()) for b in Boundary]
CHIRALITY_CHOICES = [(c.value, c.value.title()) for c in Chirality]
SPIN_CHOICES = [(1, 'Spinless'), (2, 'Spin 1/2')]
SWEEP_PARAMETER_CHOICES = [(name, name) for name in SWEEP_PARAMETERS]


class RunConfigForm(forms.Form):
    """Schema of a run configuration document."""

    command = forms.ChoiceField(choices=COMMAND_CHOICES)
    model = forms.ChoiceField(choices=MODEL_CHOICES)

    # Model parameters
    t = forms.FloatField()
    t_prime = forms.FloatField()
    lambda_v = forms.FloatField()
    lambda_R = forms.FloatField()
    disorder_W = forms.FloatField(min_value=0)
    seed = forms.IntegerField(min_value=0)

    # Lattice
    size = forms.IntegerField(min_value=2)
    boundary = forms.ChoiceField(choices=BOUNDARY_CHOICES)
    chirality = forms.ChoiceField(choices=CHIRALITY_CHOICES)
    spins = forms.TypedChoiceField(choices=SPIN_CHOICES, coerce=int)

    # Numerical policy
    e_f = forms.FloatField()
    delta = forms.FloatField()
    residual_gate = forms.FloatField(min_value=0)
    tolerance = forms.FloatField(min_value=0, help_text='Eigenvalue clustering and pairing tolerance')
    grid_N = forms.IntegerField(min_value=6)
    radius = forms.IntegerField(min_value=1, help_text='Truncation radius of the Connes area sum')
    region_size = forms.IntegerField(min_value=1, help_text='Side of the local Chern marker region')

    # Sweeps
    sweep_parameter = forms.ChoiceField(choices=SWEEP_PARAMETER_CHOICES)
    sweep_values = forms.JSONField(required=False)
    realizations = forms.IntegerField(min_value=1)
    gap_threshold = forms.FloatField(min_value=0)
    audit_fraction = forms.FloatField(min_value=0, max_value=1)
    threads = forms.IntegerField(min_value=1)

    # Output
    out = forms.CharField()

    def clean_delta(self):
        delta = self.cleaned_data['delta']
        if not 0 < delta < 1:
            raise forms.ValidationError(f"delta must lie strictly inside (0, 1), got {delta}")
        return delta

    def clean_sweep_values(self):
        values = self.cleaned_data.get('sweep_values')
        if values is None:
            return None
        if not isinstance(values, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
        ):
            raise forms.ValidationError("sweep_values must be a list of numbers")
        return [float(v) for v in values]


def default_values() -> Dict[str, Any]:
    """Built-in defaults; the threads and out defaults come from settings."""
    return {
        'command': 'chern',
        'model': 'haldane',
        't': 1.0,
        't_prime': 0.1,
        'lambda_v': 0.0,
        'lambda_R': 0.0,
        'disorder_W': 0.0,
        'seed': 0,
        'size': 16,
        'boundary': Boundary.OPEN.value,
        'chirality': Chirality.PLUS.value,
        'spins': 1,
        'e_f': 0.0,
        'delta': DEFAULT_DELTA,
        'residual_gate': RESIDUAL_GATE,
        'tolerance': 1e-6,
        'grid_N': 24,
        'radius': 256,
        'region_size': 8,
        'sweep_parameter': 'disorder_W',
        'sweep_values': None,
        'realizations': 1,
        'gap_threshold': DEFAULT_GAP_THRESHOLD,
        'audit_fraction': 0.0,
        'threads': settings.TOPOLOGY_THREADS,
        'out': str(settings.TOPOLOGY_OUTPUT_DIR),
    }


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: str
    t: float
    t_prime: float
    lambda_v: float
    lambda_R: float
    disorder_W: float
    seed: int
    size: int
    boundary: str
    chirality: str
    spins: int
    e_f: float
    delta: float
    residual_gate: float
    tolerance: float
    grid_N: int
    radius: int
    region_size: int
    sweep_parameter: str
    sweep_values: Optional[Tuple[float, ...]]
    realizations: int
    gap_threshold: float
    audit_fraction: float
    threads: int
    out: str

    @property
    def output_dir(self) -> Path:
        return Path(self.out)

    @property
    def chirality_enum(self) -> Chirality:
        return Chirality(self.chirality)

    def haldane_params(self) -> HaldaneParams:
        return HaldaneParams(t=self.t, t_prime=self.t_prime, lambda_v=self.lambda_v)

    def kane_mele_params(self) -> KaneMeleParams:
        return KaneMeleParams(
            haldane=self.haldane_params(),
            lambda_R=self.lambda_R,
            disorder_W=self.disorder_W,
            seed=self.seed,
        )

    def lattice_spec(self, spins: Optional[int] = None, boundary: Optional[Boundary] = None) -> LatticeSpec:
        return LatticeSpec.square(
            self.size,
            boundary or Boundary(self.boundary),
            spins=spins or self.spins,
        )

    def sweep_config(self) -> SweepConfig:
        if not self.sweep_values:
            raise ConfigError("sweep requires sweep_values")
        return SweepConfig(
            base=self.kane_mele_params(),
            parameter=self.sweep_parameter,
            values=self.sweep_values,
            spec=self.lattice_spec(spins=2, boundary=Boundary.OPEN),
            realizations=self.realizations,
            base_seed=self.seed,
            e_f=self.e_f,
            delta=self.delta,
            gap_threshold=self.gap_threshold,
            audit_fraction=self.audit_fraction,
            threads=self.threads,
        )

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        if self.sweep_values is not None:
            data['sweep_values'] = list(self.sweep_values)
        return data


def read_config_file(path) -> Dict[str, Any]:
    path = Path(path)
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    return data


def validate_run_config(data: Dict[str, Any]) -> RunConfig:
    """Validate a merged document; unknown keys and null values are rejected."""
    form = RunConfigForm(data=data)
    unknown = sorted(set(data) - set(form.fields))
    if unknown:
        raise ConfigError(f"Unknown config key(s): {', '.join(unknown)}")
    if not form.is_valid():
        problems = '; '.join(
            f"{name}: {' '.join(str(m) for m in messages)}" for name, messages in form.errors.items()
        )
        raise ConfigError(f"Invalid config: {problems}")

    cleaned = dict(form.cleaned_data)
    if cleaned['sweep_values'] is not None:
        cleaned['sweep_values'] = tuple(cleaned['sweep_values'])
    return RunConfig(**cleaned)


def load_run_config(
    path=None,
    overrides: Optional[Dict[str, Any]] = None,
    command_defaults: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """
    Resolve a run configuration.

    Args:
        path: optional JSON config file
        overrides: command-line values; None entries are ignored
        command_defaults: per-command defaults layered over the built-ins

    Returns:
        RunConfig
    """
    data = default_values()
    data.update(command_defaults or {})
    if path:
        data.update(read_config_file(path))
        logger.debug(f"Loaded config file {path}")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return validate_run_config(data)
