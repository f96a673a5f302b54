"""Pytest configuration and fixtures for testing."""

import json
import os

import pytest
from django.conf import settings

from topology.models import SweepPoint, SweepRun
from topology.utils.lattice import Boundary, LatticeSpec
from topology.utils.model import HaldaneParams, KaneMeleParams, build_haldane, build_kane_mele


# Configure Django settings for tests
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'indexlab.settings')


@pytest.fixture(scope='session')
def django_db_setup(django_db_setup):
    """Setup the test database."""
    settings.DATABASES['default'] = {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': ':memory:',
        'ATOMIC_REQUESTS': False,
    }


@pytest.fixture
def haldane_params():
    """Haldane parameters in the Chern phase (t=1, t'=0.1)."""
    return HaldaneParams(t=1.0, t_prime=0.1)


@pytest.fixture
def km_params(haldane_params):
    """Clean Kane-Mele parameters with a small Rashba coupling."""
    return KaneMeleParams(haldane=haldane_params, lambda_R=0.05)


@pytest.fixture
def spinless_box():
    """Open 12x12 spinless box."""
    return LatticeSpec.square(12, Boundary.OPEN, spins=1)


@pytest.fixture
def spinful_box():
    """Open 12x12 spin-1/2 box."""
    return LatticeSpec.square(12, Boundary.OPEN, spins=2)


@pytest.fixture
def haldane_box(haldane_params, spinless_box):
    """Single Haldane block on the open 12x12 box."""
    return build_haldane(haldane_params, spinless_box)


@pytest.fixture
def km_box(km_params, spinful_box):
    """Kane-Mele Hamiltonian on the open 12x12 box."""
    return build_kane_mele(km_params, spinful_box)


@pytest.fixture
def output_dir(tmp_path):
    """Directory for command reports."""
    return tmp_path / 'results'


@pytest.fixture
def write_config(tmp_path):
    """Factory writing a JSON run configuration and returning its path."""
    def _write(data, name='run.json'):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return str(path)
    return _write


@pytest.fixture
def sweep_run(db):
    """Create a sweep run for testing."""
    return SweepRun.objects.create(
        fingerprint='a' * 64,
        command='sweep',
        config={'sweep_parameter': 'disorder_W', 'seed': 3},
        seed=3,
        version='0.1.0',
    )


@pytest.fixture
def sweep_points(sweep_run):
    """Create stored points for two values and two realizations."""
    points = []
    for value_index, value in enumerate([0.0, 0.2]):
        for realization in range(2):
            points.append(SweepPoint.objects.create(
                run=sweep_run,
                value=value,
                value_index=value_index,
                realization=realization,
                seed=3 + realization,
                gap=0.4,
                open_gap=0.05,
                trace_A3=0.01,
                chern=0,
                z2=1,
                residual=0.01,
            ))
    return points
