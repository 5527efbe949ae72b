import numpy as np
import pytest
import yaml

from src.core.rng import make_rng
from src.datamodel.models import Dataset


@pytest.fixture
def rng():
    """Seeded generator shared by a single test."""
    return make_rng(20240601)


@pytest.fixture
def orthonormal_design(rng):
    """n=30, p=6 design with orthonormal columns (X'X = I)."""
    Q, _ = np.linalg.qr(rng.standard_normal((30, 6)))
    return Q


@pytest.fixture
def sparse_dataset(rng):
    """Exactly sparse data: n=200, p=20, three signals on columns 0, 3, 7, sigma=0.1."""
    n, p = 200, 20
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[[0, 3, 7]] = [2.0, -1.5, 1.0]
    Y = X @ beta + 0.1 * rng.standard_normal(n)
    return Dataset(Y=Y, X=X), beta


@pytest.fixture
def write_config(tmp_path):
    """Write a mapping as YAML and return its path."""
    def _write(payload, name="experiments.yaml"):
        path = tmp_path / name
        path.write_text(yaml.dump(payload))
        return str(path)
    return _write


@pytest.fixture
def small_experiment():
    """Cheap experiment mapping: n=40, p=12, type I, two repetitions."""
    return {
        "id": "small",
        "n": 40,
        "p": 12,
        "beta_type": "I",
        "rho_corr": 0.1,
        "target_r2": 0.9,
        "reps": 2,
        "seed": 7,
        "holdout_n": 50,
    }
