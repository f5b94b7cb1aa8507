"""
Pytest configuration and shared fixtures.

"Fixtures are just reusable test data. DRY applies to tests too." — schema.cx
"""

from pathlib import Path

import numpy as np
import pytest

from countate.models import Dataset, ModelSpec, Overdispersion
from countate.random_streams import RngStream
from countate.synthetic import SimModel, SimSpec, generate

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(autouse=True)
def isolated_config_dir(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Keep profile files out of the real home directory."""
    config_dir = tmp_path / "countate-config"
    monkeypatch.setenv("COUNTATE_CONFIG_DIR", str(config_dir))
    monkeypatch.delenv("COUNTATE_THREADS", raising=False)
    return config_dir


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def tiny_dataset() -> Dataset:
    """Two units, intercept only."""
    return Dataset(X=[[1.0], [1.0]], W=[0, 1], Y_obs=[3, 5])


@pytest.fixture
def poisson_dataset() -> Dataset:
    """Simple-model Poisson experiment, N=200."""
    return generate(SimSpec(model=SimModel.SIMPLE, n=200, seed=11))


@pytest.fixture
def overdispersed_dataset() -> Dataset:
    """Simple-model lognormal-Poisson experiment, N=100, sigma=0.3."""
    return generate(SimSpec(model=SimModel.SIMPLE, n=100, overdispersion_sigma=0.3, seed=5))


@pytest.fixture
def poisson_spec() -> ModelSpec:
    return ModelSpec()


@pytest.fixture
def lognormal_spec() -> ModelSpec:
    return ModelSpec(overdispersion=Overdispersion.LOGNORMAL_POISSON)


@pytest.fixture
def stream() -> RngStream:
    return RngStream(20240607)


@pytest.fixture
def random_dataset() -> Dataset:
    """N=50, k=3 with moderate counts and arbitrary covariates."""
    rng = np.random.default_rng(3)
    n, k = 50, 3
    X = np.column_stack([np.ones(n), rng.normal(size=(n, k))])
    W = np.zeros(n, dtype=np.int64)
    W[rng.permutation(n)[: n // 2]] = 1
    Y = rng.poisson(20.0, size=n) + 1
    return Dataset(X=X, W=W, Y_obs=Y)
