"""Test configuration and fixtures."""

import os
import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest

from sslemle.data import SemiSupervisedSample
from sslemle.models import GaussianDesignModel
from sslemle.noise import NoiseDensity


POWER_PLANT_ENV = "SSLEMLE_DATASET_PATH"


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    temp_path = Path(tempfile.mkdtemp())
    yield temp_path
    shutil.rmtree(temp_path)


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded random stream."""
    return np.random.default_rng(20240601)


@pytest.fixture
def unit_noise() -> NoiseDensity:
    """Standard normal noise."""
    return NoiseDensity.gaussian(1.0)


def make_sample(rng, beta0, m, n, sigma=1.0, mu=0.0, alpha=2.0) -> SemiSupervisedSample:
    """Matched pairs plus independent unmatched covariates and responses from one Gaussian design."""
    model = GaussianDesignModel.isotropic(beta0, mu, 1.0, sigma, alpha)
    matched_x, matched_y = model.sample_pairs(rng, m)
    unmatched_x = model.sample_covariates(rng, n)
    _, unmatched_y = model.sample_pairs(rng, n)
    return SemiSupervisedSample(matched_x, matched_y, unmatched_x, unmatched_y)


@pytest.fixture
def gaussian_sample(rng) -> SemiSupervisedSample:
    """p=3, m=60, n=300 sample with beta0 = (1, -0.5, 2)."""
    return make_sample(rng, np.array([1.0, -0.5, 2.0]), 60, 300)


@pytest.fixture
def scalar_sample(rng) -> SemiSupervisedSample:
    """p=1, m=n=50 sample with beta0 = 1.5."""
    return make_sample(rng, np.array([1.5]), 50, 50)


@pytest.fixture
def csv_dataset(temp_dir, rng) -> Path:
    """Synthetic power-plant style CSV (AT, V, AP, RH -> PE) with 400 rows."""
    rows = 400
    x = rng.normal(size=(rows, 4)) * np.array([7.0, 12.0, 6.0, 14.0]) + np.array([20.0, 54.0, 1013.0, 73.0])
    y = 450.0 + x @ np.array([-2.0, -0.2, 0.06, -0.15]) + rng.normal(scale=4.5, size=rows)
    path = temp_dir / "plant.csv"
    lines = ["AT,V,AP,RH,PE"] + [",".join(f"{v:.6f}" for v in (*xi, yi)) for xi, yi in zip(x, y)]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def power_plant_path() -> Path:
    """User-supplied power-plant CSV; the test is skipped when it is absent."""
    value = os.environ.get(POWER_PLANT_ENV)
    if not value or not Path(value).is_file():
        pytest.skip("dataset missing")
    return Path(value)


@pytest.fixture
def sample_factory():
    """Builder for seeded Gaussian-design samples."""
    return make_sample
