"""
Tests for simulated experiments.

"The best test data is data where you already know the answer." — schema.cx
"""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from countate.models import Dataset
from countate.pipeline import load_csv
from countate.random_streams import RngStream
from countate.synthetic import (
    SimModel,
    SimSpec,
    generate,
    replicate_seeds,
    true_ate,
    write_dataset_csv,
    write_truth_csv,
)
from countate.validation import NumericalError, ValidationError, validate_dataset


class TestSimSpec:
    """Tests for SimSpec."""

    def test_coefficient_sets(self) -> None:
        """Test the simple and complex coefficient vectors."""
        beta_c, beta_t = SimSpec(model=SimModel.SIMPLE).coefficients()
        np.testing.assert_array_equal(beta_c, [3.2, 0.3])
        np.testing.assert_array_equal(beta_t, [3.7, 0.8])
        assert SimSpec(model=SimModel.COMPLEX).k == 5

    def test_custom(self) -> None:
        """Test user coefficient vectors."""
        spec = SimSpec(model=SimModel.CUSTOM, beta_c=(1.0, 0.5, 0.1), beta_t=(1.5, 0.5, 0.2))
        assert spec.k == 2
        assert spec.to_dict()["beta_t"] == [1.5, 0.5, 0.2]

    def test_invalid(self) -> None:
        """Test validation of N, sigma and custom vectors."""
        with pytest.raises(ValidationError, match="even"):
            SimSpec(n=7)
        with pytest.raises(ValidationError, match="sigma"):
            SimSpec(overdispersion_sigma=-0.1)
        with pytest.raises(ValidationError, match="both beta_c and beta_t"):
            SimSpec(model=SimModel.CUSTOM, beta_c=(1.0,))
        with pytest.raises(ValidationError, match="equal length"):
            SimSpec(model=SimModel.CUSTOM, beta_c=(1.0,), beta_t=(1.0, 2.0))

    def test_dict_round_trip(self) -> None:
        """Test to_dict/from_dict for a custom setting."""
        spec = SimSpec(model=SimModel.CUSTOM, n=40, overdispersion_sigma=0.2, seed=3, beta_c=(1.0, 0.1), beta_t=(2.0, 0.3))
        assert SimSpec.from_dict(spec.to_dict()) == spec


class TestGenerate:
    """Tests for generate."""

    def test_design(self) -> None:
        """Test the design: intercept, U[−1, 1] covariates and half treated."""
        ds = generate(SimSpec(model=SimModel.COMPLEX, n=400, seed=1))

        assert ds.X.shape == (400, 6)
        np.testing.assert_array_equal(ds.X[:, 0], np.ones(400))
        assert ds.X[:, 1:].min() >= -1.0 and ds.X[:, 1:].max() <= 1.0
        assert ds.n_treated == 200
        validate_dataset(ds)

    def test_observation_identity(self, poisson_dataset: Dataset) -> None:
        """Test that Y_obs is the potential outcome of the assigned arm."""
        assert poisson_dataset.Y0 is not None and poisson_dataset.Y1 is not None
        expected = np.where(poisson_dataset.W == 1, poisson_dataset.Y1, poisson_dataset.Y0)
        np.testing.assert_array_equal(poisson_dataset.Y_obs, expected)

    def test_deterministic(self) -> None:
        """Test that the seed fixes the dataset."""
        a = generate(SimSpec(n=50, seed=9))
        b = generate(SimSpec(n=50, seed=9))
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.Y1, b.Y1)

    def test_stream_overrides_seed(self) -> None:
        """Test that an explicit stream wins over the SimSpec seed."""
        a = generate(SimSpec(n=50, seed=9), RngStream(1, (4,)))
        b = generate(SimSpec(n=50, seed=0), RngStream(1, (4,)))
        np.testing.assert_array_equal(a.Y_obs, b.Y_obs)

    def test_poisson_means(self) -> None:
        """Test that outcomes average their exponentiated predictors."""
        ds = generate(SimSpec(n=20000, seed=2))
        assert ds.Y0 is not None
        expected = np.exp(3.2 + 0.3 * ds.X[:, 1])
        assert ds.Y0.mean() == pytest.approx(expected.mean(), rel=0.01)

    def test_overdispersion_raises_variance(self) -> None:
        """Test variance/mean above one once sigma > 0."""
        ds = generate(SimSpec(model=SimModel.CUSTOM, n=20000, overdispersion_sigma=0.5, seed=4, beta_c=(3.0,), beta_t=(3.0,)))
        assert ds.Y0 is not None
        assert ds.Y0.var() / ds.Y0.mean() > 3.0

    def test_overflow(self) -> None:
        """Test that an unrepresentable rate is reported."""
        with pytest.raises(NumericalError):
            generate(SimSpec(model=SimModel.CUSTOM, n=4, beta_c=(800.0,), beta_t=(1.0,)))


class TestTruth:
    """Tests for true_ate and output files."""

    def test_true_ate(self) -> None:
        """Test the mean of Y1 − Y0."""
        ds = Dataset(X=[[1.0], [1.0]], W=[0, 1], Y_obs=[3, 5], Y0=[3, 1], Y1=[8, 5])
        assert true_ate(ds) == pytest.approx(4.5)

    def test_no_truth(self, tiny_dataset: Dataset) -> None:
        """Test that observed-only data has no true ATE."""
        with pytest.raises(ValidationError, match="unknown"):
            true_ate(tiny_dataset)

    def test_replicate_seeds(self) -> None:
        """Test one independent stream per replication."""
        streams = replicate_seeds(5, 3)
        assert [s.path for s in streams] == [(0,), (1,), (2,)]
        with pytest.raises(ValidationError):
            replicate_seeds(5, 0)

    def test_write_files(self, tmp_path: Path) -> None:
        """Test the observed-data CSV and the truth CSV."""
        ds = generate(SimSpec(n=10, seed=1))
        data_path = write_dataset_csv(ds, tmp_path / "sim.csv")
        truth_path = write_truth_csv(ds, tmp_path / "sim.truth.csv")

        assert list(pd.read_csv(data_path).columns) == ["y", "w", "x1"]
        truth = pd.read_csv(truth_path)
        assert list(truth.columns) == ["unit", "y0", "y1"]
        assert truth["y1"].tolist() == ds.Y1.tolist()
        np.testing.assert_array_equal(load_csv(data_path).Y_obs, ds.Y_obs)

    def test_write_truth_requires_truth(self, tmp_path: Path, tiny_dataset: Dataset) -> None:
        """Test that observed-only data has no truth file."""
        with pytest.raises(ValidationError):
            write_truth_csv(tiny_dataset, tmp_path / "t.csv")
