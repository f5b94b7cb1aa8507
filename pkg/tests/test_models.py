"""
Tests for data models.

"Models are just promises about shape. Check they keep them." — schema.cx
"""

import numpy as np
import pytest

from countate.models import (
    AteEstimate,
    Chain,
    Dataset,
    ModelSpec,
    Overdispersion,
    ParameterState,
    ZeroPolicy,
)


class TestDataset:
    """Tests for the Dataset value object."""

    def test_properties(self) -> None:
        """Test counts and dimensions."""
        ds = Dataset(X=[[1, 0.5], [1, -0.5], [1, 2.0]], W=[0, 1, 1], Y_obs=[3, 5, 7])

        assert ds.N == 3
        assert ds.k == 1
        assert ds.dim == 4
        assert ds.n_treated == 2
        assert ds.n_control == 1
        assert ds.has_truth is False
        assert ds.covariate_names == ("x1",)

    def test_arrays_are_read_only(self, tiny_dataset: Dataset) -> None:
        """Test that stored arrays cannot be mutated."""
        with pytest.raises(ValueError):
            tiny_dataset.Y_obs[0] = 100

    def test_input_is_copied(self) -> None:
        """Test that later changes to the caller's array do not leak in."""
        y = np.array([3, 5])
        ds = Dataset(X=[[1.0], [1.0]], W=[0, 1], Y_obs=y)
        y[0] = 99
        assert ds.Y_obs[0] == 3

    def test_has_truth(self) -> None:
        """Test that both potential outcomes are needed for truth."""
        ds = Dataset(X=[[1.0], [1.0]], W=[0, 1], Y_obs=[3, 5], Y0=[3, 4], Y1=[6, 5])
        assert ds.has_truth is True
        partial = Dataset(X=[[1.0], [1.0]], W=[0, 1], Y_obs=[3, 5], Y0=[3, 4])
        assert partial.has_truth is False

    def test_subset(self) -> None:
        """Test selecting units by mask."""
        ds = Dataset(X=[[1, 0.1], [1, 0.2], [1, 0.3]], W=[0, 1, 0], Y_obs=[1, 2, 3], Y0=[1, 9, 3], Y1=[4, 2, 6])
        sub = ds.subset(np.array([True, False, True]))

        assert sub.N == 2
        np.testing.assert_array_equal(sub.Y_obs, [1, 3])
        np.testing.assert_array_equal(sub.Y1, [4, 6])
        assert sub.covariate_names == ds.covariate_names


class TestModelSpec:
    """Tests for ModelSpec."""

    def test_defaults(self) -> None:
        """Test the default Poisson specification."""
        spec = ModelSpec()
        assert spec.overdispersion is Overdispersion.POISSON
        assert spec.overdispersed is False
        assert spec.zero_policy is ZeroPolicy.DROP_ROW

    def test_to_dict(self) -> None:
        """Test dictionary conversion uses enum values."""
        spec = ModelSpec(sigma_beta_sq=4.0, overdispersion=Overdispersion.LOGNORMAL_POISSON, ig_c=(3.0, 2.0))
        data = spec.to_dict()

        assert data["overdispersion"] == "lognormal-poisson"
        assert data["ig_c"] == [3.0, 2.0]
        assert data["zero_policy"] == "drop-row"


class TestParameterState:
    """Tests for ParameterState."""

    def test_initial_has_unit_eps(self) -> None:
        """Test that the initial state pins ε to one."""
        state = ParameterState.initial(np.zeros(4), 3)
        np.testing.assert_array_equal(state.eps_c, np.ones(3))
        np.testing.assert_array_equal(state.log_eps_t, np.zeros(3))
        assert state.sigma_c_sq is None

    def test_with_beta(self) -> None:
        """Test replacing the coefficients only."""
        state = ParameterState(np.zeros(2), np.full(2, 2.0), np.ones(2), 0.5, 0.7)
        new = state.with_beta(np.array([1.0, 2.0]))

        np.testing.assert_array_equal(new.beta, [1.0, 2.0])
        np.testing.assert_array_equal(new.eps_c, [2.0, 2.0])
        assert new.sigma_t_sq == 0.7


class TestAteEstimate:
    """Tests for AteEstimate."""

    def test_to_dict(self) -> None:
        """Test the summary dictionary."""
        est = AteEstimate(per_rep=np.array([1.0, 2.0, 3.0]), mean=2.0, variance=1.0, interval_low=1.05, interval_high=2.95)
        data = est.to_dict()

        assert data["ate_mean"] == 2.0
        assert data["ate_sd"] == 1.0
        assert data["R"] == 3
        assert "per_rep" not in data


class TestChain:
    """Tests for Chain storage."""

    def test_poisson_draw_has_unit_eps(self) -> None:
        """Test that a Poisson chain reconstructs ε ≡ 1."""
        chain = Chain(beta=np.arange(8.0).reshape(2, 4), n_units=3)
        state = chain.draw(1)

        np.testing.assert_array_equal(state.beta, [4.0, 5.0, 6.0, 7.0])
        np.testing.assert_array_equal(state.eps_t, np.ones(3))
        assert len(chain) == 2

    def test_to_frame(self) -> None:
        """Test the draws table layout."""
        chain = Chain(
            beta=np.zeros((3, 2)),
            n_units=1,
            sigma_c_sq=np.array([0.1, 0.2, 0.3]),
            sigma_t_sq=np.array([0.4, 0.5, 0.6]),
        )
        frame = chain.to_frame()

        assert list(frame.columns) == ["chain", "draw", "beta_0", "beta_1", "sigma_c_sq", "sigma_t_sq"]
        assert frame["draw"].tolist() == [0, 1, 2]
        assert frame["sigma_t_sq"].tolist() == [0.4, 0.5, 0.6]

    def test_to_frame_poisson_variances_empty(self) -> None:
        """Test that Poisson chains leave the variance columns empty."""
        frame = Chain(beta=np.zeros((2, 2)), n_units=1).to_frame()
        assert frame["sigma_c_sq"].isna().all()

    def test_concatenate(self) -> None:
        """Test stacking chains in order with chain tags and per-chain draw counters."""
        a = Chain(beta=np.zeros((2, 2)), n_units=1)
        b = Chain(beta=np.ones((3, 2)), n_units=1)
        both = Chain.concatenate([a, b])

        assert len(both) == 5
        assert both.chain_index is not None
        assert both.chain_index.tolist() == [0, 0, 1, 1, 1]
        assert both.to_frame()["draw"].tolist() == [0, 1, 0, 1, 2]

    def test_concatenate_empty(self) -> None:
        """Test that nothing cannot be concatenated."""
        with pytest.raises(ValueError):
            Chain.concatenate([])
