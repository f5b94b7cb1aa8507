"""
Tests for splittable random streams.

"Randomness you can replay is just a very patient kind of order." — schema.cx
"""

import numpy as np
import pytest

from countate.random_streams import (
    RngStream,
    gamma_draw,
    inverse_gamma_draw,
    normal_draw,
    poisson_draw,
    poisson_draws,
)
from countate.validation import ValidationError


class TestRngStream:
    """Tests for stream addressing."""

    def test_same_address_same_sequence(self) -> None:
        """Test that two streams with one address replay each other."""
        a = RngStream(7, (1, 2)).generator.standard_normal(5)
        b = RngStream(7).split(1, 2).generator.standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_siblings_differ(self) -> None:
        """Test that sibling streams produce different sequences."""
        root = RngStream(7)
        a = root.split(0).generator.standard_normal(5)
        b = root.split(1).generator.standard_normal(5)
        assert not np.allclose(a, b)

    def test_split_order_independent(self) -> None:
        """Test that consuming one child does not move another."""
        root = RngStream(3)
        first = root.split(1).generator.random(3)
        root.split(0).generator.random(1000)
        again = root.split(1).generator.random(3)
        np.testing.assert_array_equal(first, again)

    def test_generator_is_cached(self) -> None:
        """Test that repeated access continues one sequence."""
        stream = RngStream(5)
        assert stream.generator is stream.generator

    def test_rejects_bad_seed(self) -> None:
        """Test seed and path bounds."""
        with pytest.raises(ValidationError, match="Seed"):
            RngStream(-1)
        with pytest.raises(ValidationError, match="Split indices"):
            RngStream(1, (-2,))


class TestDraws:
    """Tests for the primitive draws."""

    def test_normal_draw_shape(self) -> None:
        """Test the vector length."""
        assert normal_draw(np.random.default_rng(0), 4).shape == (4,)
        with pytest.raises(ValidationError):
            normal_draw(np.random.default_rng(0), -1)

    def test_gamma_mean(self) -> None:
        """Test that Gamma(shape, scale) averages shape·scale."""
        rng = RngStream(11).generator
        draws = [gamma_draw(rng, 3.0, 2.0) for _ in range(20000)]
        assert np.mean(draws) == pytest.approx(6.0, rel=0.03)

    def test_gamma_rejects_bad_parameters(self) -> None:
        """Test that non-positive parameters raise."""
        with pytest.raises(ValidationError, match="Gamma parameters"):
            gamma_draw(np.random.default_rng(0), 0.0, 1.0)

    def test_inverse_gamma_mean(self) -> None:
        """Test that IG(a, b) averages b/(a-1)."""
        rng = RngStream(12).generator
        draws = [inverse_gamma_draw(rng, 4.0, 3.0) for _ in range(20000)]
        assert np.mean(draws) == pytest.approx(1.0, rel=0.05)

    def test_poisson_zero_rate(self) -> None:
        """Test the point mass at zero."""
        assert poisson_draw(np.random.default_rng(0), 0.0) == 0

    def test_poisson_mean(self) -> None:
        """Test the mean of a large-rate sample."""
        rng = RngStream(13).generator
        draws = poisson_draws(rng, np.full(20000, 25.0))
        assert draws.dtype == np.int64
        assert draws.mean() == pytest.approx(25.0, rel=0.02)

    def test_poisson_rejects_bad_rate(self) -> None:
        """Test that negative or non-finite rates are rejected with an index."""
        with pytest.raises(ValidationError):
            poisson_draw(np.random.default_rng(0), -1.0)
        with pytest.raises(ValidationError, match="index 1"):
            poisson_draws(np.random.default_rng(0), np.array([1.0, np.inf]))
