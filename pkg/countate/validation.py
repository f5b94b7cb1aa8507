"""
Input validation and error types for countate.

"Trust, but verify. Especially user input." — schema.cx
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from .models import Dataset, ModelSpec


class CountateError(Exception):
    """Base class for countate errors."""

    pass


class ValidationError(CountateError):
    """Raised when data, schema or arguments are invalid."""

    pass


class NumericalError(CountateError):
    """Raised when a computation leaves the representable or convergent range."""

    pass


def validate_dataset(dataset: Dataset) -> None:
    """
    Check every Dataset invariant.

    Raises:
        ValidationError: naming the first offending index
    """
    X, W, Y = dataset.X, dataset.W, dataset.Y_obs
    n = W.shape[0]

    if X.ndim != 2:
        raise ValidationError(f"Covariate matrix must be 2-dimensional, got {X.ndim} dimensions")
    if X.shape[0] != n or Y.shape[0] != n:
        raise ValidationError(
            f"Dimension mismatch: X has {X.shape[0]} rows, W has {n} entries, "
            f"Y_obs has {Y.shape[0]} entries"
        )
    if X.shape[1] < 1:
        raise ValidationError("Missing intercept column: X has no columns")

    not_one = np.flatnonzero(X[:, 0] != 1.0)
    if not_one.size:
        raise ValidationError(f"Missing intercept column: X[{not_one[0]}, 0] != 1")

    non_finite = np.flatnonzero(~np.isfinite(X).all(axis=1))
    if non_finite.size:
        raise ValidationError(f"Non-finite covariate at index {non_finite[0]}")

    non_binary = np.flatnonzero((W != 0) & (W != 1))
    if non_binary.size:
        raise ValidationError(f"non-binary treatment at index {non_binary[0]}")

    negative = np.flatnonzero(Y < 0)
    if negative.size:
        raise ValidationError(f"negative outcome at index {negative[0]}")

    for name, arr in (("Y0", dataset.Y0), ("Y1", dataset.Y1)):
        if arr is None:
            continue
        if arr.shape[0] != n:
            raise ValidationError(f"Dimension mismatch: {name} has {arr.shape[0]} entries, expected {n}")
        bad = np.flatnonzero(arr < 0)
        if bad.size:
            raise ValidationError(f"negative outcome in {name} at index {bad[0]}")

    if dataset.has_truth:
        assert dataset.Y0 is not None and dataset.Y1 is not None
        implied = np.where(W == 1, dataset.Y1, dataset.Y0)
        mismatch = np.flatnonzero(implied != Y)
        if mismatch.size:
            raise ValidationError(
                f"Observed outcome disagrees with potential outcomes at index {mismatch[0]}"
            )


def validate_positive(value: float, name: str) -> float:
    """Return ``value`` if it is a finite, strictly positive number."""
    if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def validate_model_spec(spec: ModelSpec) -> ModelSpec:
    """Check that all prior parameters are strictly positive."""
    validate_positive(spec.sigma_beta_sq, "sigma_beta_sq")
    if spec.overdispersed:
        for label, pair in (("ig_c", spec.ig_c), ("ig_t", spec.ig_t)):
            if len(pair) != 2:
                raise ValidationError(f"{label} must be an (alpha, nu) pair")
            validate_positive(pair[0], f"{label} alpha")
            validate_positive(pair[1], f"{label} nu")
    return spec


def validate_grid(values: Sequence[float], name: str = "grid", minimum: float = 0.0) -> list[float]:
    """
    Validate a non-empty grid of finite values strictly above ``minimum``.

    Returns:
        The grid as a list of floats
    """
    grid = [float(v) for v in values]
    if not grid:
        raise ValidationError(f"{name} must contain at least one value")
    for v in grid:
        if not math.isfinite(v) or v <= minimum:
            raise ValidationError(f"Invalid {name} value {v!r}: must be finite and > {minimum}")
    return grid


def parse_float_list(text: str, name: str) -> list[float]:
    """Parse a comma-separated list of numbers such as ``"3.2,0.3"``."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValidationError(f"{name} must be a comma-separated list of numbers")
    try:
        return [float(p) for p in parts]
    except ValueError as e:
        raise ValidationError(f"Invalid number in {name}: {e}") from e


def validate_format_option(format: str, allowed: list[str] | None = None) -> str:
    """
    Validate an export format option.

    Returns:
        Lowercase format string if valid

    Raises:
        ValidationError: If format is not in allowed list
    """
    format_lower = format.lower().strip()
    allowed_values = allowed or ["json", "csv"]

    if format_lower not in allowed_values:
        allowed_str = ", ".join(f"'{f}'" for f in allowed_values)
        raise ValidationError(f"Invalid format '{format}'. Allowed formats: {allowed_str}")

    return format_lower
