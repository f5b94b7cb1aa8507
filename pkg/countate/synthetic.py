"""
Simulated completely randomized experiments with count outcomes.

Both potential outcomes are drawn for every unit, so the true finite-population
ATE of a simulated dataset is known exactly.

"The best test data is data where you already know the answer." — schema.cx
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .design import check_rates
from .models import Dataset, FloatArray
from .pipeline import write_csv
from .random_streams import RngStream
from .validation import ValidationError

logger = logging.getLogger(__name__)

SIMPLE_BETA_C = (3.2, 0.3)
SIMPLE_BETA_T = (3.7, 0.8)
COMPLEX_BETA_C = (3.2, 0.3, 0.7, 1.0, 0.4, 0.8)
COMPLEX_BETA_T = (3.7, 0.8, 0.5, 1.2, 0.6, 0.9)


class SimModel(str, Enum):
    """Coefficient set used to generate outcomes."""

    SIMPLE = "simple"
    COMPLEX = "complex"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SimSpec:
    """
    One simulation setting.

    ``overdispersion_sigma`` is the standard deviation of log ε in both arms;
    0 gives pure Poisson outcomes. Custom coefficient vectors include the
    intercept and must have equal length.
    """

    model: SimModel = SimModel.SIMPLE
    n: int = 1000
    overdispersion_sigma: float = 0.0
    seed: int = 0
    beta_c: tuple[float, ...] | None = None
    beta_t: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.n < 2 or self.n % 2:
            raise ValidationError(f"N must be a positive even number, got {self.n}")
        if not self.overdispersion_sigma >= 0:
            raise ValidationError(f"overdispersion sigma must be >= 0, got {self.overdispersion_sigma}")
        if self.model is SimModel.CUSTOM:
            if not self.beta_c or not self.beta_t:
                raise ValidationError("The custom model needs both beta_c and beta_t")
            if len(self.beta_c) != len(self.beta_t):
                raise ValidationError(
                    f"beta_c and beta_t must have equal length, got {len(self.beta_c)} and {len(self.beta_t)}"
                )

    def coefficients(self) -> tuple[FloatArray, FloatArray]:
        """(β_c, β_t) including intercepts."""
        if self.model is SimModel.SIMPLE:
            pair = (SIMPLE_BETA_C, SIMPLE_BETA_T)
        elif self.model is SimModel.COMPLEX:
            pair = (COMPLEX_BETA_C, COMPLEX_BETA_T)
        else:
            assert self.beta_c is not None and self.beta_t is not None
            pair = (self.beta_c, self.beta_t)
        return np.asarray(pair[0], dtype=np.float64), np.asarray(pair[1], dtype=np.float64)

    @property
    def k(self) -> int:
        return int(self.coefficients()[0].shape[0]) - 1

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        beta_c, beta_t = self.coefficients()
        return {
            "model": self.model.value,
            "n": self.n,
            "overdispersion_sigma": self.overdispersion_sigma,
            "seed": self.seed,
            "beta_c": beta_c.tolist(),
            "beta_t": beta_t.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SimSpec:
        """Create from dictionary."""
        model = SimModel(data.get("model", "simple"))
        custom = model is SimModel.CUSTOM
        return cls(
            model=model,
            n=int(data.get("n", 1000)),
            overdispersion_sigma=float(data.get("overdispersion_sigma", 0.0)),
            seed=int(data.get("seed", 0)),
            beta_c=tuple(data["beta_c"]) if custom else None,
            beta_t=tuple(data["beta_t"]) if custom else None,
        )


def generate(spec: SimSpec, stream: RngStream | None = None) -> Dataset:
    """
    Draw covariates, random effects, both potential outcomes and the assignment.

    Draw order is fixed (x, ε_c, ε_t, Y(0), Y(1), assignment), so a stream always
    produces the same dataset.

    Raises:
        NumericalError: the coefficients give a rate that overflows
    """
    rng = (stream or RngStream(spec.seed)).generator
    beta_c, beta_t = spec.coefficients()
    n, k = spec.n, beta_c.shape[0] - 1

    X = np.column_stack([np.ones(n), rng.uniform(-1.0, 1.0, size=(n, k))])
    sigma = spec.overdispersion_sigma
    log_eps_c = sigma * rng.standard_normal(n) if sigma > 0 else np.zeros(n)
    log_eps_t = sigma * rng.standard_normal(n) if sigma > 0 else np.zeros(n)

    xi_c = X @ beta_c + log_eps_c
    xi_t = X @ beta_t + log_eps_t
    check_rates(xi_c, "control")
    check_rates(xi_t, "treated")
    y0 = rng.poisson(np.exp(xi_c)).astype(np.int64)
    y1 = rng.poisson(np.exp(xi_t)).astype(np.int64)

    w = np.zeros(n, dtype=np.int64)
    w[rng.permutation(n)[: n // 2]] = 1
    y_obs = np.where(w == 1, y1, y0)
    logger.debug("Generated %s dataset with N=%d, k=%d", spec.model.value, n, k)
    return Dataset(X=X, W=w, Y_obs=y_obs, Y0=y0, Y1=y1)


def true_ate(dataset: Dataset) -> float:
    """(1/N) Σ (Y1_i − Y0_i) from the stored potential outcomes."""
    if not dataset.has_truth:
        raise ValidationError("Dataset has no potential outcomes; the true ATE is unknown")
    assert dataset.Y0 is not None and dataset.Y1 is not None
    return float(np.mean(dataset.Y1 - dataset.Y0))


def replicate_seeds(seed: int, replications: int) -> list[RngStream]:
    """Independent streams for ``replications`` fresh datasets from one master seed."""
    if replications < 1:
        raise ValidationError(f"replications must be positive, got {replications}")
    master = RngStream(seed)
    return [master.split(r) for r in range(replications)]


def write_dataset_csv(dataset: Dataset, path: Path) -> Path:
    """Observed data only: y, w, x1..xk."""
    return write_csv(dataset, path)


def write_truth_csv(dataset: Dataset, path: Path) -> Path:
    """Both potential outcomes, one row per unit: unit, y0, y1."""
    if not dataset.has_truth:
        raise ValidationError("Dataset has no potential outcomes to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"unit": np.arange(dataset.N), "y0": dataset.Y0, "y1": dataset.Y1}).to_csv(
        path, index=False
    )
    return path
