"""
Closed-form ATE for the pure Poisson model (ε ≡ 1).

With ξ_mis ~ N(m, v), μ_mis = exp(ξ_mis) is matched by a Gamma(γ, h) law with
γ = 1/v and h = v·e^m, and mixing the Poisson over it gives a negative-binomial
predictive for every missing count. The ATE moments then need no sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
from scipy import special

from .beta_posterior import (
    GaussianPosterior,
    fit_beta_posterior,
    mis_predictor_law,
    mis_predictor_laws,
)
from .design import check_rates
from .models import Dataset, FloatArray, ModelSpec, ParameterState
from .validation import NumericalError, ValidationError

VARIANCE_FLOOR = 1e-300


class AteVariant(str, Enum):
    """Which reading of the closed-form ATE moments to use."""

    NB = "nb"
    PAPER = "paper"


@dataclass(frozen=True)
class NbPredictive:
    """Negative-binomial predictive of one missing count, shape γ and scale h."""

    gamma: float
    h: float

    def __post_init__(self) -> None:
        if not (self.gamma > 0 and self.h > 0) or not math.isfinite(self.gamma * self.h):
            raise ValidationError(f"NB parameters must be positive, got gamma={self.gamma}, h={self.h}")

    @property
    def p(self) -> float:
        return 1.0 / (1.0 + self.h)


@dataclass(frozen=True)
class ClosedFormAte:
    """ATE moments plus the per-unit predictive parameters they came from."""

    mean: float
    variance: float
    variant: AteVariant
    gamma: FloatArray
    h: FloatArray

    @property
    def sd(self) -> float:
        """NaN when the variant produced a negative variance."""
        return math.sqrt(self.variance) if self.variance >= 0 else float("nan")

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary (per-unit arrays excluded)."""
        return {
            "ate_mean": self.mean,
            "ate_variance": self.variance,
            "ate_sd": self.sd,
            "variant": self.variant.value,
        }


def _gamma_h_from_law(mean: FloatArray, variance: FloatArray) -> tuple[FloatArray, FloatArray]:
    tiny = np.flatnonzero(variance <= VARIANCE_FLOOR)
    if tiny.size:
        raise NumericalError(f"Zero predictor variance at unit {tiny[0]}: Gamma shape is undefined")
    check_rates(mean, "missing")
    return 1.0 / variance, variance * np.exp(mean)


def gamma_h(
    dataset: Dataset, state: ParameterState, posterior: GaussianPosterior, i: int
) -> NbPredictive:
    """
    Gamma parameters of μ_mis for unit ``i``.

    Raises:
        NumericalError: the ξ_mis law has zero variance
    """
    mean, variance = mis_predictor_law(dataset, state, posterior, i)
    g, h = _gamma_h_from_law(np.array([mean]), np.array([variance]))
    return NbPredictive(gamma=float(g[0]), h=float(h[0]))


def unit_predictives(
    dataset: Dataset, state: ParameterState, posterior: GaussianPosterior
) -> tuple[FloatArray, FloatArray]:
    """(γ, h) arrays over all units."""
    means, variances = mis_predictor_laws(dataset, state, posterior)
    return _gamma_h_from_law(means, variances)


def nb_pmf(pred: NbPredictive, y: int | np.ndarray) -> Any:
    """
    P(Y = y) = C(γ+y−1, y) (1/(1+h))^γ (h/(1+h))^y.

    The binomial coefficient is evaluated through log-Γ, so γ need not be an
    integer. Accepts a scalar or an array of counts.

    Raises:
        ValidationError: a negative count
    """
    ys = np.asarray(y)
    if np.any(ys < 0):
        raise ValidationError(f"Count must be non-negative, got {y}")
    ys = ys.astype(np.float64)
    g, h = pred.gamma, pred.h
    log_pmf = (
        special.gammaln(g + ys)
        - special.gammaln(g)
        - special.gammaln(ys + 1.0)
        - g * math.log1p(h)
        - ys * math.log1p(1.0 / h)
    )
    out = np.exp(log_pmf)
    return float(out) if out.ndim == 0 else out


def nb_moments(pred: NbPredictive) -> tuple[float, float]:
    """(mean, variance) = (γh, γh(1+h))."""
    mean = pred.gamma * pred.h
    return mean, mean * (1.0 + pred.h)


def closed_form_moments(
    dataset: Dataset, gamma: FloatArray, h: FloatArray, variant: AteVariant = AteVariant.NB
) -> tuple[float, float]:
    """
    ATE mean and variance from per-unit predictive parameters.

    ``nb`` uses the negative-binomial moments of independent imputations.
    ``paper`` reproduces the alternative printed form, whose mean subtracts γ
    alone and whose variance γ(1−h)/h² turns negative once h > 1.
    """
    if gamma.shape != (dataset.N,) or h.shape != (dataset.N,):
        raise ValidationError(
            f"Expected {dataset.N} predictive parameters, got {gamma.shape[0]} and {h.shape[0]}"
        )
    sign = 2.0 * dataset.W - 1.0
    n = dataset.N
    if variant is AteVariant.NB:
        expected = gamma * h
        mean = float(np.sum(sign * (dataset.Y_obs - expected)) / n)
        variance = float(np.sum(expected * (1.0 + h)) / n**2)
    else:
        mean = float(np.sum(sign * (dataset.Y_obs - gamma)) / n)
        variance = float(np.sum(gamma * (1.0 - h) / h**2) / n**2)
    return mean, variance


def ate_closed_form(
    dataset: Dataset,
    posterior: GaussianPosterior,
    spec: ModelSpec,
    variant: AteVariant = AteVariant.NB,
) -> ClosedFormAte:
    """
    Closed-form posterior mean and variance of the ATE under the Poisson model.

    Raises:
        ValidationError: the model is overdispersed, where no closed form exists
    """
    if spec.overdispersed:
        raise ValidationError("The closed-form ATE requires the poisson model")
    state = ParameterState.initial(posterior.mu, dataset.N)
    gamma, h = unit_predictives(dataset, state, posterior)
    mean, variance = closed_form_moments(dataset, gamma, h, variant)
    return ClosedFormAte(mean=mean, variance=variance, variant=variant, gamma=gamma, h=h)


def fit_closed_form(
    dataset: Dataset, spec: ModelSpec, variant: AteVariant = AteVariant.NB
) -> ClosedFormAte:
    """Fit the β posterior at ε ≡ 1 and return the closed-form ATE."""
    if spec.overdispersed:
        raise ValidationError("The closed-form ATE requires the poisson model")
    state = ParameterState.initial(np.zeros(dataset.dim), dataset.N)
    posterior = fit_beta_posterior(dataset, state, spec)
    return ate_closed_form(dataset, posterior, spec, variant)
