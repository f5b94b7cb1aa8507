"""
Approximate Gaussian posterior of the stacked coefficient vector β.

Each observed count contributes a N(log y, 1/y) pseudo-observation of its linear
predictor, which turns the Poisson likelihood into a weighted least-squares
problem with weights D = diag(y):

    precision = X̃ᵀ D X̃ + I/σ_β²
    mean      = precision⁻¹ X̃ᵀ D (log y − m_obs)

Every observed-arm row has a single nonzero block, so X̃ᵀ D X̃ is block diagonal
and is accumulated one arm at a time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .design import design_matrices, design_rows, offsets
from .linalg import SpdMatrix, factorize, quad_form, sample_from_precision, solve
from .models import Dataset, FloatArray, ModelSpec, ParameterState, ZeroPolicy
from .random_streams import normal_draw
from .validation import ValidationError

logger = logging.getLogger(__name__)

EffectiveRows = tuple[np.ndarray, FloatArray]


@dataclass(frozen=True)
class GaussianPosterior:
    """N(mu, precision⁻¹) with the precision's Cholesky factor cached."""

    mu: FloatArray
    precision: FloatArray
    chol: SpdMatrix

    @property
    def dim(self) -> int:
        return int(self.mu.shape[0])

    def covariance(self) -> FloatArray:
        """Explicit Σ_β. Only for reporting and tests; samplers use the factor."""
        return solve(self.chol, np.eye(self.dim))

    @classmethod
    def prior(cls, dim: int, sigma_beta_sq: float) -> GaussianPosterior:
        """The N(0, σ_β² I) prior, i.e. the posterior with no likelihood rows."""
        precision = np.eye(dim) / sigma_beta_sq
        return cls(mu=np.zeros(dim), precision=precision, chol=factorize(precision))


def effective_rows(dataset: Dataset, policy: ZeroPolicy) -> EffectiveRows:
    """
    Rows that enter the likelihood, and the counts used for them.

    Returns:
        (mask, y): ``mask`` selects the rows kept, ``y`` holds the (possibly
        continuity-corrected) counts with zeros for excluded rows

    Raises:
        ValidationError: a zero count under ``ZeroPolicy.ERROR``
    """
    y = dataset.Y_obs.astype(np.float64)
    if policy is ZeroPolicy.CONTINUITY:
        return np.ones(dataset.N, dtype=bool), y + 0.5
    zeros = np.flatnonzero(y == 0)
    if policy is ZeroPolicy.ERROR and zeros.size:
        raise ValidationError(f"zero outcome at index {zeros[0]} (zero policy is 'error')")
    mask = y > 0
    if zeros.size:
        logger.debug("Dropping %d zero-count rows from the likelihood", zeros.size)
    return mask, np.where(mask, y, 0.0)


def fit_beta_posterior(
    dataset: Dataset,
    state: ParameterState,
    spec: ModelSpec,
    rows: EffectiveRows | None = None,
) -> GaussianPosterior:
    """
    Gaussian approximation to p(β | Y_obs, W, X, ε, ϑ).

    Args:
        dataset: Observed data
        state: Current ε (β itself is not used)
        spec: Prior scale and zero-count policy
        rows: Precomputed :func:`effective_rows`, reused across Gibbs sweeps

    Raises:
        ValidationError: zero count under the ``error`` policy
        NumericalError: the precision could not be factorized
    """
    mask, y = rows if rows is not None else effective_rows(dataset, spec.zero_policy)
    p = dataset.X.shape[1]
    d = 2 * p
    precision = np.eye(d) / spec.sigma_beta_sq
    rhs = np.zeros(d)

    m_obs, _ = offsets(dataset, state)
    log_y = np.log(y, out=np.zeros_like(y), where=mask)
    resid = log_y - m_obs

    for block, arm in ((slice(0, p), 0), (slice(p, d), 1)):
        sel = mask & (dataset.W == arm)
        if not sel.any():
            continue
        Xa = dataset.X[sel]
        ya = y[sel]
        precision[block, block] += Xa.T @ (ya[:, None] * Xa)
        rhs[block] += Xa.T @ (ya * resid[sel])

    precision = 0.5 * (precision + precision.T)
    chol = factorize(precision)
    return GaussianPosterior(mu=solve(chol, rhs), precision=precision, chol=chol)


def sample_beta(posterior: GaussianPosterior, rng: np.random.Generator) -> FloatArray:
    """One draw μ_β + L⁻ᵀ z from the posterior."""
    return sample_from_precision(posterior.chol, posterior.mu, normal_draw(rng, posterior.dim))


def mis_predictor_law(
    dataset: Dataset, state: ParameterState, posterior: GaussianPosterior, i: int
) -> tuple[float, float]:
    """
    Gaussian law of ξ_mis for unit ``i`` implied by the β posterior.

    Returns:
        (mean, variance) = (x_mis·μ_β + m_mis, x_misᵀ Σ_β x_mis)
    """
    rows = design_rows(dataset, state, i)
    mean = float(rows.x_mis @ posterior.mu) + rows.m_mis
    return mean, float(quad_form(posterior.chol, rows.x_mis))


def mis_predictor_laws(
    dataset: Dataset, state: ParameterState, posterior: GaussianPosterior
) -> tuple[FloatArray, FloatArray]:
    """Vectorised :func:`mis_predictor_law` over all units."""
    _, x_mis = design_matrices(dataset)
    _, m_mis = offsets(dataset, state)
    means = x_mis @ posterior.mu + m_mis
    variances = np.asarray(quad_form(posterior.chol, x_mis), dtype=np.float64)
    return means, variances
