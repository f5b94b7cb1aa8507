"""
Repeated imputation of the missing potential outcomes and the resulting ATE.

For every retained posterior draw r, each unit's missing count is drawn from its
Poisson predictive and the finite-population ATE is recomputed. The spread of
those R values is the posterior uncertainty of the ATE.

"You can't observe what didn't happen. You can only guess well, many times." — schema.cx
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from enum import Enum

import numpy as np

from .beta_posterior import (
    EffectiveRows,
    GaussianPosterior,
    effective_rows,
    fit_beta_posterior,
    mis_predictor_laws,
    sample_beta,
)
from .design import check_rates, linear_predictors
from .models import AteEstimate, Chain, Dataset, FloatArray, IntArray, ModelSpec, ParameterState
from .random_streams import RngStream, poisson_draws
from .validation import ValidationError

logger = logging.getLogger(__name__)

INTERVAL = (2.5, 97.5)


class BetaSource(str, Enum):
    """Where the coefficients used for the r-th imputation come from."""

    CHAIN = "chain"
    REDRAW = "redraw"
    MARGINAL = "marginal"


def impute_ymis(dataset: Dataset, state: ParameterState, rng: np.random.Generator) -> IntArray:
    """
    Draw Y_mis_i ~ Poisson(exp(ξ_mis_i)) independently for every unit.

    Raises:
        NumericalError: a missing-arm rate is not representable
    """
    _, xi_mis = linear_predictors(dataset, state)
    return poisson_draws(rng, np.exp(xi_mis))


def impute_marginal(
    dataset: Dataset,
    state: ParameterState,
    posterior: GaussianPosterior,
    rng: np.random.Generator,
) -> IntArray:
    """
    Impute with each unit's ξ_mis drawn from its own Gaussian law.

    Units do not share a β draw here, so the imputed counts are independent
    negative-binomial-like draws, matching the closed-form ATE moments.
    """
    means, variances = mis_predictor_laws(dataset, state, posterior)
    xi = means + np.sqrt(variances) * rng.standard_normal(dataset.N)
    check_rates(xi, "missing")
    return poisson_draws(rng, np.exp(xi))


def ate_of_imputation(dataset: Dataset, y_mis_hat: Sequence[int] | IntArray) -> float:
    """(1/N) Σ (2W_i − 1)(Y_obs_i − Ŷ_mis_i)."""
    y_hat = np.asarray(y_mis_hat)
    if y_hat.shape != (dataset.N,):
        raise ValidationError(
            f"Length mismatch: {y_hat.shape[0] if y_hat.ndim else 0} imputations for {dataset.N} units"
        )
    sign = 2 * dataset.W - 1
    return float(np.sum(sign * (dataset.Y_obs - y_hat)) / dataset.N)


def summarize_ate(per_rep: FloatArray, imputations: IntArray | None = None) -> AteEstimate:
    """Mean, unbiased variance and 95% equal-tailed interval of the ATE draws."""
    if per_rep.shape[0] < 2:
        raise ValidationError(f"At least 2 imputations are needed for a variance, got {per_rep.shape[0]}")
    low, high = np.percentile(per_rep, INTERVAL)
    return AteEstimate(
        per_rep=per_rep,
        mean=float(per_rep.mean()),
        variance=float(per_rep.var(ddof=1)),
        interval_low=float(low),
        interval_high=float(high),
        imputations=imputations,
    )


def _imputer(
    dataset: Dataset,
    chain: Chain,
    spec: ModelSpec,
    stream: RngStream,
    beta_source: BetaSource,
    rows: EffectiveRows | None,
) -> Callable[[int], IntArray]:
    fixed: GaussianPosterior | None = None
    if beta_source is BetaSource.MARGINAL and chain.eps_c is None:
        # ε ≡ 1: the Gaussian is the same for every draw
        fixed = fit_beta_posterior(dataset, chain.draw(0), spec, rows)

    def impute(r: int) -> IntArray:
        rng = stream.split(r).generator
        state = chain.draw(r)
        if beta_source is BetaSource.CHAIN:
            return impute_ymis(dataset, state, rng)
        posterior = fixed if fixed is not None else fit_beta_posterior(dataset, state, spec, rows)
        if beta_source is BetaSource.REDRAW:
            return impute_ymis(dataset, state.with_beta(sample_beta(posterior, rng)), rng)
        return impute_marginal(dataset, state, posterior, rng)

    return impute


def estimate_ate(
    dataset: Dataset,
    chain: Chain,
    stream: RngStream,
    spec: ModelSpec | None = None,
    beta_source: BetaSource = BetaSource.CHAIN,
    threads: int | None = None,
    keep_imputations: bool = False,
) -> AteEstimate:
    """
    Impute Y_mis once per retained draw and summarize the ATE.

    Replication ``r`` always draws from stream ``(…, r)``, so the estimate does
    not depend on ``threads``.

    Args:
        dataset: Observed data
        chain: Retained posterior draws, R = len(chain)
        stream: Parent random stream of the imputation step
        spec: Needed to refit the β posterior for ``redraw`` and ``marginal``
        beta_source: ``chain`` reuses β^(r); ``redraw`` refits the Gaussian at the
            r-th (ε, ϑ) and draws a new β; ``marginal`` draws each unit's
            predictor separately from that Gaussian
        threads: Worker threads (None lets the executor decide)
        keep_imputations: Retain the R × N matrix of imputed counts

    Raises:
        ValidationError: fewer than 2 retained draws
        NumericalError: a non-finite imputation rate
    """
    R = len(chain)
    if R < 2:
        raise ValidationError(f"At least 2 retained draws are needed for a variance, got {R}")
    if chain.n_units != dataset.N:
        raise ValidationError(f"Chain has {chain.n_units} units but the dataset has {dataset.N}")
    spec = spec or ModelSpec()
    rows = None if beta_source is BetaSource.CHAIN else effective_rows(dataset, spec.zero_policy)
    impute = _imputer(dataset, chain, spec, stream, beta_source, rows)

    per_rep = np.empty(R)
    kept = np.empty((R, dataset.N), dtype=np.int64) if keep_imputations else None

    def replicate(r: int) -> None:
        y_hat = impute(r)
        per_rep[r] = ate_of_imputation(dataset, y_hat)
        if kept is not None:
            kept[r] = y_hat

    if threads == 1:
        for r in range(R):
            replicate(r)
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            list(executor.map(replicate, range(R)))

    logger.debug("Imputed %d replications with beta source %s", R, beta_source.value)
    return summarize_ate(per_rep, kept)


def mean_absolute_error(estimates: Sequence[float], truths: Sequence[float]) -> float:
    """Average |ATE estimate − true ATE| over replications."""
    est = np.asarray(estimates, dtype=np.float64)
    tru = np.asarray(truths, dtype=np.float64)
    if est.shape != tru.shape or est.size == 0:
        raise ValidationError(f"Need matching non-empty sequences, got {est.size} and {tru.size}")
    return float(np.mean(np.abs(est - tru)))
