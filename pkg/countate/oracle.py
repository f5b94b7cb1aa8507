"""
Exact-likelihood Metropolis-within-Gibbs sampler.

Targets the Poisson (or lognormal-Poisson) posterior with no normal
approximation, so it serves as ground truth for the fast sampler on small
problems and as the slow baseline in benchmarks.

    β     joint random walk, preconditioned by the Gaussian-approximation covariance
    log ε per-unit random walk on the observed arm, exact prior draw on the other
    σ²    exact inverse-Gamma draw shared with the Gibbs sampler
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, replace
from typing import Any

import numpy as np
from scipy import special

from .beta_posterior import GaussianPosterior, effective_rows, fit_beta_posterior
from .design import linear_predictors
from .gibbs import ProgressCallback, hyper_conditional
from .linalg import sample_from_precision
from .models import Chain, Dataset, FloatArray, ModelSpec, ParameterState, ZeroPolicy
from .random_streams import RngStream
from .validation import (
    NumericalError,
    ValidationError,
    validate_dataset,
    validate_model_spec,
    validate_positive,
)

logger = logging.getLogger(__name__)

TARGET_ACCEPT_BETA = 0.234
TARGET_ACCEPT_EPS = 0.44
ADAPT_DECAY = 0.6
LOG_RATE_LIMIT = 700.0


@dataclass(frozen=True)
class OracleConfig:
    """
    Schedule and proposal scales of the exact sampler.

    ``proposal_sd_beta`` multiplies the preconditioning covariance;
    ``proposal_sd_logeps`` is the log-ε step for a unit with no counts and shrinks
    as 1/√(y+1). Both are tuned during burn-in when ``adapt`` is set and frozen
    afterwards.
    """

    iterations: int
    burn_in: int = 0
    seed: int = 0
    thin: int = 1
    proposal_sd_beta: float = 1.0
    proposal_sd_logeps: float = 1.0
    adapt: bool = True
    use_likelihood: bool = True

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValidationError(f"iterations must be positive, got {self.iterations}")
        if not 0 <= self.burn_in < self.iterations:
            raise ValidationError(
                f"burn_in must be in [0, iterations), got {self.burn_in} for {self.iterations} iterations"
            )
        if self.thin < 1:
            raise ValidationError(f"thin must be positive, got {self.thin}")
        validate_positive(self.proposal_sd_beta, "proposal_sd_beta")
        validate_positive(self.proposal_sd_logeps, "proposal_sd_logeps")

    @property
    def retained(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thin))

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        return asdict(self)


def poisson_log_likelihood(dataset: Dataset, state: ParameterState) -> float:
    """Σ_i [Y_i ξ_obs_i − exp(ξ_obs_i) − log Γ(Y_i + 1)]."""
    xi_obs, _ = linear_predictors(dataset, state)
    y = dataset.Y_obs.astype(np.float64)
    return float(np.sum(y * xi_obs - np.exp(xi_obs) - special.gammaln(y + 1.0)))


def beta_score(dataset: Dataset, state: ParameterState) -> FloatArray:
    """Gradient of the Poisson log-likelihood in β: Σ (Y_i − e^{ξ_i}) x_obs_i."""
    xi_obs, _ = linear_predictors(dataset, state)
    w = dataset.W.astype(np.float64)[:, None]
    resid = (dataset.Y_obs - np.exp(xi_obs))[:, None]
    return np.concatenate(
        [np.sum(resid * (1.0 - w) * dataset.X, axis=0), np.sum(resid * w * dataset.X, axis=0)]
    )


def _log_inverse_gamma(x: float, alpha: float, nu: float) -> float:
    return alpha * math.log(nu) - float(special.gammaln(alpha)) - (alpha + 1.0) * math.log(x) - nu / x


def _log_lognormal(eps: FloatArray, sigma_sq: float) -> float:
    log_eps = np.log(eps)
    n = eps.shape[0]
    return float(
        -np.sum(log_eps) - 0.5 * n * math.log(2.0 * math.pi * sigma_sq) - 0.5 * (log_eps @ log_eps) / sigma_sq
    )


def log_posterior(
    dataset: Dataset, spec: ModelSpec, state: ParameterState, use_likelihood: bool = True
) -> float:
    """
    Unnormalized exact log posterior of ``state``.

    Poisson likelihood plus the Gaussian β prior; for the lognormal-Poisson
    family also the lognormal ε priors and the inverse-Gamma hyperpriors.

    Raises:
        ValidationError: non-finite or out-of-support state
    """
    if not np.all(np.isfinite(state.beta)):
        raise ValidationError("Non-finite β in state")
    if np.any(state.eps_c <= 0) or np.any(state.eps_t <= 0):
        raise ValidationError("ε must be strictly positive")

    d = state.beta.shape[0]
    total = -0.5 * float(state.beta @ state.beta) / spec.sigma_beta_sq
    total -= 0.5 * d * math.log(2.0 * math.pi * spec.sigma_beta_sq)
    if use_likelihood:
        total += poisson_log_likelihood(dataset, state)
    if spec.overdispersed:
        sig_c, sig_t = state.sigma_c_sq, state.sigma_t_sq
        if sig_c is None or sig_t is None or not (sig_c > 0 and sig_t > 0):
            raise ValidationError("Both arm variances must be positive for the lognormal-poisson model")
        total += _log_lognormal(state.eps_c, sig_c) + _log_lognormal(state.eps_t, sig_t)
        total += _log_inverse_gamma(sig_c, *spec.ig_c) + _log_inverse_gamma(sig_t, *spec.ig_t)
    return total


def batch_means_mcse(samples: FloatArray) -> Any:
    """
    Monte Carlo standard error of the mean by batch means.

    Uses ⌈√R⌉ equal batches (a trailing remainder is dropped). Works column-wise
    on an (R, p) array.
    """
    arr = np.asarray(samples, dtype=np.float64)
    R = arr.shape[0]
    if R < 4:
        raise ValidationError(f"Batch means needs at least 4 samples, got {R}")
    n_batches = math.ceil(math.sqrt(R))
    size = R // n_batches
    batched = arr[: n_batches * size].reshape((n_batches, size) + arr.shape[1:])
    means = batched.mean(axis=1)
    mcse = means.std(axis=0, ddof=1) / math.sqrt(n_batches)
    return float(mcse) if np.ndim(mcse) == 0 else mcse


def _preconditioner(dataset: Dataset, spec: ModelSpec, use_likelihood: bool) -> GaussianPosterior:
    if not use_likelihood:
        return GaussianPosterior.prior(dataset.dim, spec.sigma_beta_sq)
    start = ParameterState.initial(np.zeros(dataset.dim), dataset.N)
    spec = replace(spec, zero_policy=ZeroPolicy.DROP_ROW)
    return fit_beta_posterior(dataset, start, spec, effective_rows(dataset, ZeroPolicy.DROP_ROW))


def run_oracle(
    dataset: Dataset,
    spec: ModelSpec,
    config: OracleConfig,
    stream: RngStream | None = None,
    progress: ProgressCallback | None = None,
) -> Chain:
    """
    Sample the exact posterior and return a Chain in the Gibbs sampler's format.

    Acceptance rates over the retained phase are stored on the chain.

    Raises:
        NumericalError: a proposal was never accepted after burn-in
    """
    validate_dataset(dataset)
    validate_model_spec(spec)
    stream = stream or RngStream(config.seed).split(0)
    rng = stream.generator

    n, p, d = dataset.N, dataset.X.shape[1], dataset.dim
    X = dataset.X
    treated = dataset.W == 1
    y = dataset.Y_obs.astype(np.float64)
    lik = 1.0 if config.use_likelihood else 0.0
    overdispersed = spec.overdispersed

    precond = _preconditioner(dataset, spec, config.use_likelihood)
    beta = precond.mu.copy()
    eta_c = np.zeros(n)
    eta_t = np.zeros(n)
    sig_c = spec.ig_c[1] / (spec.ig_c[0] + 1.0)
    sig_t = spec.ig_t[1] / (spec.ig_t[0] + 1.0)

    def base_predictor(b: FloatArray) -> FloatArray:
        return np.where(treated, X @ b[p:], X @ b[:p])

    def beta_loglik(b: FloatArray, eta_obs: FloatArray) -> float:
        prior = -0.5 * float(b @ b) / spec.sigma_beta_sq
        if not lik:
            return prior
        xi = base_predictor(b) + eta_obs
        if np.any(np.abs(xi) > LOG_RATE_LIMIT):
            return -math.inf
        return float(np.sum(y * xi - np.exp(xi))) + prior

    log_scale_b = math.log(config.proposal_sd_beta)
    log_scale_e = math.log(config.proposal_sd_logeps)
    unit_step = 1.0 / np.sqrt(y + 1.0)

    n_keep = config.retained
    betas = np.empty((n_keep, d))
    if overdispersed:
        eps_c_draws = np.empty((n_keep, n))
        eps_t_draws = np.empty((n_keep, n))
        sig_c_draws = np.empty(n_keep)
        sig_t_draws = np.empty(n_keep)
    accepted_b = 0
    accepted_e = 0
    kept = 0

    eta_obs = np.where(treated, eta_t, eta_c)
    current = beta_loglik(beta, eta_obs)
    if not math.isfinite(current):
        raise NumericalError("Exact sampler starting point has a non-finite rate")

    for t in range(config.iterations):
        proposal = sample_from_precision(precond.chol, beta, math.exp(log_scale_b) * rng.standard_normal(d))
        candidate = beta_loglik(proposal, eta_obs)
        acc_b = bool(rng.exponential() > current - candidate)
        if acc_b:
            beta, current = proposal, candidate

        acc_e_rate = 0.0
        if overdispersed:
            base = base_predictor(beta)
            sig_obs = np.where(treated, sig_t, sig_c)
            step = math.exp(log_scale_e) * unit_step
            prop = eta_obs + step * rng.standard_normal(n)
            log_ratio = -0.5 * (prop**2 - eta_obs**2) / sig_obs
            if lik:
                xi_new = base + prop
                with np.errstate(over="ignore"):
                    log_ratio += y * (prop - eta_obs) - (np.exp(xi_new) - np.exp(base + eta_obs))
                log_ratio = np.where(np.abs(xi_new) > LOG_RATE_LIMIT, -np.inf, log_ratio)
            accept = np.log(rng.random(n)) < log_ratio
            eta_obs = np.where(accept, prop, eta_obs)
            acc_e_rate = float(accept.mean())

            eta_mis = np.where(treated, math.sqrt(sig_c), math.sqrt(sig_t)) * rng.standard_normal(n)
            eta_c = np.where(treated, eta_mis, eta_obs)
            eta_t = np.where(treated, eta_obs, eta_mis)
            sig_c, sig_t = hyper_conditional(np.exp(eta_c), np.exp(eta_t), spec, rng)
            current = beta_loglik(beta, eta_obs)

        if t < config.burn_in:
            if config.adapt:
                gain = (t + 1.0) ** -ADAPT_DECAY
                log_scale_b += gain * (float(acc_b) - TARGET_ACCEPT_BETA)
                if overdispersed:
                    log_scale_e += gain * (acc_e_rate - TARGET_ACCEPT_EPS)
        else:
            accepted_b += int(acc_b)
            accepted_e += int(round(acc_e_rate * n))
            if (t - config.burn_in) % config.thin == 0:
                betas[kept] = beta
                if overdispersed:
                    eps_c_draws[kept] = np.exp(eta_c)
                    eps_t_draws[kept] = np.exp(eta_t)
                    sig_c_draws[kept] = sig_c
                    sig_t_draws[kept] = sig_t
                kept += 1
        if progress is not None and (t + 1) % 1000 == 0:
            progress(t + 1)

    n_post = config.iterations - config.burn_in
    rate_b = accepted_b / n_post
    rate_e = accepted_e / (n_post * n) if overdispersed else None
    if accepted_b == 0:
        raise NumericalError(
            f"No β proposal accepted after burn-in (scale {math.exp(log_scale_b):.3g})"
        )
    if overdispersed and accepted_e == 0:
        raise NumericalError(
            f"No log-ε proposal accepted after burn-in (scale {math.exp(log_scale_e):.3g})"
        )
    logger.debug("Exact sampler acceptance: beta=%.3f eps=%s", rate_b, rate_e)

    if not overdispersed:
        return Chain(beta=betas, n_units=n, accept_beta=rate_b)
    return Chain(
        beta=betas,
        n_units=n,
        eps_c=eps_c_draws,
        eps_t=eps_t_draws,
        sigma_c_sq=sig_c_draws,
        sigma_t_sq=sig_t_draws,
        accept_beta=rate_b,
        accept_eps=rate_e,
    )
