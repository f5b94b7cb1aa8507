"""
Blocked Gibbs sampler over (β, ε, ϑ) for the lognormal-Poisson model.

One sweep draws β from the Gaussian approximation of beta_posterior, then every
unit's (ε^c, ε^t) from its lognormal conditional, then the two arm variances
from their inverse-Gamma conditionals. The Poisson model keeps ε ≡ 1 and runs
only the β step.

"Go around enough times and you end up where you should be." — schema.cx
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass
from typing import Any, NamedTuple

import numpy as np

from .beta_posterior import EffectiveRows, effective_rows, fit_beta_posterior, sample_beta
from .design import arm_predictors
from .models import Chain, Dataset, FloatArray, ModelSpec, ParameterState, ZeroPolicy
from .random_streams import RngStream, inverse_gamma_draw
from .validation import NumericalError, ValidationError, validate_dataset, validate_model_spec

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[int], None]


class LogNormalLaw(NamedTuple):
    """log ε ~ N(m, s_sq)."""

    m: float | FloatArray
    s_sq: float | FloatArray


class InverseGammaLaw(NamedTuple):
    """IG(shape, scale) with mean scale / (shape − 1)."""

    shape: float
    scale: float


@dataclass(frozen=True)
class GibbsConfig:
    """Iteration schedule and seed of one sampler run."""

    iterations: int
    burn_in: int = 0
    thin: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValidationError(f"iterations must be positive, got {self.iterations}")
        if not 0 <= self.burn_in < self.iterations:
            raise ValidationError(
                f"burn_in must be in [0, iterations), got {self.burn_in} for {self.iterations} iterations"
            )
        if self.thin < 1:
            raise ValidationError(f"thin must be positive, got {self.thin}")

    @property
    def retained(self) -> int:
        """Number of draws kept after burn-in and thinning."""
        return len(range(self.burn_in, self.iterations, self.thin))

    def keeps(self, t: int) -> bool:
        """Whether sweep ``t`` (0-based) is retained."""
        return t >= self.burn_in and (t - self.burn_in) % self.thin == 0

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GibbsConfig:
        """Create from dictionary."""
        return cls(
            iterations=int(data["iterations"]),
            burn_in=int(data.get("burn_in", 0)),
            thin=int(data.get("thin", 1)),
            seed=int(data.get("seed", 0)),
        )


def _observed_predictor(dataset: Dataset, beta: FloatArray) -> FloatArray:
    eta_c, eta_t = arm_predictors(dataset, beta)
    return np.where(dataset.W == 1, eta_t, eta_c)


def eps_conditionals(
    dataset: Dataset,
    beta: FloatArray,
    sigma_c_sq: float,
    sigma_t_sq: float,
    rows: EffectiveRows,
) -> tuple[LogNormalLaw, LogNormalLaw]:
    """
    Lognormal conditionals of every unit's (ε^c, ε^t), as arrays.

    Only the arm a unit was observed in carries likelihood information; the other
    arm's law is its prior N(0, σ²). Rows excluded by the zero-count policy are
    treated as carrying no information in either arm.
    """
    if not (sigma_c_sq > 0 and sigma_t_sq > 0):
        raise ValidationError(
            f"Variances must be positive, got sigma_c_sq={sigma_c_sq}, sigma_t_sq={sigma_t_sq}"
        )
    mask, y = rows
    w = dataset.W.astype(np.float64)
    fit = _observed_predictor(dataset, beta)
    log_y = np.log(y, out=np.zeros_like(y), where=mask)
    gap = np.where(mask, fit - log_y, 0.0)

    laws = []
    for selector, sigma_sq in ((1.0 - w, sigma_c_sq), (w, sigma_t_sq)):
        s_sq = 1.0 / (selector**2 * y + 1.0 / sigma_sq)
        m = -selector * y * gap * s_sq
        laws.append(LogNormalLaw(m=m, s_sq=s_sq))
    return laws[0], laws[1]


def eps_conditional(
    dataset: Dataset,
    beta: FloatArray,
    sigma_c_sq: float,
    sigma_t_sq: float,
    i: int,
    policy: ZeroPolicy = ZeroPolicy.DROP_ROW,
) -> tuple[LogNormalLaw, LogNormalLaw]:
    """
    Conditional laws of (log ε_i^c, log ε_i^t) for a single unit.

    Control arm: s² = ((1−W)²y + 1/σ_c²)⁻¹ and m = −(1−W) y (x_obs·β − log y) s²;
    the treated arm swaps (1−W) for W.
    """
    if not 0 <= i < dataset.N:
        raise ValidationError(f"Unit index {i} out of range for N={dataset.N}")
    rows = effective_rows(dataset, policy)
    law_c, law_t = eps_conditionals(dataset, beta, sigma_c_sq, sigma_t_sq, rows)
    return (
        LogNormalLaw(m=float(law_c.m[i]), s_sq=float(law_c.s_sq[i])),
        LogNormalLaw(m=float(law_t.m[i]), s_sq=float(law_t.s_sq[i])),
    )


def draw_eps(rng: np.random.Generator, law: LogNormalLaw) -> FloatArray:
    """ε = exp(m + s·z), one draw per unit."""
    m = np.asarray(law.m, dtype=np.float64)
    return np.exp(m + np.sqrt(law.s_sq) * rng.standard_normal(m.shape))


def hyper_posterior(
    eps_c: FloatArray, eps_t: FloatArray, spec: ModelSpec
) -> tuple[InverseGammaLaw, InverseGammaLaw]:
    """
    Inverse-Gamma conditionals of (σ_c², σ_t²).

    σ² ~ IG(α + N/2, ν + ½ Σ (log ε_i)²) in each arm.
    """
    laws = []
    for eps, (alpha, nu) in ((eps_c, spec.ig_c), (eps_t, spec.ig_t)):
        if np.any(eps <= 0):
            raise ValidationError("All ε entries must be strictly positive")
        log_eps = np.log(eps)
        laws.append(
            InverseGammaLaw(shape=alpha + 0.5 * eps.shape[0], scale=nu + 0.5 * float(log_eps @ log_eps))
        )
    return laws[0], laws[1]


def hyper_conditional(
    eps_c: FloatArray, eps_t: FloatArray, spec: ModelSpec, rng: np.random.Generator
) -> tuple[float, float]:
    """Draw (σ_c², σ_t²) from :func:`hyper_posterior`."""
    law_c, law_t = hyper_posterior(eps_c, eps_t, spec)
    return (
        inverse_gamma_draw(rng, law_c.shape, law_c.scale),
        inverse_gamma_draw(rng, law_t.shape, law_t.scale),
    )


def _initial_state(
    dataset: Dataset, spec: ModelSpec, rng: np.random.Generator
) -> ParameterState:
    beta = np.sqrt(spec.sigma_beta_sq) * rng.standard_normal(dataset.dim)
    if not spec.overdispersed:
        return ParameterState.initial(beta, dataset.N)
    sigma_c_sq = inverse_gamma_draw(rng, *spec.ig_c)
    sigma_t_sq = inverse_gamma_draw(rng, *spec.ig_t)
    ones = np.ones(dataset.N)
    return ParameterState(beta, ones, ones, sigma_c_sq, sigma_t_sq)


def run_chain(
    dataset: Dataset,
    spec: ModelSpec,
    config: GibbsConfig,
    stream: RngStream | None = None,
    progress: ProgressCallback | None = None,
) -> Chain:
    """
    Run one Gibbs chain and return its retained draws.

    The sweep order is β, then ε, then ϑ. Initial values: β from its prior, ε ≡ 1,
    and both variances from their hyperpriors.

    Args:
        dataset: Observed data
        spec: Model family and priors
        config: Iterations, burn-in, thinning and seed
        stream: Random stream; defaults to chain 0 of ``config.seed``
        progress: Called with the number of sweeps completed, every 100 sweeps

    Raises:
        NumericalError: a sweep failed, reported with its iteration index
    """
    validate_dataset(dataset)
    validate_model_spec(spec)
    stream = stream or RngStream(config.seed).split(0)
    rng = stream.generator
    rows = effective_rows(dataset, spec.zero_policy)

    n_keep = config.retained
    betas = np.empty((n_keep, dataset.dim))
    if spec.overdispersed:
        eps_c_draws = np.empty((n_keep, dataset.N))
        eps_t_draws = np.empty((n_keep, dataset.N))
        sig_c = np.empty(n_keep)
        sig_t = np.empty(n_keep)

    state = _initial_state(dataset, spec, rng)
    # ε ≡ 1 leaves the β conditional unchanged between sweeps
    fixed = None if spec.overdispersed else fit_beta_posterior(dataset, state, spec, rows)
    kept = 0
    for t in range(config.iterations):
        try:
            posterior = fixed if fixed is not None else fit_beta_posterior(dataset, state, spec, rows)
            beta = sample_beta(posterior, rng)
            if spec.overdispersed:
                assert state.sigma_c_sq is not None and state.sigma_t_sq is not None
                law_c, law_t = eps_conditionals(
                    dataset, beta, state.sigma_c_sq, state.sigma_t_sq, rows
                )
                eps_c = draw_eps(rng, law_c)
                eps_t = draw_eps(rng, law_t)
                sigma_c_sq, sigma_t_sq = hyper_conditional(eps_c, eps_t, spec, rng)
                state = ParameterState(beta, eps_c, eps_t, sigma_c_sq, sigma_t_sq)
            else:
                state = state.with_beta(beta)
        except NumericalError as e:
            raise NumericalError(f"Gibbs iteration {t}: {e}") from e

        if config.keeps(t):
            betas[kept] = state.beta
            if spec.overdispersed:
                eps_c_draws[kept] = state.eps_c
                eps_t_draws[kept] = state.eps_t
                sig_c[kept] = state.sigma_c_sq
                sig_t[kept] = state.sigma_t_sq
            kept += 1
        if progress is not None and (t + 1) % 100 == 0:
            progress(t + 1)

    logger.debug("Chain %s finished: %d draws retained", stream.path, kept)
    if not spec.overdispersed:
        return Chain(beta=betas, n_units=dataset.N)
    return Chain(
        beta=betas,
        n_units=dataset.N,
        eps_c=eps_c_draws,
        eps_t=eps_t_draws,
        sigma_c_sq=sig_c,
        sigma_t_sq=sig_t,
    )


def run_chains(
    dataset: Dataset,
    spec: ModelSpec,
    config: GibbsConfig,
    chains: int = 1,
    threads: int | None = None,
    progress: ProgressCallback | None = None,
) -> Chain:
    """
    Run independent chains in a thread pool and stack them in chain order.

    Chain ``c`` always uses stream ``(seed, c)``, so the result does not depend on
    ``threads``.
    """
    if chains < 1:
        raise ValidationError(f"chains must be positive, got {chains}")
    master = RngStream(config.seed)
    if chains == 1:
        return run_chain(dataset, spec, config, master.split(0), progress)

    results: dict[int, Chain] = {}
    with ThreadPoolExecutor(max_workers=threads) as executor:
        future_to_chain = {
            executor.submit(run_chain, dataset, spec, config, master.split(c)): c
            for c in range(chains)
        }
        for future in as_completed(future_to_chain):
            c = future_to_chain[future]
            results[c] = future.result()
            if progress is not None:
                progress(len(results) * config.iterations)
    return Chain.concatenate([results[c] for c in range(chains)])


def successive_conditional(
    dataset: Dataset,
    spec: ModelSpec,
    beta: FloatArray,
    iterations: int,
    stream: RngStream,
) -> tuple[FloatArray, FloatArray]:
    """
    Successive-conditional simulator for checking the (ε, ϑ) updates.

    Starts from a prior draw of (ε, ϑ). Each step simulates fresh outcomes from
    the current state with β held at ``beta``, then applies one ε update and one ϑ
    update given those outcomes. When the updates are right, the σ² draws keep
    their inverse-Gamma prior distribution; only ``dataset.X`` and ``dataset.W``
    are used.

    Returns:
        (σ_c² draws, σ_t² draws), one pair per step
    """
    if not spec.overdispersed:
        raise ValidationError("successive_conditional needs the lognormal-poisson model")
    rng = stream.generator
    eta_c, eta_t = arm_predictors(dataset, np.asarray(beta, dtype=np.float64))
    treated = dataset.W == 1

    sigma_c_sq = inverse_gamma_draw(rng, *spec.ig_c)
    sigma_t_sq = inverse_gamma_draw(rng, *spec.ig_t)
    eps_c = np.exp(np.sqrt(sigma_c_sq) * rng.standard_normal(dataset.N))
    eps_t = np.exp(np.sqrt(sigma_t_sq) * rng.standard_normal(dataset.N))

    out_c = np.empty(iterations)
    out_t = np.empty(iterations)
    for t in range(iterations):
        log_mu = np.where(treated, eta_t + np.log(eps_t), eta_c + np.log(eps_c))
        y = rng.poisson(np.exp(log_mu))
        simulated = Dataset(X=dataset.X, W=dataset.W, Y_obs=y)
        rows = effective_rows(simulated, spec.zero_policy)
        law_c, law_t = eps_conditionals(simulated, beta, sigma_c_sq, sigma_t_sq, rows)
        eps_c = draw_eps(rng, law_c)
        eps_t = draw_eps(rng, law_t)
        sigma_c_sq, sigma_t_sq = hyper_conditional(eps_c, eps_t, spec, rng)
        out_c[t] = sigma_c_sq
        out_t[t] = sigma_t_sq
    return out_c, out_t
