"""
Data models for countate.

"In the end, it's all just data. But organized data? That's power." — schema.cx
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.int64]


class Overdispersion(str, Enum):
    """Family of the multiplicative random effect on the Poisson rate."""

    POISSON = "poisson"
    LOGNORMAL_POISSON = "lognormal-poisson"


class ZeroPolicy(str, Enum):
    """What the normal approximation does with a zero observed count."""

    ERROR = "error"
    DROP_ROW = "drop-row"
    CONTINUITY = "continuity"


def _frozen_array(values: Any, dtype: type) -> NDArray[Any]:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """
    Covariates, assignment and observed counts for N units.

    ``X`` carries an explicit intercept column. ``Y0``/``Y1`` are only present
    for simulated data, where both potential outcomes are known.

    "Half of every story is missing. Count the half you have." — schema.cx
    """

    X: FloatArray
    W: IntArray
    Y_obs: IntArray
    Y0: IntArray | None = None
    Y1: IntArray | None = None
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "X", _frozen_array(np.atleast_2d(self.X), np.float64))
        object.__setattr__(self, "W", _frozen_array(self.W, np.int64))
        object.__setattr__(self, "Y_obs", _frozen_array(self.Y_obs, np.int64))
        if self.Y0 is not None:
            object.__setattr__(self, "Y0", _frozen_array(self.Y0, np.int64))
        if self.Y1 is not None:
            object.__setattr__(self, "Y1", _frozen_array(self.Y1, np.int64))
        if not self.covariate_names:
            names = tuple(f"x{j}" for j in range(1, self.X.shape[1]))
            object.__setattr__(self, "covariate_names", names)

    @property
    def N(self) -> int:
        """Number of units."""
        return int(self.W.shape[0])

    @property
    def k(self) -> int:
        """Covariate dimension, intercept excluded."""
        return int(self.X.shape[1]) - 1

    @property
    def dim(self) -> int:
        """Length of the stacked coefficient vector, 2(k+1)."""
        return 2 * int(self.X.shape[1])

    @property
    def n_treated(self) -> int:
        return int(self.W.sum())

    @property
    def n_control(self) -> int:
        return self.N - self.n_treated

    @property
    def has_truth(self) -> bool:
        """Whether both potential outcomes are stored."""
        return self.Y0 is not None and self.Y1 is not None

    def subset(self, mask: NDArray[np.bool_]) -> Dataset:
        """Return the units selected by a boolean mask."""
        return Dataset(
            X=self.X[mask],
            W=self.W[mask],
            Y_obs=self.Y_obs[mask],
            Y0=None if self.Y0 is None else self.Y0[mask],
            Y1=None if self.Y1 is None else self.Y1[mask],
            covariate_names=self.covariate_names,
        )


@dataclass(frozen=True)
class ModelSpec:
    """
    Prior configuration of the count model.

    ``ig_c``/``ig_t`` are (shape, scale) pairs of the inverse-Gamma priors on the
    arm-wise log-scale variances; they are ignored for the Poisson family.
    """

    sigma_beta_sq: float = 1000.0**2
    overdispersion: Overdispersion = Overdispersion.POISSON
    ig_c: tuple[float, float] = (2.0, 1.0)
    ig_t: tuple[float, float] = (2.0, 1.0)
    zero_policy: ZeroPolicy = ZeroPolicy.DROP_ROW

    @property
    def overdispersed(self) -> bool:
        return self.overdispersion is Overdispersion.LOGNORMAL_POISSON

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        return {
            "sigma_beta_sq": self.sigma_beta_sq,
            "overdispersion": self.overdispersion.value,
            "ig_c": list(self.ig_c),
            "ig_t": list(self.ig_t),
            "zero_policy": self.zero_policy.value,
        }


@dataclass(frozen=True)
class ParameterState:
    """
    One draw of (β, ε, ϑ).

    ``beta`` stacks the control block before the treated block. The variances are
    ``None`` for the Poisson family, where ε is pinned to one.
    """

    beta: FloatArray
    eps_c: FloatArray
    eps_t: FloatArray
    sigma_c_sq: float | None = None
    sigma_t_sq: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta", _frozen_array(self.beta, np.float64))
        object.__setattr__(self, "eps_c", _frozen_array(self.eps_c, np.float64))
        object.__setattr__(self, "eps_t", _frozen_array(self.eps_t, np.float64))

    @classmethod
    def initial(cls, beta: FloatArray, n_units: int) -> ParameterState:
        """State with ε ≡ 1 and no hyperparameters."""
        ones = np.ones(n_units)
        return cls(beta=beta, eps_c=ones, eps_t=ones)

    def with_beta(self, beta: FloatArray) -> ParameterState:
        return replace(self, beta=beta)

    @property
    def log_eps_c(self) -> FloatArray:
        return np.log(self.eps_c)

    @property
    def log_eps_t(self) -> FloatArray:
        return np.log(self.eps_t)


@dataclass(frozen=True)
class DesignRows:
    """Observed- and missing-arm design rows of a single unit."""

    x_obs: FloatArray
    x_mis: FloatArray
    m_obs: float
    m_mis: float


@dataclass
class AteEstimate:
    """
    Posterior summary of the finite-population ATE over R imputations.

    "Numbers don't lie. Unless they're in a database." — schema.cx
    """

    per_rep: FloatArray
    mean: float
    variance: float
    interval_low: float = float("nan")
    interval_high: float = float("nan")
    imputations: IntArray | None = field(default=None, repr=False)

    @property
    def R(self) -> int:
        return int(self.per_rep.shape[0])

    @property
    def sd(self) -> float:
        return float(np.sqrt(self.variance))

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary (per-replication vector excluded)."""
        return {
            "ate_mean": self.mean,
            "ate_variance": self.variance,
            "ate_sd": self.sd,
            "interval_low": self.interval_low,
            "interval_high": self.interval_high,
            "R": self.R,
        }


@dataclass
class Chain:
    """
    Retained posterior draws, stored column-wise.

    Poisson chains keep ``eps_c``/``eps_t`` as ``None`` (ε ≡ 1). Exact-oracle
    chains also carry their post-burn-in acceptance rates.
    """

    beta: FloatArray
    n_units: int
    eps_c: FloatArray | None = None
    eps_t: FloatArray | None = None
    sigma_c_sq: FloatArray | None = None
    sigma_t_sq: FloatArray | None = None
    chain_index: IntArray | None = None
    accept_beta: float | None = None
    accept_eps: float | None = None

    def __post_init__(self) -> None:
        if self.chain_index is None:
            self.chain_index = np.zeros(self.beta.shape[0], dtype=np.int64)

    def __len__(self) -> int:
        return int(self.beta.shape[0])

    def draw(self, r: int) -> ParameterState:
        """The r-th retained draw as a ParameterState."""
        ones = np.ones(self.n_units)
        return ParameterState(
            beta=self.beta[r],
            eps_c=ones if self.eps_c is None else self.eps_c[r],
            eps_t=ones if self.eps_t is None else self.eps_t[r],
            sigma_c_sq=None if self.sigma_c_sq is None else float(self.sigma_c_sq[r]),
            sigma_t_sq=None if self.sigma_t_sq is None else float(self.sigma_t_sq[r]),
        )

    @property
    def draws(self) -> list[ParameterState]:
        return [self.draw(r) for r in range(len(self))]

    def to_frame(self) -> pd.DataFrame:
        """
        One row per retained draw: chain, draw, beta_0 … beta_{d-1}, sigma_c_sq, sigma_t_sq.

        The variance columns are empty for Poisson chains.
        """
        assert self.chain_index is not None
        draw = np.zeros(len(self), dtype=np.int64)
        for c in np.unique(self.chain_index):
            sel = self.chain_index == c
            draw[sel] = np.arange(int(sel.sum()))
        frame = pd.DataFrame({"chain": self.chain_index, "draw": draw})
        for j in range(self.beta.shape[1]):
            frame[f"beta_{j}"] = self.beta[:, j]
        nan = np.full(len(self), np.nan)
        frame["sigma_c_sq"] = nan if self.sigma_c_sq is None else self.sigma_c_sq
        frame["sigma_t_sq"] = nan if self.sigma_t_sq is None else self.sigma_t_sq
        return frame

    @classmethod
    def concatenate(cls, chains: list[Chain]) -> Chain:
        """Stack chains in the given order, tagging each draw with its chain number."""
        if not chains:
            raise ValueError("Nothing to concatenate")

        def stack(name: str) -> FloatArray | None:
            parts = [getattr(c, name) for c in chains]
            if any(p is None for p in parts):
                return None
            return np.concatenate(parts, axis=0)

        index = np.concatenate(
            [np.full(len(c), i, dtype=np.int64) for i, c in enumerate(chains)]
        )
        return cls(
            beta=np.concatenate([c.beta for c in chains], axis=0),
            n_units=chains[0].n_units,
            eps_c=stack("eps_c"),
            eps_t=stack("eps_t"),
            sigma_c_sq=stack("sigma_c_sq"),
            sigma_t_sq=stack("sigma_t_sq"),
            chain_index=index,
        )
