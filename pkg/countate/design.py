"""
Kronecker design rows and linear predictors for the observed and missing arms.

Unit i's observed-arm row is [(1-W_i), W_i] ⊗ x_i and its missing-arm row is
[W_i, (1-W_i)] ⊗ x_i, against β stacked as (β_c, β_t).
"""

from __future__ import annotations

import numpy as np

from .models import Dataset, DesignRows, FloatArray, ParameterState
from .validation import NumericalError, ValidationError

# exp() overflows float64 just past 709
XI_LIMIT = 700.0


def design_rows(dataset: Dataset, state: ParameterState, i: int) -> DesignRows:
    """Design rows and offsets of unit ``i``."""
    if not 0 <= i < dataset.N:
        raise ValidationError(f"Unit index {i} out of range for N={dataset.N}")
    w = float(dataset.W[i])
    x = dataset.X[i]
    sel_obs = np.array([1.0 - w, w])
    sel_mis = sel_obs[::-1]
    log_eps = np.array([np.log(state.eps_c[i]), np.log(state.eps_t[i])])
    return DesignRows(
        x_obs=np.kron(sel_obs, x),
        x_mis=np.kron(sel_mis, x),
        m_obs=float(sel_obs @ log_eps),
        m_mis=float(sel_mis @ log_eps),
    )


def design_matrices(dataset: Dataset) -> tuple[FloatArray, FloatArray]:
    """Stacked observed and missing design matrices, each N × 2(k+1)."""
    w = dataset.W.astype(np.float64)[:, None]
    X = dataset.X
    x_obs = np.hstack([(1.0 - w) * X, w * X])
    x_mis = np.hstack([w * X, (1.0 - w) * X])
    return x_obs, x_mis


def offsets(dataset: Dataset, state: ParameterState) -> tuple[FloatArray, FloatArray]:
    """(m_obs, m_mis): the log-ε offsets selected by each unit's arm."""
    w = dataset.W.astype(np.float64)
    log_c = np.log(state.eps_c)
    log_t = np.log(state.eps_t)
    return (1.0 - w) * log_c + w * log_t, w * log_c + (1.0 - w) * log_t


def arm_predictors(dataset: Dataset, beta: FloatArray) -> tuple[FloatArray, FloatArray]:
    """(xβ_c, xβ_t) for every unit, without the ε offsets."""
    p = dataset.X.shape[1]
    return dataset.X @ beta[:p], dataset.X @ beta[p:]


def linear_predictors(dataset: Dataset, state: ParameterState) -> tuple[FloatArray, FloatArray]:
    """
    Observed and missing linear predictors ξ_obs, ξ_mis.

    Only the unit's own block of β contributes: the control block for W_i = 0 on
    the observed side, the treated block on the missing side, and vice versa.

    Raises:
        NumericalError: |ξ| > 700 for some unit, where exp(ξ) is not representable
    """
    eta_c, eta_t = arm_predictors(dataset, state.beta)
    m_obs, m_mis = offsets(dataset, state)
    treated = dataset.W == 1
    xi_obs = np.where(treated, eta_t, eta_c) + m_obs
    xi_mis = np.where(treated, eta_c, eta_t) + m_mis
    check_rates(xi_obs, "observed")
    check_rates(xi_mis, "missing")
    return xi_obs, xi_mis


def check_rates(xi: FloatArray, label: str) -> None:
    """Reject predictors whose exponential would overflow."""
    bad = np.flatnonzero(~np.isfinite(xi) | (np.abs(xi) > XI_LIMIT))
    if bad.size:
        i = int(bad[0])
        raise NumericalError(f"Non-finite {label} rate at unit {i}: xi={xi[i]:.6g}")
