"""
Small dense SPD linear algebra.

Dimensions here are 2(k+1), a few dozen at most, so everything is dense and
factor-based: no explicit inverses anywhere on the hot path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import linalg as sla

from .validation import NumericalError, ValidationError

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class SpdMatrix:
    """A symmetric positive-definite matrix with its cached lower Cholesky factor."""

    data: NDArray[np.float64]
    lower: NDArray[np.float64]

    @property
    def dim(self) -> int:
        return int(self.data.shape[0])


def factorize(A: NDArray[np.float64]) -> SpdMatrix:
    """
    Cholesky-factorize a symmetric positive-definite matrix.

    Raises:
        ValidationError: non-square or asymmetric input
        NumericalError: the matrix is not positive definite
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"Expected a square matrix, got shape {A.shape}")
    scale = max(float(np.max(np.abs(A))) if A.size else 0.0, 1.0)
    if not np.allclose(A, A.T, rtol=0.0, atol=SYMMETRY_TOL * scale):
        raise ValidationError("Matrix is not symmetric")
    try:
        L = sla.cholesky(A, lower=True, check_finite=True)
    except (sla.LinAlgError, ValueError) as e:
        raise NumericalError(f"Cholesky factorization failed: {e}") from e
    if np.any(np.diag(L) <= 0):
        raise NumericalError("Cholesky factor has a non-positive diagonal entry")
    data = A.copy()
    data.setflags(write=False)
    L.setflags(write=False)
    return SpdMatrix(data=data, lower=L)


def solve(factor: SpdMatrix, b: NDArray[np.float64]) -> NDArray[np.float64]:
    """Solve A x = b with two triangular solves."""
    y = sla.solve_triangular(factor.lower, b, lower=True, check_finite=False)
    return sla.solve_triangular(factor.lower.T, y, lower=False, check_finite=False)


def quad_form(factor: SpdMatrix, v: NDArray[np.float64]) -> NDArray[np.float64] | float:
    """
    vᵀ A⁻¹ v through one triangular solve.

    ``v`` may be a single vector or an (n, d) stack of row vectors, in which case
    one value per row is returned.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        z = sla.solve_triangular(factor.lower, v, lower=True, check_finite=False)
        return float(z @ z)
    z = sla.solve_triangular(factor.lower, v.T, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", z, z)


def sample_from_precision(
    factor: SpdMatrix, mean: NDArray[np.float64], z: NDArray[np.float64]
) -> NDArray[np.float64]:
    """mean + L⁻ᵀ z: a N(mean, A⁻¹) draw given standard normals ``z``."""
    return mean + sla.solve_triangular(factor.lower.T, z, lower=False, check_finite=False)
