"""
Error certificates for the normal/log-Gamma matching.

For a count y, the log-Gamma(y, 1) law of ξ = log μ is replaced by N(log y, 1/y).
This module evaluates the exact KL divergence between the two, its 5/(24y)
leading term, the square-root TV bounds built from them and a quadrature
estimate of the actual TV distance.

"Every approximation owes you a receipt. Keep it." — schema.cx
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
from scipy import integrate, special, stats

from .validation import NumericalError, ValidationError, validate_grid

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
STIRLING_CUTOVER = 30.0
TAIL_MASS = 1e-12
QUAD_TOL = 1e-8
MAX_WIDENINGS = 12

Density = Callable[[float], float]


@dataclass(frozen=True)
class DivergenceReport:
    """KL and TV figures for one count ``y``."""

    y: float
    kl_exact: float
    kl_leading: float
    tv_bound: float
    tv_leading: float
    tv_empirical: float | None = None

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        return asdict(self)


def _check_y(y: float) -> float:
    if not isinstance(y, (int, float)) or not math.isfinite(y) or y <= 0:
        raise ValidationError(f"y must be a positive finite number, got {y!r}")
    return float(y)


def log_gamma_density(xi: float, r: float, s: float) -> float:
    """
    Density of log X for X ~ Gamma(shape=r, scale=s).

    Evaluated as exp of a log-density so that large ``r`` does not overflow Γ(r).

    Raises:
        ValidationError: non-finite input or non-positive shape/scale
    """
    if not all(math.isfinite(v) for v in (xi, r, s)):
        raise ValidationError(f"Non-finite input: xi={xi}, r={r}, s={s}")
    if r <= 0 or s <= 0:
        raise ValidationError(f"Shape and scale must be positive, got r={r}, s={s}")
    if xi - math.log(s) > math.log(np.finfo(np.float64).max):
        return 0.0
    log_pdf = r * (xi - math.log(s)) - math.exp(xi - math.log(s)) - float(special.gammaln(r))
    return math.exp(log_pdf)


def normal_density(xi: float, y: float) -> float:
    """N(log y, 1/y) density at ``xi``."""
    y = _check_y(y)
    return float(stats.norm.pdf(xi, loc=math.log(y), scale=1.0 / math.sqrt(y)))


def stirling_remainder(y: float) -> float:
    """log Γ(y) − (y − ½) log y + y − ½ log 2π, free of cancellation for large y."""
    if y > STIRLING_CUTOVER:
        inv = 1.0 / y
        inv2 = inv * inv
        return inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
    return float(special.gammaln(y)) - (y - 0.5) * math.log(y) + y - 0.5 * LOG_2PI


def _expm1_excess(y: float) -> float:
    """y·(e^{1/(2y)} − 1) − ½, i.e. y·(e^t − 1 − t) with t = 1/(2y)."""
    t = 0.5 / y
    if t > 1e-2:
        try:
            return y * math.expm1(t) - 0.5
        except OverflowError as e:
            raise NumericalError(f"KL divergence overflows for y={y}") from e
    # Σ_{n≥2} t^n/n!, divided by 2t
    term = t * t / 2.0
    total = 0.0
    n = 2
    while term > 1e-18 * (total + term):
        total += term
        n += 1
        term *= t / n
    return total / (2.0 * t)


def kl_exact(y: float) -> float:
    """
    Exact KL divergence, in nats, between log-Gamma(y, 1) and N(log y, 1/y).

    Equal to log(Γ(y)/√(2π/y)) − y log y + y e^{1/(2y)} − ½, regrouped as the
    Stirling remainder plus y(e^{1/(2y)} − 1) − ½ so both halves stay accurate
    up to y = 1e8 and beyond.
    """
    y = _check_y(y)
    value = stirling_remainder(y) + _expm1_excess(y)
    if not math.isfinite(value):
        raise NumericalError(f"KL divergence is not finite for y={y}")
    return max(value, 0.0)


def kl_leading(y: float) -> float:
    """The 5/(24y) leading term of :func:`kl_exact`."""
    return 5.0 / (24.0 * _check_y(y))


def _centered_log_gamma_pdf(z: float, y: float) -> float:
    """
    Log-Gamma(y, 1) log-density in the standardized coordinate z = √y (ξ − log y).

    Uses y(u − e^u + 1) = −y·(expm1(u) − u) so nothing cancels at large y.
    """
    u = z / math.sqrt(y)
    core = -y * (math.expm1(min(u, 700.0)) - u)
    return core - 0.5 * LOG_2PI - stirling_remainder(y)


def tv_distance(f: Density, g: Density, lower: float, upper: float, grid: int = 2001) -> float:
    """
    ½∫|f − g| over [lower, upper] by adaptive quadrature.

    Sign changes of f − g found on a uniform grid are passed to the integrator as
    break points, so every sub-interval has a smooth integrand.

    Raises:
        NumericalError: the quadrature error estimate exceeds tolerance
    """
    if not (math.isfinite(lower) and math.isfinite(upper)) or upper <= lower:
        raise ValidationError(f"Invalid integration range [{lower}, {upper}]")
    xs = np.linspace(lower, upper, grid)
    diff = np.array([f(x) - g(x) for x in xs])
    crossings = np.flatnonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) < 0)
    points = [0.5 * (xs[i] + xs[i + 1]) for i in crossings] or None
    value, abserr = integrate.quad(
        lambda x: abs(f(x) - g(x)),
        lower,
        upper,
        points=points,
        epsabs=QUAD_TOL,
        epsrel=0.0,
        limit=500,
    )
    if not math.isfinite(value) or abserr > 10.0 * QUAD_TOL:
        raise NumericalError(f"TV quadrature did not converge: estimate={value}, error={abserr:.3g}")
    return 0.5 * value


def _tail_window(y: float) -> tuple[float, float]:
    """Standardized window outside which both densities hold under TAIL_MASS."""
    root = math.sqrt(y)
    lower, upper = -12.0, 12.0
    for _ in range(MAX_WIDENINGS):
        left = max(
            float(stats.norm.cdf(lower)),
            float(stats.gamma.cdf(y * math.exp(lower / root), y)),
        )
        right = max(
            float(stats.norm.sf(upper)),
            float(stats.gamma.sf(y * math.exp(min(upper / root, 700.0)), y)),
        )
        if left < TAIL_MASS and right < TAIL_MASS:
            return lower, upper
        if left >= TAIL_MASS:
            lower *= 2.0
        if right >= TAIL_MASS:
            upper *= 2.0
    raise NumericalError(f"Could not bound the integration window for y={y}")


def empirical_tv(y: float) -> float:
    """
    Quadrature TV distance between N(log y, 1/y) and log-Gamma(y, 1).

    Integrates in the standardized coordinate, where the normal is N(0, 1).

    Raises:
        ValidationError: y < 1
        NumericalError: quadrature or window search failed
    """
    y = _check_y(y)
    if y < 1:
        raise ValidationError(f"empirical_tv requires y >= 1, got {y}")
    lower, upper = _tail_window(y)

    def normal(z: float) -> float:
        return math.exp(-0.5 * z * z - 0.5 * LOG_2PI)

    def log_gamma(z: float) -> float:
        return math.exp(_centered_log_gamma_pdf(z, y))

    return tv_distance(normal, log_gamma, lower, upper)


def tv_bounds(y: float, empirical: bool = False) -> DivergenceReport:
    """Fill a :class:`DivergenceReport` for ``y``, optionally with the quadrature TV."""
    y = _check_y(y)
    kl = kl_exact(y)
    lead = kl_leading(y)
    return DivergenceReport(
        y=y,
        kl_exact=kl,
        kl_leading=lead,
        tv_bound=math.sqrt(kl),
        tv_leading=math.sqrt(lead),
        tv_empirical=empirical_tv(y) if empirical else None,
    )


def divergence_table(y_grid: Sequence[float], empirical: bool = True) -> list[DivergenceReport]:
    """
    One report per grid point, in grid order.

    The quadrature column is only computed for y >= 1.
    """
    grid = validate_grid(y_grid, "y grid")
    rows = []
    for y in grid:
        rows.append(tv_bounds(y, empirical=empirical and y >= 1))
        logger.debug("divergence y=%g kl=%.6g", y, rows[-1].kl_exact)
    return rows
