"""
Deterministic, splittable random streams.

Every stream is a Philox (counter-based) generator keyed by the master seed and a
path of split indices, so a result depends only on *which* stream produced it and
never on the order in which workers ran.

"Randomness you can replay is just a very patient kind of order." — schema.cx
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .validation import ValidationError


@dataclass(frozen=True)
class RngStream:
    """A (seed, path) address of an independent random sequence."""

    seed: int
    path: tuple[int, ...] = ()
    _generator: list[np.random.Generator] = field(
        default_factory=list, repr=False, compare=False, hash=False
    )

    def __post_init__(self) -> None:
        if self.seed < 0 or self.seed >= 2**64:
            raise ValidationError(f"Seed must fit in 64 unsigned bits, got {self.seed}")
        if any(i < 0 for i in self.path):
            raise ValidationError(f"Split indices must be non-negative, got {self.path}")

    def split(self, *indices: int) -> RngStream:
        """Child stream at ``path + indices``; independent of any sibling."""
        return RngStream(self.seed, self.path + tuple(int(i) for i in indices))

    @property
    def generator(self) -> np.random.Generator:
        """The stream's generator, created on first use and then reused."""
        if not self._generator:
            seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
            self._generator.append(np.random.Generator(np.random.Philox(seq)))
        return self._generator[0]


def normal_draw(rng: np.random.Generator, d: int) -> NDArray[np.float64]:
    """Draw ``d`` independent standard normals."""
    if d < 0:
        raise ValidationError(f"Dimension must be non-negative, got {d}")
    return rng.standard_normal(d)


def gamma_draw(rng: np.random.Generator, shape: float, scale: float) -> float:
    """Draw from Gamma(shape, scale), mean shape·scale."""
    if not (shape > 0 and scale > 0) or not math.isfinite(shape * scale):
        raise ValidationError(f"Gamma parameters must be positive, got shape={shape}, scale={scale}")
    return float(rng.gamma(shape, scale))


def inverse_gamma_draw(rng: np.random.Generator, shape: float, scale: float) -> float:
    """Draw from IG(shape, scale) with density ∝ x^(-shape-1) exp(-scale/x), via 1/Gamma."""
    return 1.0 / gamma_draw(rng, shape, 1.0 / scale)


def poisson_draw(rng: np.random.Generator, mu: float) -> int:
    """
    Draw one Poisson count; ``mu == 0`` is the point mass at zero.

    numpy's sampler uses inversion below a rate of 10 and PTRS rejection above it.
    """
    if not math.isfinite(mu) or mu < 0:
        raise ValidationError(f"Poisson rate must be finite and non-negative, got {mu}")
    if mu == 0:
        return 0
    return int(rng.poisson(mu))


def poisson_draws(rng: np.random.Generator, mu: NDArray[np.float64]) -> NDArray[np.int64]:
    """Vectorised :func:`poisson_draw` over an array of rates."""
    if not np.all(np.isfinite(mu)) or np.any(mu < 0):
        bad = int(np.flatnonzero(~np.isfinite(mu) | (mu < 0))[0])
        raise ValidationError(f"Poisson rate must be finite and non-negative at index {bad}")
    return rng.poisson(mu).astype(np.int64)
