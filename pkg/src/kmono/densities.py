"""Truth densities with analytic derivatives and c.d.f."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Exponential:
    """Exponential(rate) density; completely monotone, so k-monotone for every k."""

    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    @property
    def name(self):
        return f"exponential({self.rate:g})"

    def pdf(self, x):
        return self.rate * np.exp(-self.rate * np.asarray(x, dtype=float))

    def cdf(self, x):
        return -np.expm1(-self.rate * np.asarray(x, dtype=float))

    def deriv(self, x, j):
        """``j``-th derivative of the density."""
        return (-self.rate) ** j * self.pdf(x)

    def sample(self, rng, n):
        return rng.exponential(1.0 / self.rate, size=n)


@dataclass(frozen=True)
class CustomDensity:
    """User-asserted k-monotone density given by callables.

    ``deriv(x, j)`` must return the ``j``-th derivative (``j = 0`` is the
    density itself); ``sample(rng, n)`` is optional and only needed for
    simulation.
    """

    name: str
    deriv_fn: Callable
    cdf_fn: Callable
    sample_fn: Callable | None = None

    def pdf(self, x):
        return self.deriv_fn(x, 0)

    def cdf(self, x):
        return self.cdf_fn(x)

    def deriv(self, x, j):
        return self.deriv_fn(x, j)

    def sample(self, rng, n):
        if self.sample_fn is None:
            raise ValueError(f"density {self.name} has no sampler")
        return self.sample_fn(rng, n)


def parse_density(spec):
    """``"exponential"`` or ``"exponential(2.5)"`` to a density object."""
    if not isinstance(spec, str):
        return spec
    s = spec.strip().lower()
    if s in ("exp", "exponential"):
        return Exponential(1.0)
    if s.startswith("exponential(") and s.endswith(")"):
        return Exponential(float(s[len("exponential(") : -1]))
    raise ValueError(f"unknown density {spec!r}")
