"""Model parameters and the carousel speed function."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


def speed_f(t, beta: float):
    """Angular speed profile ``(beta / 4) * exp(-beta * t / 4)``.

    Strictly positive and decreasing; integrates to 1 over ``[0, inf)``.
    Accepts scalars or arrays.
    """
    if beta <= 0:
        raise ConfigurationError(f"beta must be positive, got {beta}")
    return (beta / 4.0) * np.exp(-beta * np.asarray(t, dtype=float) / 4.0)


def drift_mass(t, beta: float):
    """Cumulative speed ``F(t) = 1 - exp(-beta * t / 4)`` (so ``F(inf) = 1``)."""
    return -np.expm1(-beta * np.asarray(t, dtype=float) / 4.0)


@dataclass(frozen=True)
class ModelParams:
    """Pair ``(beta, lam)`` plus the derived quantities used everywhere.

    ``lam`` is the interval length at point-process scale (mean density
    ``1 / (2 pi)``); ``lam = 0`` is allowed as a degenerate test case.
    """

    beta: float
    lam: float

    def __post_init__(self):
        if self.beta <= 0:
            raise ConfigurationError(f"beta must be positive, got {self.beta}")
        if self.lam < 0:
            raise ConfigurationError(f"lambda must be nonnegative, got {self.lam}")

    @property
    def T(self) -> float:
        """Tilt horizon ``(4 / beta) * log(lam)``; positive only for lam > 1."""
        if self.lam <= 0:
            raise ConfigurationError("T is undefined for lambda <= 0")
        return (4.0 / self.beta) * math.log(self.lam)

    @property
    def gamma_beta(self) -> float:
        """Log-power ``(1/4) (beta/2 + 2/beta - 3)`` of the gap asymptotics."""
        b = self.beta
        return 0.25 * (b / 2.0 + 2.0 / b - 3.0)

    def f(self, t):
        return speed_f(t, self.beta)

    def F(self, t):
        return drift_mass(t, self.beta)

    def phase_horizon(self, tolerance: float) -> float:
        """Smallest ``t`` with residual drift ``lam * exp(-beta t / 4) <= tolerance``."""
        if tolerance <= 0:
            raise ConfigurationError("tolerance must be positive")
        if self.lam <= tolerance:
            return 0.0
        return (4.0 / self.beta) * math.log(self.lam / tolerance)

    def residual_drift(self, t: float) -> float:
        """Drift mass remaining after time ``t``: ``lam * exp(-beta t / 4)``."""
        return self.lam * math.exp(-self.beta * t / 4.0)
