"""Periodic loss-rate profile of the modulated waveguide and its inverse problem.

All rates are expressed in units of the coupler rate kappa, lengths in units of
1/kappa.  The modulated profile is

    gamma(z) = 2 B^2 E(z) / sqrt(1 - B^2 E(z)),   E(z) = exp[-beta (1 - cos(omega z))]

with amplitude 0 < B < 1 and sharpness beta > 0; it peaks at gamma_max = gamma(0)
and dips to gamma_min at half period.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import bisect

__all__ = [
    "LossProfile",
    "ConstantProfile",
    "gamma_of_z",
    "profile_for_target",
    "mean_loss",
]

DEFAULT_MIN_RATIO = 1e-3


@dataclass(frozen=True)
class LossProfile:
    B: float
    beta: float
    omega: float

    def __post_init__(self):
        if not 0.0 < self.B < 1.0:
            raise ValueError(f"B must lie in (0, 1), got {self.B}")
        if self.beta <= 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.omega <= 0.0:
            raise ValueError(f"omega must be positive, got {self.omega}")

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    @property
    def gamma_max(self) -> float:
        return 2.0 * self.B**2 / np.sqrt(1.0 - self.B**2)

    @property
    def gamma_min(self) -> float:
        e = np.exp(-2.0 * self.beta)
        return 2.0 * self.B**2 * e / np.sqrt(1.0 - self.B**2 * e)

    def gamma(self, z):
        e = self.B**2 * np.exp(-self.beta * (1.0 - np.cos(self.omega * np.asarray(z))))
        return 2.0 * e / np.sqrt(1.0 - e)


@dataclass(frozen=True)
class ConstantProfile:
    """Static loss, kept for the unmodulated limit.  The period is only used to
    define a one-cycle propagator and does not affect the physics."""

    value: float
    period: float

    def __post_init__(self):
        if self.value < 0.0:
            raise ValueError(f"loss rate must be non-negative, got {self.value}")
        if self.period <= 0.0:
            raise ValueError(f"period must be positive, got {self.period}")

    @property
    def gamma_max(self) -> float:
        return self.value

    @property
    def gamma_min(self) -> float:
        return self.value

    def gamma(self, z):
        return np.full_like(np.asarray(z, dtype=float), self.value)


def gamma_of_z(profile, z):
    """Loss rate at position z (vectorised)."""
    return profile.gamma(z)


def _amplitude_for(gamma_max: float) -> float:
    """Invert gamma_max = 2 B^2 / sqrt(1 - B^2) for B in (0, 1) by bisection."""

    def f(b):
        return 2.0 * b * b / np.sqrt(1.0 - b * b) - gamma_max

    # f is strictly increasing, negative at 0+ and diverging at 1-.
    return bisect(f, 1e-12, 1.0 - 1e-12, xtol=1e-15)


def _sharpness_for(B: float, min_ratio: float) -> float:
    """Smallest beta with gamma_min/gamma_max <= min_ratio (equality root)."""
    gmax = 2.0 * B**2 / np.sqrt(1.0 - B**2)

    def f(beta):
        e = np.exp(-2.0 * beta)
        return 2.0 * B**2 * e / np.sqrt(1.0 - B**2 * e) / gmax - min_ratio

    hi = 1.0
    while f(hi) > 0.0:
        hi *= 2.0
        if hi > 1e6:
            raise RuntimeError("sharpness bisection failed to bracket")
    return bisect(f, 1e-12, hi, xtol=1e-12)


def profile_for_target(
    gamma_max: float, omega: float, min_ratio: float = DEFAULT_MIN_RATIO
) -> LossProfile:
    """Profile with the requested peak loss and a minimum suppressed to
    min_ratio * gamma_max."""
    if gamma_max <= 0.0:
        raise ValueError(f"gamma_max must be positive, got {gamma_max}")
    if omega <= 0.0:
        raise ValueError(f"omega must be positive, got {omega}")
    if not 0.0 < min_ratio < 1.0:
        raise ValueError(f"min_ratio must lie in (0, 1), got {min_ratio}")
    B = _amplitude_for(gamma_max)
    beta = _sharpness_for(B, min_ratio)
    return LossProfile(B=B, beta=beta, omega=omega)


def mean_loss(profile) -> float:
    """Period average (1/T) int_0^T gamma(z) dz.

    Adaptive Gauss-Kronrod quadrature with relative tolerance 1e-10; the value
    feeds the phase-classification reference, so it needs headroom below the
    classification tolerances.
    """
    if isinstance(profile, ConstantProfile):
        return profile.value
    T = profile.period
    val, _err = quad(profile.gamma, 0.0, T, epsabs=1e-14, epsrel=1e-10, limit=200)
    return val / T
