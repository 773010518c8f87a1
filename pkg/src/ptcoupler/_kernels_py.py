"""Pure-Python fallback for the one-period amplitude integrator."""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp


def monodromy_2x2(
    kappa: float,
    period: float,
    kind: int,
    p0: float,
    p1: float,
    p2: float,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> np.ndarray:
    """Fundamental matrix of the two-mode amplitude system over one period.

    Same contract as the compiled kernel: kind 0 is constant loss p0, kind 1
    the modulated profile with amplitude B=p0, sharpness beta=p1, frequency
    omega=p2.
    """
    if period < 0.0:
        raise ValueError("period must be non-negative")
    if period == 0.0:
        return np.eye(2, dtype=complex)

    if kind == 0:
        gamma = lambda z: p0
    elif kind == 1:
        def gamma(z):
            e = p0 * p0 * np.exp(-p1 * (1.0 - np.cos(p2 * z)))
            return 2.0 * e / np.sqrt(1.0 - e)
    else:
        raise ValueError(f"unknown profile kind {kind}")

    ik = 1j * kappa

    def rhs(z, y):
        g = gamma(z)
        return [
            -g * y[0] - ik * y[2],
            -g * y[1] - ik * y[3],
            -ik * y[0],
            -ik * y[1],
        ]

    sol = solve_ivp(
        rhs,
        (0.0, period),
        np.array([1, 0, 0, 1], dtype=complex),
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"monodromy integration failed: {sol.message}")
    return sol.y[:, -1].reshape(2, 2)
