"""Brute-force reference propagation of the vectorised master equation.

Direct adaptive integration of v' = L(z) v with the generator rebuilt from the
loss profile at every evaluation.  Used to validate the factorised propagator;
deliberately shares nothing with it beyond the basis and generator matrices.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .fock import DensityMatrix, TwoModeBasis, devectorize, vectorize, LiouvilleVector
from .superops import CouplerParams, Superoperator, liouvillian_parts

__all__ = ["oracle_propagate", "oracle_monodromy"]


def _parts(params: CouplerParams, basis: TwoModeBasis):
    coherent, dissipative = liouvillian_parts(params.kappa, basis)
    if sp.issparse(coherent):
        coherent = coherent.toarray()
        dissipative = dissipative.toarray()
    return coherent, dissipative


def oracle_propagate(
    params: CouplerParams,
    rho0: DensityMatrix,
    z: float,
    rtol: float = 1e-11,
    atol: float = 1e-13,
) -> DensityMatrix:
    """Propagate a state to z by direct integration of the master equation."""
    if z < 0.0:
        raise ValueError(f"z must be non-negative, got {z}")
    basis = rho0.basis
    if z == 0.0:
        return DensityMatrix(basis, rho0.elements.copy())
    coherent, dissipative = _parts(params, basis)
    gamma = params.loss.gamma

    def rhs(t, v):
        return coherent @ v + gamma(t) * (dissipative @ v)

    sol = solve_ivp(
        rhs,
        (0.0, z),
        vectorize(rho0).data,
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=False,
    )
    if not sol.success:
        raise RuntimeError(f"reference integration failed at z={sol.t[-1]}: {sol.message}")
    return devectorize(LiouvilleVector(basis, sol.y[:, -1]))


def oracle_monodromy(
    params: CouplerParams,
    basis: TwoModeBasis,
    rtol: float = 1e-11,
    atol: float = 1e-13,
) -> Superoperator:
    """One-cycle propagator U(T) obtained by integrating all D^2 canonical
    Liouville basis columns over one modulation period."""
    T = params.loss.period
    coherent, dissipative = _parts(params, basis)
    gamma = params.loss.gamma
    D2 = basis.dim**2

    def rhs(t, v):
        Y = v.reshape(D2, D2)
        return (coherent @ Y + gamma(t) * (dissipative @ Y)).ravel()

    sol = solve_ivp(
        rhs,
        (0.0, T),
        np.eye(D2, dtype=complex).ravel(),
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"reference monodromy failed at z={sol.t[-1]}: {sol.message}")
    return Superoperator(basis, sol.y[:, -1].reshape(D2, D2), "U_oracle(T)")
