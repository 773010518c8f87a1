"""Product-of-exponentials propagator for the lossy-coupler master equation.

The Liouville generator splits into two commuting sl(2, C) copies (ket-side and
bra-side bilinears) plus a solvable remainder (mean-loss number sums and the
four photon-removal terms).  With K+ = L1+L2-, K- = L2+L1-, K0 = L1+L1- - L2+L2-
the one-cycle propagator factorises as

    U = e^{f+ K+} e^{f0 K0} e^{f- K-}            (ket copy)
      * e^{f+* K~+} e^{f0* K~0} e^{f-* K~-}      (bra copy, conjugate functions)
      * e^{a1 ML} e^{a2 MR}
      * e^{a3 L1-R1-} e^{a4 L2-R2-} e^{a5 L2-R1-} e^{a6 L1-R2-},

read left to right as a matrix product (the leftmost factor acts last on a
state).  The ket-copy coefficients obey the Riccati system

    f+' = c+ + 2 c0 f+ - c- f+^2,   f0' = c0 - c- f+,   f-' = c- e^{2 f0},

with c+ = c- = -i kappa and c0 = -gamma(z)/2, starting from zero.  Writing M(z)
for the 2x2 fundamental matrix of M' = [[c0, c+], [c-, -c0]] M, M(z0) = I, the
same group element satisfies f+ = M12/M22, f- = M21/M22, f0 = -log M22, which
provides a blow-up-free cross-check of the Riccati path.  The dissipative
weights follow from the linear interaction-picture system

    a1' = a2' = -gamma/2,
    a3' = w M11 N11,  a4' = w M12 N12,  a5' = w M12 N11,  a6' = w M11 N12,

with w = 2 gamma e^{a1+a2} and N the bra-copy (conjugate) fundamental matrix.

The Riccati coordinates blow up at chart singularities (for gamma = 0 the
solution is f+ = f- = -i tan(kappa z), divergent at kappa z = pi/2).  The
integration therefore restarts from the identity whenever |f+|, |f-| or
exp|Re f0| exceeds ``CHART_BOUND``; composing the per-segment propagators is
exact, so segmentation costs no accuracy.  The bound also caps the size of the
intermediate entries in the exponential factors: rounding in the assembly grows
like CHART_BOUND^n_max * eps, which keeps well below the 1e-8 validation budget
at the default bound, whereas a much larger bound would not.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache, reduce
from math import factorial

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .fock import TwoModeBasis
from .superops import CouplerParams, Superoperator, _generator_matrix

__all__ = [
    "CHART_BOUND",
    "SL2Coefficients",
    "SolvableCoefficients",
    "Segment",
    "SegmentedPropagator",
    "sl2_rhs",
    "integrate_sl2",
    "integrate_sl2_linear",
    "f_from_linear",
    "integrate_solvable",
    "solvable_by_conjugation",
    "assemble_propagator",
    "propagator",
]

# Per-segment cap on |f+-| and exp|Re f0|; see the module docstring for the
# rounding argument behind the default.
CHART_BOUND = 20.0

DEFAULT_RTOL = 1e-11
DEFAULT_ATOL = 1e-13

_BOUNDARY_TOL = 1e-9


@dataclass
class SL2Coefficients:
    """Sampled coefficients of one sl(2) factor triple on a single segment."""

    z: np.ndarray
    f_plus: np.ndarray
    f_zero: np.ndarray
    f_minus: np.ndarray
    evaluator: object = None  # callable z -> ndarray (3,)

    @classmethod
    def zeros(cls, z0: float) -> "SL2Coefficients":
        zer = np.zeros(1, dtype=complex)
        return cls(
            np.array([z0]),
            zer.copy(),
            zer.copy(),
            zer.copy(),
            evaluator=lambda s: np.zeros(3, dtype=complex),
        )

    @property
    def z_start(self) -> float:
        return float(self.z[0])

    @property
    def z_end(self) -> float:
        return float(self.z[-1])

    def endpoint(self):
        return self.f_plus[-1], self.f_zero[-1], self.f_minus[-1]

    def evaluate(self, z):
        if self.evaluator is None:
            raise RuntimeError("coefficients carry no dense evaluator")
        return np.asarray(self.evaluator(z))

    def conjugate(self) -> "SL2Coefficients":
        """Bra-copy coefficients; equals the complex conjugate for real kappa
        and real loss rate, which is what keeps propagated states Hermitian."""
        ev = self.evaluator
        new_ev = None if ev is None else (lambda s: np.conj(np.asarray(ev(s))))
        return SL2Coefficients(
            self.z.copy(),
            self.f_plus.conj(),
            self.f_zero.conj(),
            self.f_minus.conj(),
            evaluator=new_ev,
        )


@dataclass
class SolvableCoefficients:
    """Mean-loss exponents a1 = a2 and photon-removal weights a3..a6."""

    z: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    a4: np.ndarray
    a5: np.ndarray
    a6: np.ndarray

    @classmethod
    def zeros(cls, z0: float) -> "SolvableCoefficients":
        zer = np.zeros(1, dtype=complex)
        return cls(np.array([z0]), *(zer.copy() for _ in range(6)))

    def endpoint(self):
        return (
            self.a1[-1],
            self.a2[-1],
            self.a3[-1],
            self.a4[-1],
            self.a5[-1],
            self.a6[-1],
        )


def sl2_rhs(z: float, f, params: CouplerParams) -> np.ndarray:
    """Right-hand side of the Riccati system for (f+, f0, f-)."""
    fp, f0, fm = f
    g = float(params.loss.gamma(z))
    ck = -1j * params.kappa
    c0 = -0.5 * g
    return np.array(
        [ck + 2.0 * c0 * fp - ck * fp * fp, c0 - ck * fp, ck * np.exp(2.0 * f0)],
        dtype=complex,
    )


def integrate_sl2(
    params: CouplerParams,
    z0: float,
    z1: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    chart_bound: float = CHART_BOUND,
    n_samples: int = 129,
):
    """Integrate the Riccati system from identity data at z0.

    Returns (coefficients, reached_z).  reached_z < z1 signals that a chart
    bound was hit and the caller must start a new segment there.
    """
    if z1 < z0:
        raise ValueError(f"z1={z1} must not precede z0={z0}")
    if z1 == z0:
        return SL2Coefficients.zeros(z0), z0

    def rhs(t, y):
        return sl2_rhs(t, y, params)

    def chart_f(t, y):
        return chart_bound - max(abs(y[0]), abs(y[2]))

    def chart_f0(t, y):
        return np.log(chart_bound) - abs(y[1].real)

    chart_f.terminal = True
    chart_f0.terminal = True

    sol = solve_ivp(
        rhs,
        (z0, z1),
        np.zeros(3, dtype=complex),
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=True,
        events=[chart_f, chart_f0],
    )
    if sol.status == -1:
        raise RuntimeError(f"sl(2) coefficient integration failed at z={sol.t[-1]}: {sol.message}")
    reached = float(sol.t[-1])
    zs = np.linspace(z0, reached, n_samples)
    vals = sol.sol(zs)
    coeffs = SL2Coefficients(
        z=zs,
        f_plus=vals[0],
        f_zero=vals[1],
        f_minus=vals[2],
        evaluator=sol.sol,
    )
    return coeffs, reached


def integrate_sl2_linear(
    params: CouplerParams,
    z0: float,
    z1: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> np.ndarray:
    """Fundamental 2x2 matrix of the linear system M' = [[c0, c+], [c-, -c0]] M.

    Free of chart blow-up; det M = 1 up to integration error because the
    generator is traceless.
    """
    if z1 < z0:
        raise ValueError(f"z1={z1} must not precede z0={z0}")
    if z1 == z0:
        return np.eye(2, dtype=complex)
    kappa = params.kappa
    gamma = params.loss.gamma

    def rhs(t, y):
        c0 = -0.5 * float(gamma(t))
        ck = -1j * kappa
        m11, m12, m21, m22 = y
        return [
            c0 * m11 + ck * m21,
            c0 * m12 + ck * m22,
            ck * m11 - c0 * m21,
            ck * m12 - c0 * m22,
        ]

    sol = solve_ivp(
        rhs,
        (z0, z1),
        np.array([1, 0, 0, 1], dtype=complex),
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"linear sl(2) integration failed at z={sol.t[-1]}: {sol.message}")
    return sol.y[:, -1].reshape(2, 2)


def f_from_linear(M: np.ndarray):
    """Extract (f+, f0, f-) from the fundamental matrix where M22 != 0.

    f0 uses the principal logarithm, so it can differ from the continuously
    integrated value by 2 pi i once Im f0 wraps.
    """
    M = np.asarray(M)
    if abs(M[1, 1]) == 0.0:
        raise ValueError("chart singular: M22 = 0")
    return M[0, 1] / M[1, 1], -np.log(M[1, 1]), M[1, 0] / M[1, 1]


def _fundamental_entries(f):
    """Top row (M11, M12) of the group element with coefficients f."""
    fp, f0, fm = f
    em = np.exp(-f0)
    return np.exp(f0) + fp * fm * em, fp * em


def integrate_solvable(
    params: CouplerParams,
    sl2_left: SL2Coefficients,
    sl2_right: SL2Coefficients,
    z0: float,
    z1: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    n_samples: int = 129,
) -> SolvableCoefficients:
    """Dissipative weights on [z0, z1] from the interaction-picture system.

    The jump operators transform under the one-sided factors exactly like the
    mode operators, so their coefficients follow from the top rows of the two
    2x2 fundamental matrices (see module docstring).  The sign and transpose
    conventions encoded here are pinned by the unit tests against the explicit
    conjugation path and the brute-force propagator.
    """
    if z1 < z0:
        raise ValueError(f"z1={z1} must not precede z0={z0}")
    if z1 == z0:
        return SolvableCoefficients.zeros(z0)
    for sl2 in (sl2_left, sl2_right):
        if sl2.z_start > z0 + _BOUNDARY_TOL or sl2.z_end < z1 - _BOUNDARY_TOL:
            raise ValueError("sl(2) coefficients do not cover the requested interval")
    gamma = params.loss.gamma

    def rhs(t, y):
        a1 = y[0]
        M11, M12 = _fundamental_entries(sl2_left.evaluate(t))
        N11, N12 = _fundamental_entries(sl2_right.evaluate(t))
        g = float(gamma(t))
        w = 2.0 * g * np.exp(2.0 * a1)
        return [
            -0.5 * g,
            w * M11 * N11,
            w * M12 * N12,
            w * M12 * N11,
            w * M11 * N12,
        ]

    sol = solve_ivp(
        rhs,
        (z0, z1),
        np.zeros(5, dtype=complex),
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=True,
    )
    if not sol.success:
        raise RuntimeError(f"dissipative-weight integration failed at z={sol.t[-1]}: {sol.message}")
    zs = np.linspace(z0, z1, n_samples)
    vals = sol.sol(zs)
    return SolvableCoefficients(
        z=zs,
        a1=vals[0],
        a2=vals[0].copy(),
        a3=vals[1],
        a4=vals[2],
        a5=vals[3],
        a6=vals[4],
    )


def _integrate_segment(
    params: CouplerParams,
    z0: float,
    z1: float,
    rtol: float,
    atol: float,
    chart_bound: float,
    n_samples: int = 129,
):
    """One solver pass for a whole segment: Riccati coefficients and
    dissipative weights integrated jointly, so the weights consume the exact
    local f values instead of a dense interpolant.  Valid for real kappa and
    real loss rate, where the bra-copy coefficients are complex conjugates."""
    if z1 == z0:
        return SL2Coefficients.zeros(z0), SolvableCoefficients.zeros(z0), z0
    kappa = params.kappa
    gamma = params.loss.gamma

    def rhs(t, y):
        fp, f0, fm, a1 = y[0], y[1], y[2], y[3]
        g = float(gamma(t))
        ck = -1j * kappa
        c0 = -0.5 * g
        em = np.exp(-f0)
        M11 = np.exp(f0) + fp * fm * em
        M12 = fp * em
        w = 2.0 * g * np.exp(2.0 * a1)
        return [
            ck + 2.0 * c0 * fp - ck * fp * fp,
            c0 - ck * fp,
            ck * np.exp(2.0 * f0),
            -0.5 * g,
            w * M11 * np.conj(M11),
            w * M12 * np.conj(M12),
            w * M12 * np.conj(M11),
            w * M11 * np.conj(M12),
        ]

    def chart_f(t, y):
        return chart_bound - max(abs(y[0]), abs(y[2]))

    def chart_f0(t, y):
        return np.log(chart_bound) - abs(y[1].real)

    chart_f.terminal = True
    chart_f0.terminal = True

    sol = solve_ivp(
        rhs,
        (z0, z1),
        np.zeros(8, dtype=complex),
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=True,
        events=[chart_f, chart_f0],
    )
    if sol.status == -1:
        raise RuntimeError(f"segment integration failed at z={sol.t[-1]}: {sol.message}")
    reached = float(sol.t[-1])
    zs = np.linspace(z0, reached, n_samples)
    vals = sol.sol(zs)
    vals[:, -1] = sol.y[:, -1]  # endpoint at solver accuracy, not interpolant
    dense = sol.sol
    sl2 = SL2Coefficients(
        z=zs,
        f_plus=vals[0],
        f_zero=vals[1],
        f_minus=vals[2],
        evaluator=lambda s, _d=dense: np.asarray(_d(s))[:3],
    )
    solvable = SolvableCoefficients(
        z=zs,
        a1=vals[3],
        a2=vals[3].copy(),
        a3=vals[4],
        a4=vals[5],
        a5=vals[6],
        a6=vals[7],
    )
    return sl2, solvable, reached


# ----------------------------------------------------------------------
# exponential factors
# ----------------------------------------------------------------------

def _to_dense_or_sparse(mat):
    return mat if sp.issparse(mat) else np.asarray(mat)


def _nilpotent_powers(N):
    powers = []
    P = N.copy()
    for _ in range(64):
        nonzero = P.nnz > 0 if sp.issparse(P) else np.any(P)
        if not nonzero:
            break
        powers.append(P)
        P = P @ N
    else:
        raise RuntimeError("generator is not nilpotent")
    return tuple(powers)


@lru_cache(maxsize=None)
def _factor_structures(n_max: int):
    """Exponential-factor building blocks in the printed product order."""

    def g(lbl):
        return _to_dense_or_sparse(_generator_matrix(lbl, n_max))

    def diag_of(mat):
        return mat.diagonal().copy() if sp.issparse(mat) else np.diag(mat).copy()

    k0_left = diag_of(g("L1+L1-")) - diag_of(g("L2+L2-"))
    k0_right = diag_of(g("R1+R1-")) - diag_of(g("R2+R2-"))
    return (
        ("nil", _nilpotent_powers(g("L1+L2-"))),
        ("diag", k0_left),
        ("nil", _nilpotent_powers(g("L2+L1-"))),
        ("nil", _nilpotent_powers(g("R1+R2-"))),
        ("diag", k0_right),
        ("nil", _nilpotent_powers(g("R2+R1-"))),
        ("diag", diag_of(g("ML"))),
        ("diag", diag_of(g("MR"))),
        ("nil", _nilpotent_powers(g("L1-R1-"))),
        ("nil", _nilpotent_powers(g("L2-R2-"))),
        ("nil", _nilpotent_powers(g("L2-R1-"))),
        ("nil", _nilpotent_powers(g("L1-R2-"))),
    )


def _exp_factor(structure, coeff, sparse_out):
    kind, payload = structure
    if kind == "diag":
        d = np.exp(coeff * payload)
        return sp.diags(d, format="csr") if sparse_out else np.diag(d)
    size = payload[0].shape[0]
    acc = sp.identity(size, format="csr", dtype=complex) if sparse_out else np.eye(size, dtype=complex)
    for k, P in enumerate(payload, start=1):
        acc = acc + (coeff**k / factorial(k)) * P
    return acc


def assemble_propagator(
    sl2_left: SL2Coefficients,
    sl2_right: SL2Coefficients,
    solvable: SolvableCoefficients,
    basis: TwoModeBasis,
) -> Superoperator:
    """Product of the twelve exponential factors at the common endpoint.

    The diagonal factors are exponentiated exactly; the remaining generators
    are nilpotent on the truncated basis, so their exponentials are finite
    polynomial sums, exact to round-off.
    """
    fL = sl2_left.endpoint()
    fR = sl2_right.endpoint()
    coeffs = list(fL) + list(fR) + list(solvable.endpoint())
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("non-finite expansion coefficients")
    structures = _factor_structures(basis.n_max)
    sparse_out = sp.issparse(_generator_matrix("ML", basis.n_max))
    factors = [_exp_factor(s, c, sparse_out) for s, c in zip(structures, coeffs)]
    U = reduce(lambda A, B: A @ B, factors)
    return Superoperator(basis, U, "U_wn")


def solvable_by_conjugation(
    params: CouplerParams,
    sl2_left: SL2Coefficients,
    sl2_right: SL2Coefficients,
    basis: TwoModeBasis,
    z0: float,
    z1: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> SolvableCoefficients:
    """Reference path for the dissipative weights: integrate the full matrix ODE

        U_R' = (U_S^{-1} G_R U_S) U_R,   G_R = 2 gamma L1-R1- - (gamma/2)(ML + MR),

    with the conjugation carried out explicitly on the truncated representation,
    then read the weights off matrix elements.  Slow; used to pin conventions."""
    D = basis.dim
    structures = _factor_structures(basis.n_max)
    one_sided = structures[:6]
    gamma = params.loss.gamma

    def gm(lbl):
        mat = _generator_matrix(lbl, basis.n_max)
        return mat.toarray() if sp.issparse(mat) else np.asarray(mat)

    G_jump = gm("L1-R1-")
    G_mean = gm("ML") + gm("MR")

    def us_pair(t):
        f = np.concatenate([sl2_left.evaluate(t), sl2_right.evaluate(t)])
        mats = [_exp_factor(s, c, False) for s, c in zip(one_sided, f)]
        inv = [_exp_factor(s, -c, False) for s, c in zip(one_sided, f)]
        US = reduce(lambda A, B: A @ B, mats)
        USi = reduce(lambda A, B: A @ B, reversed(inv))
        return US, USi

    def rhs(t, y):
        UR = y.reshape(D * D, D * D)
        g = float(gamma(t))
        GR = 2.0 * g * G_jump - 0.5 * g * G_mean
        US, USi = us_pair(t)
        return (USi @ GR @ US @ UR).ravel()

    sol = solve_ivp(
        rhs,
        (z0, z1),
        np.eye(D * D, dtype=complex).ravel(),
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"conjugation-path integration failed: {sol.message}")
    UR = sol.y[:, -1].reshape(D * D, D * D)

    def dyad(ket, bra):
        return ket + D * bra

    i00 = basis.state_index(0, 0)
    i10 = basis.state_index(1, 0)
    i01 = basis.state_index(0, 1)
    a1 = 0.5 * np.log(UR[dyad(i10, i10), dyad(i10, i10)])
    a3 = UR[dyad(i00, i00), dyad(i10, i10)]
    a4 = UR[dyad(i00, i00), dyad(i01, i01)]
    a5 = UR[dyad(i00, i00), dyad(i01, i10)]
    a6 = UR[dyad(i00, i00), dyad(i10, i01)]
    pack = lambda v: np.array([0.0, v], dtype=complex)
    return SolvableCoefficients(
        z=np.array([z0, z1]),
        a1=pack(a1),
        a2=pack(a1),
        a3=pack(a3),
        a4=pack(a4),
        a5=pack(a5),
        a6=pack(a6),
    )


# ----------------------------------------------------------------------
# segmented propagator
# ----------------------------------------------------------------------

@dataclass
class Segment:
    z0: float
    z1: float
    matrix: object
    sl2: SL2Coefficients = None
    solvable: SolvableCoefficients = None


@dataclass
class SegmentedPropagator:
    """Ordered product of per-segment propagators covering [0, z]."""

    basis: TwoModeBasis
    segments: list = field(default_factory=list)

    def _identity(self):
        D2 = self.basis.dim**2
        if D2 < 400 or not self.segments or not sp.issparse(self.segments[0].matrix):
            return np.eye(D2, dtype=complex)
        return sp.identity(D2, format="csr", dtype=complex)

    @property
    def z_end(self) -> float:
        return self.segments[-1].z1 if self.segments else 0.0

    @property
    def matrix(self):
        return self._prefix()[-1] if self.segments else self._identity()

    def _prefix(self):
        if not hasattr(self, "_cum") or len(self._cum) != len(self.segments):
            cum = []
            acc = None
            for seg in self.segments:
                acc = seg.matrix if acc is None else seg.matrix @ acc
                cum.append(acc)
            self._cum = cum
        return self._cum

    def matrix_to(self, z: float):
        """Partial product up to a segment boundary z."""
        if abs(z) <= _BOUNDARY_TOL:
            return self._identity()
        for k, seg in enumerate(self.segments):
            if abs(seg.z1 - z) <= _BOUNDARY_TOL:
                return self._prefix()[k]
        raise ValueError(f"z={z} is not a segment boundary")

    def trace_defect(self) -> float:
        """Max deviation of the trace functional from invariance."""
        D = self.basis.dim
        t = np.zeros(D * D, dtype=complex)
        t[np.arange(D) * (D + 1)] = 1.0
        res = self.matrix.T @ t - t
        return float(np.max(np.abs(res)))


def propagator(
    params: CouplerParams,
    z: float,
    basis: TwoModeBasis,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    chart_bound: float = CHART_BOUND,
    breakpoints=(),
) -> SegmentedPropagator:
    """Evolution superoperator over [0, z] as a composition of segments.

    A new segment starts whenever a chart bound triggers, at every period
    boundary, and at every requested breakpoint, so partial products at those
    positions are exact segment compositions.
    """
    if z < 0.0:
        raise ValueError(f"z must be non-negative, got {z}")
    prop = SegmentedPropagator(basis)
    if z == 0.0:
        return prop
    T = params.loss.period
    targets = {float(z)}
    k = 1
    while k * T < z - _BOUNDARY_TOL:
        targets.add(k * T)
        k += 1
    for b in breakpoints:
        if _BOUNDARY_TOL < b < z - _BOUNDARY_TOL:
            targets.add(float(b))
    z_cur = 0.0
    for target in sorted(targets):
        while target - z_cur > _BOUNDARY_TOL:
            sl2, solv, reached = _integrate_segment(
                params, z_cur, target, rtol, atol, chart_bound
            )
            right = sl2.conjugate()
            seg_U = assemble_propagator(sl2, right, solv, basis)
            prop.segments.append(Segment(z_cur, reached, seg_U.matrix, sl2, solv))
            if reached - z_cur <= 1e-14 * max(1.0, abs(target)):
                raise RuntimeError(f"segmentation stalled at z={z_cur}")
            z_cur = reached
            if len(prop.segments) > 10000:
                raise RuntimeError("segment count exploded; check the loss profile")
    defect = prop.trace_defect()
    if defect > 1e-6:
        raise RuntimeError(f"propagator lost trace preservation: defect {defect:.3e}")
    return prop
