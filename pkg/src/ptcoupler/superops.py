"""Matrix representations of the Liouville-space generators of the lossy coupler.

A Liouville vector stacks a density matrix column-major, so the dyad |i><j| sits
at coordinate i + D*j.  The bilinear generators act on dyads as

    Li+Lj-  : apply a_i^dag a_j to the ket index,
    Ri+Rj-  : apply a_i^dag a_j to the bra index (real ladder factors, no
              conjugation enters),
    Li-Rj-  : a_i rho a_j^dag, lowering ket index i and bra index j,
    ML / MR : total photon number of the ket / bra index (diagonal).

The master-equation generator for coupling kappa and loss rate g on mode 1 is

    L = -i kappa (L1+L2- + L2+L1- - R1+R2- - R2+R1-)
        + 2 g L1-R1-  -  g (R1+R1- + L1+L1-).

Matrices are assembled by explicit action on basis dyads; a Kronecker-product
construction from the single-mode ladder matrices is kept in the test suite as
an independent oracle for the index conventions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .fock import TwoModeBasis, dyad_totals

__all__ = [
    "CouplerParams",
    "Superoperator",
    "GENERATOR_LABELS",
    "DENSE_LIMIT",
    "generator",
    "liouvillian",
    "liouvillian_parts",
    "commutator_table",
    "CommutatorReport",
]

# Dense ndarray storage below this Liouville dimension D^2, sparse CSR above.
DENSE_LIMIT = 400

_BILINEARS = [
    f"{side}{i}{'+'}{side}{j}{'-'}" for side in "LR" for i in (1, 2) for j in (1, 2)
]
_JUMPS = [f"L{i}-R{j}-" for i in (1, 2) for j in (1, 2)]
GENERATOR_LABELS = tuple(_BILINEARS + _JUMPS + ["ML", "MR"])

_LABEL_RE = re.compile(r"^(L|R)([12])\+(L|R)([12])-$|^L([12])-R([12])-$")


@dataclass(frozen=True)
class CouplerParams:
    """Coupler rate and loss profile.  kappa is kept explicit even though the
    unit convention sets it to 1; kappa = 0 is allowed for the decoupled-mode
    limits used in the validation suite."""

    kappa: float = 1.0
    loss: object = None

    def __post_init__(self):
        if self.kappa < 0.0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa}")


@dataclass
class Superoperator:
    basis: TwoModeBasis
    matrix: object  # ndarray or scipy.sparse matrix
    label: str = ""

    def toarray(self) -> np.ndarray:
        if sp.issparse(self.matrix):
            return self.matrix.toarray()
        return np.asarray(self.matrix)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ vec


def _ladder_pairs(i: int, j: int, basis: TwoModeBasis):
    """(target, source, coeff) triples of a_i^dag a_j on the Fock basis."""
    pairs = []
    for src, (m, h) in enumerate(basis.states):
        occ = [m, h]
        if occ[j] == 0:
            continue
        coeff = np.sqrt(occ[j])
        occ[j] -= 1
        coeff *= np.sqrt(occ[i] + 1)
        occ[i] += 1
        pairs.append((basis.index[tuple(occ)], src, coeff))
    return pairs


def _lowering_pairs(i: int, basis: TwoModeBasis):
    """(target, source, coeff) triples of a_i on the Fock basis."""
    pairs = []
    for src, (m, h) in enumerate(basis.states):
        occ = [m, h]
        if occ[i] == 0:
            continue
        coeff = np.sqrt(occ[i])
        occ[i] -= 1
        pairs.append((basis.index[tuple(occ)], src, coeff))
    return pairs


def _store(rows, cols, vals, D):
    mat = sp.coo_matrix(
        (vals, (rows, cols)), shape=(D * D, D * D), dtype=complex
    ).tocsr()
    if D * D < DENSE_LIMIT:
        return mat.toarray()
    return mat


@lru_cache(maxsize=None)
def _generator_matrix(label: str, n_max: int):
    basis = TwoModeBasis(n_max)
    D = basis.dim

    if label == "ML":
        ket, _ = dyad_totals(basis)
        diag = ket.astype(complex)
        return np.diag(diag) if D * D < DENSE_LIMIT else sp.diags(diag).tocsr()
    if label == "MR":
        _, bra = dyad_totals(basis)
        diag = bra.astype(complex)
        return np.diag(diag) if D * D < DENSE_LIMIT else sp.diags(diag).tocsr()

    m = _LABEL_RE.match(label)
    if m is None:
        raise ValueError(f"unknown generator label {label!r}")

    rows, cols, vals = [], [], []
    if m.group(5) is not None:
        # jump term Li-Rj-: lower ket index i and bra index j
        i, j = int(m.group(5)) - 1, int(m.group(6)) - 1
        for tk, sk, vk in _lowering_pairs(i, basis):
            for tb, sb, vb in _lowering_pairs(j, basis):
                rows.append(tk + D * tb)
                cols.append(sk + D * sb)
                vals.append(vk * vb)
    else:
        side1, i, side2, j = m.group(1), int(m.group(2)) - 1, m.group(3), int(m.group(4)) - 1
        if side1 != side2:
            raise ValueError(f"unknown generator label {label!r}")
        pairs = _ladder_pairs(i, j, basis)
        if side1 == "L":
            for t, s, v in pairs:
                for b in range(D):
                    rows.append(t + D * b)
                    cols.append(s + D * b)
                    vals.append(v)
        else:
            for t, s, v in pairs:
                for k in range(D):
                    rows.append(k + D * t)
                    cols.append(k + D * s)
                    vals.append(v)
    return _store(rows, cols, vals, D)


def generator(label: str, basis: TwoModeBasis) -> Superoperator:
    """Liouville-space matrix of one generator; see the module docstring for
    the label convention."""
    return Superoperator(basis, _generator_matrix(label, basis.n_max), label)


def liouvillian(params: CouplerParams, gamma_value: float, basis: TwoModeBasis) -> Superoperator:
    """Master-equation generator at a fixed loss rate."""
    if gamma_value < 0.0:
        raise ValueError(f"loss rate must be non-negative, got {gamma_value}")
    coherent, dissipative = liouvillian_parts(params.kappa, basis)
    return Superoperator(
        basis, coherent + gamma_value * dissipative, f"L(gamma={gamma_value})"
    )


def liouvillian_parts(kappa: float, basis: TwoModeBasis):
    """(coherent, dissipative) split with L(z) = coherent + gamma(z) * dissipative."""
    g = lambda lbl: _generator_matrix(lbl, basis.n_max)
    coherent = (-1j * kappa) * (
        g("L1+L2-") + g("L2+L1-") - g("R1+R2-") - g("R2+R1-")
    )
    dissipative = 2.0 * g("L1-R1-") - (g("R1+R1-") + g("L1+L1-"))
    return coherent, dissipative


@dataclass
class CommutatorReport:
    entries: list = field(default_factory=list)  # (name, residual)
    tolerance: float = 1e-12

    @property
    def max_residual(self) -> float:
        return max((r for _, r in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance

    def __str__(self):
        lines = [f"{name}: {res:.3e}" for name, res in self.entries]
        lines.append(f"max residual {self.max_residual:.3e} (tol {self.tolerance:.1e})")
        return "\n".join(lines)


def commutator_table(basis: TwoModeBasis, tolerance: float = 1e-12) -> CommutatorReport:
    """Verify the commutation relations the factorised propagator relies on.

    Residuals are measured on the interior dyads (ket and bra totals at most
    n_max - 1) where truncation artifacts cannot appear.
    """
    if basis.n_max < 2:
        raise ValueError("commutator verification needs n_max >= 2")

    def g(lbl):
        mat = _generator_matrix(lbl, basis.n_max)
        return mat.toarray() if sp.issparse(mat) else np.asarray(mat)

    KpL, KmL = g("L1+L2-"), g("L2+L1-")
    K0L = g("L1+L1-") - g("L2+L2-")
    KpR, KmR = g("R1+R2-"), g("R2+R1-")
    K0R = g("R1+R1-") - g("R2+R2-")
    ML, MR = g("ML"), g("MR")
    jumps = {lbl: g(lbl) for lbl in _JUMPS}

    ket, bra = dyad_totals(basis)
    interior = (ket <= basis.n_max - 1) & (bra <= basis.n_max - 1)

    def comm(a, b):
        return a @ b - b @ a

    def residual(mat):
        return float(np.max(np.abs(mat[:, interior]))) if interior.any() else 0.0

    report = CommutatorReport(tolerance=tolerance)
    checks = [
        ("[K+, K-] - K0 (left)", comm(KpL, KmL) - K0L),
        ("[K0, K+] - 2K+ (left)", comm(K0L, KpL) - 2.0 * KpL),
        ("[K0, K-] + 2K- (left)", comm(K0L, KmL) + 2.0 * KmL),
        ("[K+, K-] - K0 (right)", comm(KpR, KmR) - K0R),
        ("[K0, K+] - 2K+ (right)", comm(K0R, KpR) - 2.0 * KpR),
        ("[K0, K-] + 2K- (right)", comm(K0R, KmR) + 2.0 * KmR),
    ]
    for name_l, left in (("K+", KpL), ("K0", K0L), ("K-", KmL)):
        for name_r, right in (("K+~", KpR), ("K0~", K0R), ("K-~", KmR)):
            checks.append((f"[{name_l}, {name_r}] (left/right)", comm(left, right)))
    labels = list(jumps)
    for a in range(len(labels)):
        for b in range(a + 1, len(labels)):
            checks.append(
                (f"[{labels[a]}, {labels[b]}]", comm(jumps[labels[a]], jumps[labels[b]]))
            )
    for lbl, J in jumps.items():
        checks.append((f"[ML, {lbl}] + {lbl}", comm(ML, J) + J))
        checks.append((f"[MR, {lbl}] + {lbl}", comm(MR, J) + J))
    checks.append(("[ML, K+] (left)", comm(ML, KpL)))
    checks.append(("[MR, K+~] (right)", comm(MR, KpR)))

    for name, mat in checks:
        report.entries.append((name, residual(mat)))
    return report
