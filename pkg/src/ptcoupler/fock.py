"""Truncated two-mode Fock space, density matrices, and Liouville-space vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TwoModeBasis",
    "DensityMatrix",
    "LiouvilleVector",
    "build_basis",
    "vectorize",
    "devectorize",
    "dyad_totals",
    "occupation",
    "occupation_labels",
    "fock_state",
    "superposition_state",
]


class TwoModeBasis:
    """Ordered two-mode Fock basis {|m, h> : m + h <= n_max}.

    ``m`` counts photons in the lossy waveguide, ``h`` photons in the lossless
    one.  States are sorted by total photon number n = m + h, then by ascending
    ``h`` inside each sector, so every generator of the dynamics is block
    triangular with respect to the photon sectors.

    The truncation is exact rather than approximate: the coupler Hamiltonian
    conserves n and the loss channel only lowers it, so a state holding at most
    n_max photons never leaks out of the basis.
    """

    def __init__(self, n_max: int):
        if n_max < 0:
            raise ValueError(f"n_max must be non-negative, got {n_max}")
        self.n_max = int(n_max)
        self.states = tuple(
            (n - h, h) for n in range(self.n_max + 1) for h in range(n + 1)
        )
        self.index = {state: i for i, state in enumerate(self.states)}
        self.totals = np.array([m + h for m, h in self.states], dtype=np.intp)

    @property
    def dim(self) -> int:
        return len(self.states)

    def state_index(self, m: int, h: int) -> int:
        try:
            return self.index[(m, h)]
        except KeyError:
            raise ValueError(
                f"state |{m}, {h}> outside basis with n_max={self.n_max}"
            ) from None

    def annihilation(self, mode: int) -> np.ndarray:
        """Matrix of a_1 (mode=0) or a_2 (mode=1) on the truncated basis."""
        if mode not in (0, 1):
            raise ValueError(f"mode must be 0 or 1, got {mode}")
        a = np.zeros((self.dim, self.dim), dtype=complex)
        for src, (m, h) in enumerate(self.states):
            occ = [m, h]
            if occ[mode] == 0:
                continue
            coeff = np.sqrt(occ[mode])
            occ[mode] -= 1
            a[self.index[tuple(occ)], src] = coeff
        return a

    def __eq__(self, other):
        return isinstance(other, TwoModeBasis) and other.n_max == self.n_max

    def __hash__(self):
        return hash(("TwoModeBasis", self.n_max))

    def __repr__(self):
        return f"TwoModeBasis(n_max={self.n_max}, dim={self.dim})"


def build_basis(n_max: int) -> TwoModeBasis:
    return TwoModeBasis(n_max)


@dataclass
class DensityMatrix:
    """Density matrix on a :class:`TwoModeBasis`."""

    basis: TwoModeBasis
    elements: np.ndarray

    def __post_init__(self):
        self.elements = np.asarray(self.elements, dtype=complex)
        D = self.basis.dim
        if self.elements.shape != (D, D):
            raise ValueError(
                f"elements shape {self.elements.shape} does not match basis dim {D}"
            )

    def trace(self) -> complex:
        return complex(np.trace(self.elements))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.elements - self.elements.conj().T)))

    def min_eigenvalue(self) -> float:
        sym = 0.5 * (self.elements + self.elements.conj().T)
        return float(np.linalg.eigvalsh(sym)[0])

    def purity(self) -> float:
        return float(np.real(np.trace(self.elements @ self.elements)))

    def hermitized(self) -> "DensityMatrix":
        return DensityMatrix(self.basis, 0.5 * (self.elements + self.elements.conj().T))

    def validate(self, trace_tol=1e-9, herm_tol=1e-12, psd_tol=1e-9) -> "DensityMatrix":
        """Check trace normalisation, Hermiticity, and positivity; raise on failure."""
        defect = self.hermiticity_defect()
        if defect > herm_tol:
            raise ValueError(f"density matrix not Hermitian: defect {defect:.3e}")
        tr = self.trace()
        if abs(tr - 1.0) > trace_tol:
            raise ValueError(f"trace {tr} deviates from 1 beyond {trace_tol:.1e}")
        lam = self.min_eigenvalue()
        if lam < -psd_tol:
            raise ValueError(f"negative eigenvalue {lam:.3e} below -{psd_tol:.1e}")
        return self


@dataclass
class LiouvilleVector:
    """Column-major stacking of a density matrix, v[i + D*j] = rho[i, j]."""

    basis: TwoModeBasis
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != (self.basis.dim**2,):
            raise ValueError(
                f"vector length {self.data.shape} does not match dim {self.basis.dim}^2"
            )


def vectorize(rho: DensityMatrix) -> LiouvilleVector:
    return LiouvilleVector(rho.basis, rho.elements.flatten(order="F"))


def devectorize(vec: LiouvilleVector) -> DensityMatrix:
    D = vec.basis.dim
    return DensityMatrix(vec.basis, vec.data.reshape((D, D), order="F"))


def dyad_totals(basis: TwoModeBasis):
    """Ket and bra photon totals for each Liouville coordinate.

    Coordinate p = i + D*j belongs to the dyad |i><j|; returns the arrays
    (ket_total[p], bra_total[p]).
    """
    t = basis.totals
    ket = np.tile(t, basis.dim)
    bra = np.repeat(t, basis.dim)
    return ket, bra


def occupation_labels(basis: TwoModeBasis):
    """(n, h) labels, ordered like the basis states |n-h, h>."""
    return [(m + h, h) for m, h in basis.states]


def occupation(rho: DensityMatrix, n: int, h: int) -> float:
    """Population <n-h, h| rho |n-h, h> of the Fock state with n total photons,
    h of them in the lossless waveguide."""
    basis = rho.basis
    if not (0 <= h <= n <= basis.n_max):
        raise ValueError(f"occupation indices (n={n}, h={h}) out of range")
    idx = basis.state_index(n - h, h)
    val = rho.elements[idx, idx]
    if abs(val.imag) > 1e-12:
        raise ValueError(f"occupation has imaginary part {val.imag:.3e}")
    return float(val.real)


def fock_state(basis: TwoModeBasis, m: int, h: int) -> DensityMatrix:
    """Pure Fock state |m, h><m, h|."""
    idx = basis.state_index(m, h)
    elements = np.zeros((basis.dim, basis.dim), dtype=complex)
    elements[idx, idx] = 1.0
    return DensityMatrix(basis, elements)


def superposition_state(basis: TwoModeBasis, n: int) -> DensityMatrix:
    """Pure state (|0, n> + |n, 0>)/sqrt(2) as a density matrix."""
    if not (1 <= n <= basis.n_max):
        raise ValueError(f"superposition order n={n} outside [1, {basis.n_max}]")
    psi = np.zeros(basis.dim, dtype=complex)
    psi[basis.state_index(0, n)] = 1.0 / np.sqrt(2.0)
    psi[basis.state_index(n, 0)] = 1.0 / np.sqrt(2.0)
    return DensityMatrix(basis, np.outer(psi, psi.conj()))
