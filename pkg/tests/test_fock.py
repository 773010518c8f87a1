import numpy as np
import pytest

from ptcoupler.fock import (
    DensityMatrix,
    LiouvilleVector,
    TwoModeBasis,
    build_basis,
    devectorize,
    dyad_totals,
    fock_state,
    occupation,
    occupation_labels,
    superposition_state,
    vectorize,
)


def test_dimension_formula():
    for n_max in range(11):
        basis = build_basis(n_max)
        assert basis.dim == (n_max + 1) * (n_max + 2) // 2


def test_vacuum_basis():
    basis = build_basis(0)
    assert basis.dim == 1
    assert basis.states == ((0, 0),)


def test_single_photon_ordering():
    basis = build_basis(1)
    assert basis.states == ((0, 0), (1, 0), (0, 1))


def test_three_photon_dimension():
    assert build_basis(3).dim == 10


def test_index_roundtrip():
    basis = build_basis(4)
    for i, (m, h) in enumerate(basis.states):
        assert basis.state_index(m, h) == i


def test_negative_nmax_rejected():
    with pytest.raises(ValueError):
        build_basis(-1)


def test_state_index_out_of_range():
    basis = build_basis(2)
    with pytest.raises(ValueError):
        basis.state_index(2, 1)


def test_annihilation_action():
    basis = build_basis(3)
    a1 = basis.annihilation(0)
    src = basis.state_index(2, 1)
    dst = basis.state_index(1, 1)
    assert a1[dst, src] == pytest.approx(np.sqrt(2))
    # commutator holds on the interior (raising clips at the top sector)
    a2 = basis.annihilation(1)
    comm = a1 @ a2.conj().T - a2.conj().T @ a1
    interior = basis.totals <= basis.n_max - 1
    assert np.max(np.abs(comm[:, interior])) < 1e-14


def test_vectorize_unit_dyad():
    basis = build_basis(2)
    v = vectorize(fock_state(basis, 0, 0)).data
    expected = np.zeros(basis.dim**2)
    expected[0] = 1.0
    np.testing.assert_allclose(v, expected)


def test_vectorize_roundtrip_random():
    basis = build_basis(3)
    rng = np.random.default_rng(7)
    for _ in range(20):
        A = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
        rho = DensityMatrix(basis, A + A.conj().T)
        back = devectorize(vectorize(rho))
        np.testing.assert_array_equal(back.elements, rho.elements)


def test_vectorize_additive():
    basis = build_basis(2)
    rng = np.random.default_rng(8)
    A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    B = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    va = vectorize(DensityMatrix(basis, A)).data
    vb = vectorize(DensityMatrix(basis, B)).data
    vab = vectorize(DensityMatrix(basis, A + B)).data
    np.testing.assert_allclose(vab, va + vb, atol=0)


def test_vector_dimension_mismatch():
    basis = build_basis(1)
    with pytest.raises(ValueError):
        LiouvilleVector(basis, np.zeros(4))
    with pytest.raises(ValueError):
        DensityMatrix(basis, np.zeros((2, 2)))


def test_occupation_pure_state():
    basis = build_basis(3)
    rho = fock_state(basis, 0, 3)
    assert occupation(rho, 3, 3) == pytest.approx(1.0)
    assert occupation(rho, 3, 0) == pytest.approx(0.0)


def test_occupation_of_superposition_input():
    basis = build_basis(3)
    rho = superposition_state(basis, 3)
    assert occupation(rho, 3, 0) == pytest.approx(0.5)
    assert occupation(rho, 3, 3) == pytest.approx(0.5)
    others = [
        occupation(rho, n, h)
        for n in range(4)
        for h in range(n + 1)
        if (n, h) not in ((3, 0), (3, 3))
    ]
    np.testing.assert_allclose(others, 0.0, atol=1e-15)


def test_occupation_completeness():
    basis = build_basis(3)
    rng = np.random.default_rng(9)
    A = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
    rho = DensityMatrix(basis, A @ A.conj().T)
    rho = DensityMatrix(basis, rho.elements / rho.trace())
    total = sum(occupation(rho, n, h) for n, h in occupation_labels(basis))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_occupation_range_checks():
    basis = build_basis(2)
    rho = fock_state(basis, 0, 0)
    with pytest.raises(ValueError):
        occupation(rho, 3, 0)
    with pytest.raises(ValueError):
        occupation(rho, 1, 2)


def test_superposition_is_pure_with_coherences():
    basis = build_basis(3)
    for n in (1, 2, 3):
        rho = superposition_state(basis, n)
        assert rho.trace() == pytest.approx(1.0)
        assert rho.purity() == pytest.approx(1.0)
        i = basis.state_index(0, n)
        j = basis.state_index(n, 0)
        assert rho.elements[i, j] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        superposition_state(basis, 4)


def test_validate_flags_bad_states():
    basis = build_basis(1)
    good = fock_state(basis, 1, 0)
    good.validate()
    bad = DensityMatrix(basis, good.elements + 1e-6 * np.array([[0, 1j, 0], [0, 0, 0], [0, 0, 0]]))
    with pytest.raises(ValueError):
        bad.validate()


def test_dyad_totals_layout():
    basis = build_basis(2)
    ket, bra = dyad_totals(basis)
    D = basis.dim
    for p in range(D * D):
        i, j = p % D, p // D
        assert ket[p] == basis.totals[i]
        assert bra[p] == basis.totals[j]
