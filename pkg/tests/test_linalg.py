from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from firstdetect.errors import DefectiveMatrix, EmptySet, NotHermitian
from firstdetect.lattice import chain_hamiltonian
from firstdetect.linalg import (
    as_matrix,
    general_eig,
    hermitian_eig,
    matrix_power,
    orthonormal_basis,
    orthonormal_projector,
    unitary_from_hamiltonian,
)


def random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return a + a.conj().T


def random_contraction(rng, n, radius=0.95):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return radius * a / np.linalg.norm(a, 2)


def test_as_matrix_rejects_bad_input():
    with pytest.raises(ValueError):
        as_matrix(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        as_matrix([[np.nan]])
    with pytest.raises(ValueError):
        as_matrix(np.zeros((0, 0)))


def test_hermitian_eig_zero_matrix():
    eig = hermitian_eig(np.zeros((3, 3)))
    assert np.allclose(eig.energies, 0.0)
    assert np.allclose(eig.eigenvectors.conj().T @ eig.eigenvectors, np.eye(3), atol=1e-10)


def test_hermitian_eig_chain_spectrum():
    eig = hermitian_eig(chain_hamiltonian(3))
    assert np.allclose(eig.energies, [-math.sqrt(2), 0.0, math.sqrt(2)], atol=1e-12)


def test_hermitian_eig_diagonal():
    eig = hermitian_eig(np.diag([1.0, 2.0, 5.0]))
    assert np.allclose(eig.energies, [1, 2, 5])
    assert np.allclose(np.abs(eig.eigenvectors), np.eye(3))


def test_hermitian_eig_invariants_random():
    rng = np.random.default_rng(1)
    for n in (2, 5, 17):
        h = random_hermitian(rng, n)
        eig = hermitian_eig(h)
        assert np.max(np.abs(eig.reconstruct() - h)) <= 1e-10 * np.max(np.abs(h))
        v = eig.eigenvectors
        assert np.max(np.abs(v.conj().T @ v - np.eye(n))) <= 1e-10
        assert np.all(np.diff(eig.energies) >= 0)


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        hermitian_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_general_eig_identity():
    eig = general_eig(np.eye(4))
    assert np.allclose(eig.eigenvalues, 1.0)


def test_general_eig_jordan_block_is_defective():
    with pytest.raises(DefectiveMatrix):
        general_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_general_eig_random_unit_disk():
    rng = np.random.default_rng(2)
    m = rng.uniform(-0.7, 0.7, (5, 5)) + 1j * rng.uniform(-0.7, 0.7, (5, 5))
    eig = general_eig(m)
    assert np.max(np.abs(eig.reconstruct() - m)) <= 1e-8 * max(1.0, np.max(np.abs(m)))
    assert np.max(np.abs(eig.right_vectors @ eig.inverse_vectors - np.eye(5))) <= 1e-8
    assert np.allclose(np.linalg.norm(eig.right_vectors, axis=0), 1.0)


def test_general_eig_sorted_by_modulus_then_phase():
    m = np.diag([0.5, 1j, -1.0, 0.5j, 1.0])
    eig = general_eig(m)
    mods = np.abs(eig.eigenvalues)
    assert np.all(np.diff(mods) <= 1e-12)
    # among the unit-modulus ones the phase increases
    top = eig.eigenvalues[:3]
    assert np.all(np.diff(np.angle(top)) > 0)


def test_general_eig_deterministic():
    rng = np.random.default_rng(3)
    m = random_contraction(rng, 6)
    a, b = general_eig(m), general_eig(m.copy())
    assert np.array_equal(a.eigenvalues, b.eigenvalues)


def test_general_eig_hermitian_input_matches_hermitian_eig():
    rng = np.random.default_rng(4)
    h = random_hermitian(rng, 6)
    w = np.sort(general_eig(h).eigenvalues.real)
    assert np.allclose(w, hermitian_eig(h).energies, atol=1e-8)


def test_matrix_power_small_k():
    rng = np.random.default_rng(5)
    m = random_contraction(rng, 3)
    eig = general_eig(m)
    assert np.array_equal(matrix_power(eig, 0), np.eye(3))
    assert np.max(np.abs(matrix_power(eig, 1) - m)) <= 1e-10
    assert np.max(np.abs(matrix_power(eig, 20) - np.linalg.matrix_power(m, 20))) <= 1e-7 * 20
    with pytest.raises(ValueError):
        matrix_power(eig, -1)


def test_matrix_power_semigroup():
    rng = np.random.default_rng(6)
    eig = general_eig(random_contraction(rng, 4))
    for j, k in [(0, 7), (3, 50), (50, 50), (17, 1)]:
        lhs = matrix_power(eig, j + k)
        rhs = matrix_power(eig, j) @ matrix_power(eig, k)
        assert np.max(np.abs(lhs - rhs)) <= 1e-7


def test_unitary_from_hamiltonian_examples():
    h = chain_hamiltonian(3)
    assert np.array_equal(unitary_from_hamiltonian(h, 0.0), np.eye(3))
    u = unitary_from_hamiltonian(h, 2 * math.pi / math.sqrt(2))
    assert np.max(np.abs(u - np.eye(3))) <= 1e-9
    e = np.array([0.3, -1.2, 2.0])
    assert np.allclose(unitary_from_hamiltonian(np.diag(e), 1.7), np.diag(np.exp(-1j * e * 1.7)))
    with pytest.raises(ValueError):
        unitary_from_hamiltonian(h, -1.0)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 6), tau=st.floats(0.0, 20.0), seed=st.integers(0, 2**31 - 1))
def test_unitary_preserves_norm(n, tau, seed):
    rng = np.random.default_rng(seed)
    u = unitary_from_hamiltonian(random_hermitian(rng, n), tau)
    assert np.max(np.abs(u.conj().T @ u - np.eye(n))) <= 1e-10
    v = rng.normal(size=(n, 100)) + 1j * rng.normal(size=(n, 100))
    assert np.allclose(np.linalg.norm(u @ v, axis=0), np.linalg.norm(v, axis=0), rtol=0, atol=1e-10 * np.max(np.linalg.norm(v, axis=0)))


def test_orthonormal_projector_examples():
    e1 = np.array([1.0, 0, 0])
    assert np.allclose(orthonormal_projector([e1]), np.diag([1, 0, 0]))
    v = np.array([1.0, 2.0, -1.0j])
    p = orthonormal_projector([v, 2 * v])
    assert np.linalg.matrix_rank(p, tol=1e-8) == 1
    a, b = np.array([1.0, 1.0, 0]), np.array([1.0, 0.0, 1.0])
    p = orthonormal_projector([a, b])
    assert np.linalg.matrix_rank(p, tol=1e-8) == 2
    assert np.allclose(p @ a, a) and np.allclose(p @ b, b)
    with pytest.raises(EmptySet):
        orthonormal_projector([])


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 6), k=st.integers(1, 4), seed=st.integers(0, 2**31 - 1))
def test_orthonormal_projector_properties(n, k, seed):
    rng = np.random.default_rng(seed)
    vs = [rng.normal(size=n) + 1j * rng.normal(size=n) for _ in range(k)]
    p = orthonormal_projector(vs)
    assert np.max(np.abs(p - p.conj().T)) <= 1e-10
    assert np.max(np.abs(p @ p - p)) <= 1e-10
    assert np.linalg.matrix_rank(p, tol=1e-8) == min(n, k)
    q = orthonormal_projector(vs[::-1])
    assert np.max(np.abs(p - q)) <= 1e-9


def test_orthonormal_basis_accepts_columns():
    b = orthonormal_basis(np.eye(3)[:, :2])
    assert b.shape == (3, 2)
