from __future__ import annotations

import math
from functools import reduce

import numpy as np
import pytest
import scipy.linalg

from firstdetect.errors import AsymmetricInteraction, DimensionOverflow, InvalidSize
from firstdetect.lattice import (
    Geometry,
    LatticeModel,
    chain_hamiltonian,
    evolution,
    flat_index,
    many_body_hamiltonian,
    many_body_unitary,
    on_site_interaction,
    ring_hamiltonian,
    site_occupations,
)
from firstdetect.linalg import unitary_from_hamiltonian
from firstdetect.manybody import all_permutations, permutation_operator


def test_chain_two_sites():
    assert np.array_equal(chain_hamiltonian(2), np.array([[0, -1], [-1, 0]]))


@pytest.mark.parametrize("l", range(2, 13))
def test_chain_spectrum_closed_form(l):
    e = np.linalg.eigvalsh(chain_hamiltonian(l, J=0.7))
    k = np.arange(1, l + 1)
    expected = np.sort(-2 * 0.7 * np.cos(k * math.pi / (l + 1)))
    assert np.allclose(e, expected, atol=1e-10)


def test_chain_structure():
    h = chain_hamiltonian(5, 1.3)
    assert np.all(np.diag(h) == 0)
    assert np.all(np.diag(h, 1) == -1.3) and np.all(np.diag(h, -1) == -1.3)
    assert np.array_equal(h, h.T)
    with pytest.raises(InvalidSize):
        chain_hamiltonian(1)


def test_ring_spectra():
    assert np.allclose(np.linalg.eigvalsh(ring_hamiltonian(3)), [-2, 1, 1])
    assert np.allclose(np.linalg.eigvalsh(ring_hamiltonian(4)), [-2, 0, 0, 2])
    with pytest.raises(InvalidSize):
        ring_hamiltonian(2)


def test_ring_minus_bond_is_chain():
    h = ring_hamiltonian(6, 0.5)
    h[0, 5] = h[5, 0] = 0
    assert np.array_equal(h, chain_hamiltonian(6, 0.5))


def test_lattice_model():
    m = LatticeModel(4, 2.0, "ring")
    assert m.geometry is Geometry.RING
    assert np.array_equal(m.hamiltonian(), ring_hamiltonian(4, 2.0))
    with pytest.raises(ValueError):
        LatticeModel(4, 0.0)
    with pytest.raises(InvalidSize):
        LatticeModel(1)


def test_many_body_unitary_examples():
    rng = np.random.default_rng(0)
    u = unitary_from_hamiltonian(chain_hamiltonian(3), 0.8)
    assert np.array_equal(many_body_unitary(u, 1), u)
    assert np.array_equal(many_body_unitary(np.eye(3), 3), np.eye(27))
    a = scipy.linalg.expm(-1j * (rng.normal(size=(2, 2)) + rng.normal(size=(2, 2)).T))
    u2 = many_body_unitary(a, 2)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for m in range(2):
                    assert abs(u2[2 * i + j, 2 * k + m] - a[i, k] * a[j, m]) <= 1e-15


def test_dimension_cap():
    with pytest.raises(DimensionOverflow):
        many_body_unitary(np.eye(30), 3)
    with pytest.raises(DimensionOverflow):
        many_body_hamiltonian(chain_hamiltonian(30), 3)


def test_many_body_hamiltonian_matches_tensor_exponential():
    h1 = chain_hamiltonian(4)
    assert np.array_equal(many_body_hamiltonian(h1, 1), h1)
    h = many_body_hamiltonian(h1, 2)
    for tau in (0.3, 1.7, 5.0):
        lhs = scipy.linalg.expm(-1j * h * tau)
        rhs = many_body_unitary(scipy.linalg.expm(-1j * h1 * tau), 2)
        assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_on_site_interaction_two_sites():
    u = 0.9
    v = on_site_interaction(2, 2, u)
    assert np.array_equal(v, [u, 0, 0, u])
    h = many_body_hamiltonian(chain_hamiltonian(2), 2, v)
    direct = np.array([
        [u, -1, -1, 0],
        [-1, 0, 0, -1],
        [-1, 0, 0, -1],
        [0, -1, -1, u],
    ])
    assert np.allclose(np.linalg.eigvalsh(h), np.linalg.eigvalsh(direct), atol=1e-12)


def test_asymmetric_interaction_rejected():
    v = np.zeros(9)
    v[flat_index((1, 2), 3)] = 1.0
    with pytest.raises(AsymmetricInteraction):
        many_body_hamiltonian(chain_hamiltonian(3), 2, v)
    with pytest.raises(AsymmetricInteraction):
        many_body_hamiltonian(chain_hamiltonian(3), 2, 1j * np.ones(9))


def test_basis_convention():
    occ = site_occupations(3, 2)
    assert occ.shape == (9, 2)
    assert tuple(occ[0]) == (1, 1) and tuple(occ[1]) == (1, 2) and tuple(occ[3]) == (2, 1)
    for i, row in enumerate(site_occupations(4, 3)):
        assert flat_index(row, 4) == i
        assert i == sum((row[a] - 1) * 4 ** (2 - a) for a in range(3))


@pytest.mark.parametrize("l,N", [(2, 2), (3, 2), (4, 2), (2, 3), (3, 3), (4, 3)])
def test_unitary_commutes_with_permutations(l, N):
    u = many_body_unitary(unitary_from_hamiltonian(chain_hamiltonian(l), 1.1), N)
    for p in all_permutations(N):
        pi = permutation_operator(p, l, N)
        assert np.max(np.abs(pi @ u - u @ pi)) <= 1e-9


def test_product_state_factorizes():
    rng = np.random.default_rng(1)
    u = unitary_from_hamiltonian(chain_hamiltonian(4), 0.6)
    v, w = rng.normal(size=4) + 0j, rng.normal(size=4) + 0j
    lhs = many_body_unitary(u, 2) @ np.kron(v, w)
    assert np.max(np.abs(lhs - np.kron(u @ v, u @ w))) <= 1e-10


def test_evolution_paths_agree():
    model = LatticeModel(3)
    free = evolution(model, 2, 0.9)
    assert free.dimension == 9
    inter = evolution(model, 2, 0.9, interaction=np.zeros(9))
    assert np.max(np.abs(free.U - inter.U)) <= 1e-12
    assert np.max(np.abs(free.U.conj().T @ free.U - np.eye(9))) <= 1e-10
    full = reduce(np.kron, [scipy.linalg.expm(-1j * chain_hamiltonian(3) * 0.9)] * 2)
    assert np.max(np.abs(free.U - full)) <= 1e-12
