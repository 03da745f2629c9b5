"""Tight-binding lattices and their lift to N distinguishable tensor factors.

Basis convention: the N-particle basis state ``|e_1 ... e_N>`` (sites
1-based) sits at flat index ``sum_a (e_a - 1) * l**(N - a)``, i.e. the
leftmost particle owns the slowest-varying index, as in ``numpy.kron``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import reduce
from itertools import permutations

import numpy as np

from . import tolerances as tol
from .errors import AsymmetricInteraction, DimensionOverflow, InvalidSize, NotHermitian
from .linalg import as_matrix, hermitian_eig, is_hermitian, unitary_from_hamiltonian


class Geometry(str, enum.Enum):
    CHAIN = "chain"
    RING = "ring"


@dataclass(frozen=True)
class LatticeModel:
    sites: int
    J: float = 1.0
    geometry: Geometry = Geometry.CHAIN

    def __post_init__(self):
        object.__setattr__(self, "geometry", Geometry(self.geometry))
        min_sites = 3 if self.geometry is Geometry.RING else 2
        if self.sites < min_sites:
            raise InvalidSize(f"{self.geometry.value} needs at least {min_sites} sites")
        if not self.J > 0:
            raise ValueError("tunneling J must be positive")

    def hamiltonian(self) -> np.ndarray:
        if self.geometry is Geometry.RING:
            return ring_hamiltonian(self.sites, self.J)
        return chain_hamiltonian(self.sites, self.J)


def chain_hamiltonian(l: int, J: float = 1.0) -> np.ndarray:
    """Open chain with hopping ``-J`` between neighbouring sites."""
    if l < 2:
        raise InvalidSize("a chain needs l >= 2 sites")
    off = -J * np.ones(l - 1)
    return (np.diag(off, 1) + np.diag(off, -1)).astype(np.complex128)


def ring_hamiltonian(l: int, J: float = 1.0) -> np.ndarray:
    """Periodic chain: the open chain plus the bond ``l <-> 1``."""
    if l < 3:
        raise InvalidSize("a ring needs l >= 3 sites")
    h = chain_hamiltonian(l, J)
    h[0, l - 1] = h[l - 1, 0] = -J
    return h


def check_dimension(l: int, N: int, cap: int = tol.DIMENSION_CAP) -> int:
    dim = l**N
    if dim > cap:
        raise DimensionOverflow(f"l**N = {dim} exceeds the dimension cap {cap}")
    return dim


def many_body_unitary(u1p, N: int, *, cap: int = tol.DIMENSION_CAP) -> np.ndarray:
    """N-fold Kronecker power of a single-particle unitary."""
    u1p = as_matrix(u1p)
    if N < 1:
        raise ValueError("N must be >= 1")
    check_dimension(u1p.shape[0], N, cap)
    return reduce(np.kron, [u1p] * N)


def _embed(op: np.ndarray, a: int, N: int) -> np.ndarray:
    l = op.shape[0]
    left = np.eye(l**a)
    right = np.eye(l ** (N - a - 1))
    return np.kron(np.kron(left, op), right)


def site_occupations(l: int, N: int) -> np.ndarray:
    """Integer array of shape ``(l**N, N)``: 1-based site of each particle."""
    idx = np.arange(l**N)
    digits = np.empty((l**N, N), dtype=np.int64)
    for a in range(N - 1, -1, -1):
        digits[:, a] = idx % l
        idx = idx // l
    return digits + 1


def flat_index(sites, l: int) -> int:
    """Flat index of the basis state with the given 1-based site labels."""
    i = 0
    for s in sites:
        i = i * l + (int(s) - 1)
    return i


def _check_interaction(v: np.ndarray, l: int, N: int) -> None:
    occ = site_occupations(l, N)
    for perm in permutations(range(N)):
        if list(perm) == list(range(N)):
            continue
        permuted = np.array([flat_index(row, l) for row in occ[:, perm]])
        if np.max(np.abs(v - v[permuted])) > tol.INTERACTION_SYMMETRY_TOL:
            raise AsymmetricInteraction(
                f"interaction is not symmetric under particle permutation {perm}"
            )


def many_body_hamiltonian(h1p, N: int, interaction=None, *, cap: int = tol.DIMENSION_CAP) -> np.ndarray:
    """Kronecker sum of ``h1p`` over N particles plus a diagonal interaction.

    ``interaction`` is a real vector of length ``l**N`` (density-density
    energies in the tensor basis); it must be invariant under relabelling
    the particles.
    """
    h1p = as_matrix(h1p)
    if not is_hermitian(h1p):
        raise NotHermitian("single-particle Hamiltonian is not Hermitian")
    l = h1p.shape[0]
    check_dimension(l, N, cap)
    h = sum(_embed(h1p, a, N) for a in range(N))
    if interaction is not None:
        v = np.asarray(interaction)
        if np.iscomplexobj(v):
            if np.max(np.abs(v.imag)) > tol.INTERACTION_SYMMETRY_TOL:
                raise AsymmetricInteraction("interaction must be real")
            v = v.real
        v = v.astype(float).ravel()
        if v.shape[0] != l**N:
            raise ValueError(f"interaction must have length {l**N}")
        _check_interaction(v, l, N)
        h = h + np.diag(v)
    return np.asarray(h, dtype=np.complex128)


def on_site_interaction(l: int, N: int, u: float) -> np.ndarray:
    """Energy ``u`` for every pair of particles sharing a site."""
    occ = site_occupations(l, N)
    pairs = np.zeros(l**N)
    for a in range(N):
        for b in range(a + 1, N):
            pairs += occ[:, a] == occ[:, b]
    return u * pairs


@dataclass(frozen=True)
class ManyBodyEvolution:
    """Many-body Hamiltonian together with the one-step propagator at ``tau``."""

    N: int
    l: int
    H: np.ndarray
    U: np.ndarray
    tau: float
    spectrum: object = field(default=None, repr=False, compare=False)

    @property
    def dimension(self) -> int:
        return self.l**self.N


def evolution(model: LatticeModel, N: int, tau: float, interaction=None) -> ManyBodyEvolution:
    """Build H and U for ``N`` particles on ``model``.

    Without interaction U is the Kronecker power of the single-particle
    propagator; otherwise it is exponentiated from the full Hamiltonian.
    """
    h1p = model.hamiltonian()
    h = many_body_hamiltonian(h1p, N, interaction)
    if interaction is None:
        u = many_body_unitary(unitary_from_hamiltonian(h1p, tau), N)
        eig = None
    else:
        eig = hermitian_eig(h)
        u = unitary_from_hamiltonian(eig, tau)
    return ManyBodyEvolution(N=N, l=model.sites, H=h, U=u, tau=tau, spectrum=eig)
