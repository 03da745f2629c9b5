"""(Anti)symmetrized initial states of partially distinguishable particles.

Particles start one per site on the sites listed in ``mode_assignment`` and
carry pure internal states ``|phi_a>``.  Only their Gram matrix
``G[a, b] = <phi_a|phi_b>`` enters the reduced many-body density matrix

    rho = sum_{pi, pi'} rho_{pi, pi'} |E_pi><E_pi'|,
    rho_{pi, pi'} = s(pi) s(pi') / N! * prod_a G[pi'(a), pi(a)],

where ``s`` is 1 for bosons and the permutation sign for fermions.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from functools import reduce
from itertools import permutations

import numpy as np

from . import tolerances as tol
from .errors import InvalidGram, InvalidSize, ZeroNorm
from .lattice import check_dimension, flat_index, site_occupations

log = logging.getLogger(__name__)


class Species(str, enum.Enum):
    BOSON = "boson"
    FERMION = "fermion"


@dataclass(frozen=True)
class Permutation:
    """Bijection of particle labels, stored 0-based: ``images[a] = pi(a)``."""

    images: tuple

    def __post_init__(self):
        imgs = tuple(int(i) for i in self.images)
        if sorted(imgs) != list(range(len(imgs))):
            raise ValueError(f"{self.images} is not a permutation")
        object.__setattr__(self, "images", imgs)

    @classmethod
    def identity(cls, N: int) -> "Permutation":
        return cls(tuple(range(N)))

    @classmethod
    def from_one_based(cls, mapping) -> "Permutation":
        return cls(tuple(int(m) - 1 for m in mapping))

    @property
    def N(self) -> int:
        return len(self.images)

    @property
    def sign(self) -> int:
        seen = [False] * self.N
        s = 1
        for start in range(self.N):
            if seen[start]:
                continue
            length = 0
            j = start
            while not seen[j]:
                seen[j] = True
                j = self.images[j]
                length += 1
            if length % 2 == 0:
                s = -s
        return s

    def __call__(self, a: int) -> int:
        return self.images[a]

    def compose(self, other: "Permutation") -> "Permutation":
        """``self o other``: apply ``other`` first."""
        return Permutation(tuple(self.images[other.images[a]] for a in range(self.N)))

    def inverse(self) -> "Permutation":
        inv = [0] * self.N
        for a, b in enumerate(self.images):
            inv[b] = a
        return Permutation(tuple(inv))

    def apply(self, seq) -> tuple:
        """Reorder a sequence as ``(seq[pi(0)], ..., seq[pi(N-1)])``."""
        return tuple(seq[i] for i in self.images)


def all_permutations(N: int) -> list[Permutation]:
    return [Permutation(p) for p in permutations(range(N))]


def permutation_operator(perm: Permutation, l: int, N: int | None = None) -> np.ndarray:
    """0/1 matrix sending ``|e_1 ... e_N>`` to ``|e_pi(1) ... e_pi(N)>``.

    With this convention ``Pi(p) @ Pi(q) == Pi(q o p)``.
    """
    N = perm.N if N is None else N
    if N != perm.N:
        raise ValueError("permutation size does not match N")
    if l < 1:
        raise InvalidSize("l must be positive")
    occ = site_occupations(l, N)
    target = (occ[:, list(perm.images)] - 1) @ (l ** np.arange(N - 1, -1, -1))
    m = np.zeros((l**N, l**N), dtype=np.complex128)
    m[target, np.arange(l**N)] = 1.0
    return m


def symmetric_projector(l: int, N: int) -> np.ndarray:
    ops = [permutation_operator(p, l, N) for p in all_permutations(N)]
    return sum(ops) / math.factorial(N)


@dataclass(frozen=True)
class InternalGram:
    """Overlap matrix of the particles' internal states."""

    G: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.G, dtype=np.complex128)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise InvalidGram("Gram matrix must be square")
        if np.max(np.abs(g - g.conj().T)) > tol.GRAM_PSD_TOL:
            raise InvalidGram("Gram matrix is not Hermitian")
        if np.max(np.abs(np.diag(g) - 1.0)) > tol.GRAM_PSD_TOL:
            raise InvalidGram("Gram matrix must have unit diagonal")
        if np.min(np.linalg.eigvalsh(0.5 * (g + g.conj().T))) < -tol.GRAM_PSD_TOL:
            raise InvalidGram("Gram matrix is not positive semidefinite")
        object.__setattr__(self, "G", g)

    @property
    def N(self) -> int:
        return self.G.shape[0]

    @classmethod
    def from_vectors(cls, vectors) -> "InternalGram":
        vs = [np.asarray(v, dtype=np.complex128) for v in vectors]
        vs = [v / np.linalg.norm(v) for v in vs]
        a = np.column_stack(vs)
        return cls(a.conj().T @ a)

    @classmethod
    def distinguishable(cls, N: int) -> "InternalGram":
        return cls(np.eye(N))

    @classmethod
    def indistinguishable(cls, N: int) -> "InternalGram":
        return cls(np.ones((N, N)))

    @classmethod
    def uniform(cls, N: int, overlap: complex) -> "InternalGram":
        """All pairwise overlaps equal to ``overlap`` (real ``overlap`` in [-1/(N-1), 1])."""
        g = np.full((N, N), overlap, dtype=np.complex128)
        g[np.tril_indices(N, -1)] = np.conj(overlap)
        np.fill_diagonal(g, 1.0)
        return cls(g)


@dataclass(frozen=True)
class ManyBodyState:
    species: Species
    N: int
    l: int
    mode_assignment: tuple
    coeffs: np.ndarray
    rho: np.ndarray
    normalization: float = 1.0
    perms: list = field(default_factory=list, repr=False, compare=False)

    @property
    def dimension(self) -> int:
        return self.l**self.N


def _exchange_sign(species: Species, p: Permutation, q: Permutation) -> int:
    return 1 if species is Species.BOSON else p.sign * q.sign


def _validate_modes(modes, l: int, N: int) -> tuple:
    modes = tuple(int(m) for m in modes)
    if len(modes) != N:
        raise ValueError(f"mode assignment needs {N} sites")
    if len(set(modes)) != N:
        raise ValueError("bunched mode assignments are not supported; sites must be distinct")
    if any(m < 1 or m > l for m in modes):
        raise ValueError(f"sites must lie in 1..{l}")
    return modes


def initial_state(gram: InternalGram, species, l: int, mode_assignment=None) -> ManyBodyState:
    """Reduced many-body state for product internal states with Gram ``gram``."""
    species = Species(species)
    N = gram.N
    if l < 2:
        raise InvalidSize("l must be >= 2")
    check_dimension(l, N)
    modes = _validate_modes(mode_assignment or tuple(range(1, N + 1)), l, N)
    perms = all_permutations(N)
    G = gram.G
    nf = math.factorial(N)

    coeffs = np.empty((nf, nf), dtype=np.complex128)
    for i, p in enumerate(perms):
        for j, q in enumerate(perms):
            amp = np.prod([G[q(a), p(a)] for a in range(N)])
            coeffs[i, j] = _exchange_sign(species, p, q) * amp / nf

    trace = float(np.real(np.trace(coeffs)))
    if trace < tol.ZERO_NORM_TOL:
        raise ZeroNorm("assembled state has vanishing trace")
    if abs(trace - 1.0) > 1e-14:
        log.info("renormalizing initial state by factor %.15g", 1.0 / trace)
    coeffs = coeffs / trace

    idx = [flat_index(p.apply(modes), l) for p in perms]
    rho = np.zeros((l**N, l**N), dtype=np.complex128)
    rho[np.ix_(idx, idx)] = coeffs
    return ManyBodyState(
        species=species, N=N, l=l, mode_assignment=modes, coeffs=coeffs, rho=rho,
        normalization=1.0 / trace, perms=perms,
    )


def two_particle_state(signed_overlap: float, l: int) -> ManyBodyState:
    """Two particles on sites 1, 2 with ``|<phi_1|phi_2>|^2 = |signed_overlap|``.

    Non-negative values give bosons, negative values fermions.
    """
    if not -1.0 <= signed_overlap <= 1.0:
        raise ValueError("signed overlap must lie in [-1, 1]")
    x = math.sqrt(abs(signed_overlap))
    species = Species.BOSON if signed_overlap >= 0 else Species.FERMION
    return initial_state(InternalGram(np.array([[1.0, x], [x, 1.0]])), species, l)


def symmetric_expectation(state: ManyBodyState, *, check: bool = True) -> float:
    """Weight of the state in the permutation-symmetric subspace."""
    value = float(np.real(np.sum(state.coeffs))) / math.factorial(state.N)
    if check:
        direct = float(np.real(np.trace(symmetric_projector(state.l, state.N) @ state.rho)))
        if abs(direct - value) > 1e-10:
            raise AssertionError(f"<Pi_S> mismatch: {value} vs {direct}")
    return min(max(value, 0.0), 1.0)


def initial_state_bruteforce(internal_vectors, species, l: int, mode_assignment=None) -> np.ndarray:
    """Slow reference construction on the doubled (site x internal) space.

    Builds ``sum_pi s(pi) (Pi_pi x Pi_pi) |E> x |phi>``, normalizes, forms the
    pure projector and traces out the internal factor.
    """
    species = Species(species)
    vs = [np.asarray(v, dtype=np.complex128) for v in internal_vectors]
    vs = [v / np.linalg.norm(v) for v in vs]
    N = len(vs)
    d = vs[0].shape[0]
    modes = _validate_modes(mode_assignment or tuple(range(1, N + 1)), l, N)

    site_vec = np.zeros(l**N, dtype=np.complex128)
    site_vec[flat_index(modes, l)] = 1.0
    phi = reduce(np.kron, vs)
    joint = np.kron(site_vec, phi)

    psi = np.zeros_like(joint)
    for p in all_permutations(N):
        s = 1 if species is Species.BOSON else p.sign
        op = np.kron(permutation_operator(p, l, N), permutation_operator(p, d, N))
        psi += s * (op @ joint)
    norm = np.linalg.norm(psi)
    if norm < tol.ZERO_NORM_TOL:
        raise ZeroNorm("symmetrized state vanishes")
    psi = (psi / norm).reshape(l**N, d**N)
    return psi @ psi.conj().T
