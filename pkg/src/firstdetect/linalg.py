"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.  The
two eigendecomposition containers below carry the factors needed by the
survival-operator machinery: unitary eigenvectors for Hermitian input and a
non-orthogonal eigenbasis with its inverse for general (non-normal) input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from . import tolerances as tol
from .errors import ConvergenceFailure, DefectiveMatrix, EmptySet, NotHermitian


def as_matrix(a, *, square: bool = True) -> np.ndarray:
    """Return ``a`` as a finite 2-D complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def max_abs(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def is_hermitian(h: np.ndarray, rtol: float = tol.HERMITIAN_TOL) -> bool:
    scale = max_abs(h)
    return max_abs(h - h.conj().T) <= rtol * scale


@dataclass(frozen=True)
class HermitianEigen:
    energies: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.energies) @ v.conj().T


@dataclass(frozen=True)
class GeneralEigen:
    """Eigendecomposition ``M = Q diag(eigenvalues) Qinv`` of a general matrix.

    Columns of ``right_vectors`` have unit 2-norm.  ``residual`` is the
    scaled reconstruction error and ``condition`` the 2-norm condition
    number of ``right_vectors``; both are kept so callers can log how close
    to defective the input was.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    inverse_vectors: np.ndarray
    residual: float = 0.0
    condition: float = 1.0

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        return (self.right_vectors * self.eigenvalues) @ self.inverse_vectors


def hermitian_eig(h) -> HermitianEigen:
    """Eigendecomposition of a Hermitian matrix, energies ascending."""
    h = as_matrix(h)
    if not is_hermitian(h):
        raise NotHermitian(
            f"||H - H^dag||_max = {max_abs(h - h.conj().T):.3e} exceeds tolerance"
        )
    h = 0.5 * (h + h.conj().T)
    try:
        e, v = scipy.linalg.eigh(h)
    except scipy.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return HermitianEigen(np.asarray(e, dtype=float), v)


def _sort_order(w: np.ndarray) -> np.ndarray:
    # |lam| descending, then phase ascending; rounding keeps ties stable
    return np.lexsort((np.round(np.angle(w), 12), -np.round(np.abs(w), 12)))


def general_eig(
    m,
    *,
    reconstruction_tol: float = tol.RECONSTRUCTION_TOL,
    inverse_tol: float = tol.INVERSE_TOL,
) -> GeneralEigen:
    """Diagonalize a general square matrix as ``Q diag(lam) Q^-1``.

    Raises
    ------
    DefectiveMatrix
        If the eigenvector matrix is singular or the factorization fails to
        reproduce ``m`` within ``reconstruction_tol * max(1, ||m||_max)``.
    """
    m = as_matrix(m)
    try:
        w, q = scipy.linalg.eig(m)
    except scipy.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    order = _sort_order(w)
    w = w[order]
    q = q[:, order]
    q = q / np.linalg.norm(q, axis=0)
    try:
        qinv = scipy.linalg.inv(q)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise DefectiveMatrix(f"eigenvector matrix is singular: {exc}") from exc
    if not np.all(np.isfinite(qinv)):
        raise DefectiveMatrix("eigenvector matrix inverse is not finite")

    scale = max(1.0, max_abs(m))
    residual = max_abs((q * w) @ qinv - m) / scale
    inv_residual = max_abs(q @ qinv - np.eye(m.shape[0]))
    if residual > reconstruction_tol or inv_residual > inverse_tol:
        raise DefectiveMatrix(
            f"eigendecomposition residual {residual:.2e} "
            f"(inverse residual {inv_residual:.2e}) exceeds tolerance"
        )
    cond = float(np.linalg.cond(q))
    return GeneralEigen(w, q, qinv, residual=residual, condition=cond)


def eigenvalue_powers(lam, ks) -> np.ndarray:
    """``lam[j] ** ks[i]`` as a ``(len(ks), len(lam))`` array, in polar form.

    Moduli within a few ulp of 1 are taken as exactly 1, so unit-circle
    eigenvalues keep unit modulus at any power.
    """
    lam = np.asarray(lam, dtype=np.complex128)
    ks = np.asarray(ks, dtype=float)
    mod = np.abs(lam)
    mod = np.where(np.abs(mod - 1.0) <= 4 * np.finfo(float).eps, 1.0, mod)
    ang = np.angle(lam)
    with np.errstate(divide="ignore"):
        radial = mod[None, :] ** ks[:, None]
    return radial * np.exp(1j * ks[:, None] * ang[None, :])


def matrix_power(decomp: GeneralEigen, k: int) -> np.ndarray:
    """``M^k`` from a diagonalization; ``k = 0`` gives the exact identity."""
    if k < 0:
        raise ValueError("k must be non-negative")
    n = decomp.eigenvalues.shape[0]
    if k == 0:
        return np.eye(n, dtype=np.complex128)
    return (decomp.right_vectors * eigenvalue_powers(decomp.eigenvalues, [k])[0]) @ decomp.inverse_vectors


def unitary_from_hamiltonian(h, tau: float) -> np.ndarray:
    """``exp(-i H tau)`` (hbar = 1) through the spectral phase map."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    eig = h if isinstance(h, HermitianEigen) else hermitian_eig(h)
    v = eig.eigenvectors
    if tau == 0:
        return np.eye(v.shape[0], dtype=np.complex128)
    return (v * np.exp(-1j * eig.energies * tau)) @ v.conj().T


def orthonormal_basis(vectors, rank_tol: float = tol.RANK_TOL) -> np.ndarray:
    """Orthonormal columns spanning the given vectors (columns or a list)."""
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        a = vectors.astype(np.complex128)
    else:
        vs = [np.asarray(v, dtype=np.complex128).ravel() for v in vectors]
        if not vs:
            raise EmptySet("no vectors supplied")
        a = np.column_stack(vs)
    if a.shape[1] == 0:
        raise EmptySet("no vectors supplied")
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    return u[:, s > rank_tol]


def orthonormal_projector(
    vectors: Sequence[np.ndarray] | np.ndarray, rank_tol: float = tol.RANK_TOL
) -> np.ndarray:
    """Orthogonal projector onto the span of ``vectors``.

    A 2-D array is read as a matrix whose columns are the vectors.
    """
    b = orthonormal_basis(vectors, rank_tol)
    p = b @ b.conj().T
    return 0.5 * (p + p.conj().T)
