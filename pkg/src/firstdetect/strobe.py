"""First-detection statistics under stroboscopic projective measurement.

A state prepared in the no-detection subspace is evolved by ``U`` and
measured with ``{P_perp, P_par}`` after every step until the first click.
The survival probability after ``k`` attempts is the expectation of
``S_k = (U_par^k)^dag U_par^k`` in the initial state, where ``U_par`` is
the block of ``U`` on the no-detection subspace.  ``U_par`` is not normal,
so its powers go through a non-orthogonal eigendecomposition.

:func:`direct_protocol_oracle` simulates the measurement sequence with
explicit state collapse and is kept as an independent reference.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np
import scipy.linalg

from . import tolerances as tol
from .detection import ProjectorPair
from .errors import EmptyParallelSpace, EmptySet, NumericalError
from .linalg import (
    GeneralEigen,
    as_matrix,
    eigenvalue_powers,
    general_eig,
    matrix_power,
    orthonormal_basis,
    orthonormal_projector,
)
from .manybody import ManyBodyState, symmetric_expectation

log = logging.getLogger(__name__)


class Flag(str, enum.Enum):
    UNDEFINED_TRAPPED = "undefined_trapped"
    UNDEFINED_ZERO_DETECTION = "undefined_zero_detection"


class Truncation(str, enum.Enum):
    CONVERGED = "converged"      # S_k - S_inf dropped below eps
    K_CAP = "k_cap"
    FIXED = "fixed"              # caller asked for a fixed number of terms
    UNDEFINED = "undefined"


def _rho_matrix(rho) -> np.ndarray:
    if isinstance(rho, ManyBodyState):
        return rho.rho
    return as_matrix(rho)


@dataclass(frozen=True)
class StrobeProblem:
    """Propagator, measurement, initial state and sampling time.

    ``hamiltonian`` is optional.  When given, it lets the engine tell a
    state that can never be detected at any sampling time apart from one
    that is merely trapped at this particular ``tau``.
    """

    U: np.ndarray
    pair: ProjectorPair
    rho: np.ndarray
    tau: float
    hamiltonian: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        rho = _rho_matrix(self.rho)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "U", as_matrix(self.U))
        p_par = self.pair.P_par
        if np.max(np.abs(p_par @ rho @ p_par - rho)) > 1e-10:
            raise ValueError("initial state has support on the detection subspace")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")

    def with_state(self, rho) -> "StrobeProblem":
        return replace(self, rho=_rho_matrix(rho))


@dataclass(frozen=True)
class SurvivalPath:
    """Restriction of the problem to the no-detection subspace.

    ``basis`` is the isometry whose columns span the range of ``P_par``;
    ``basis_map`` lists the retained flat indices when ``P_par`` is
    diagonal (it then equals a column selection of the identity).
    """

    U_par: np.ndarray
    eig: GeneralEigen
    rho_par: np.ndarray
    basis: np.ndarray = field(repr=False)
    basis_map: tuple | None = None
    tau: float = 0.0

    @property
    def dimension(self) -> int:
        return self.U_par.shape[0]

    def with_state(self, rho) -> "SurvivalPath":
        """Same propagator block, different initial state (full-space ``rho``)."""
        rho = _rho_matrix(rho)
        b = self.basis
        return replace(self, rho_par=b.conj().T @ rho @ b)


def compress(problem: StrobeProblem, **eig_kwargs) -> SurvivalPath:
    """Project ``U`` and ``rho`` onto the no-detection subspace and diagonalize."""
    p_par = problem.pair.P_par
    if problem.pair.is_diagonal:
        idx = np.flatnonzero(np.real(np.diag(p_par)) > 0.5)
        if idx.size == 0:
            raise EmptyParallelSpace("P_par has rank 0")
        u_par = problem.U[np.ix_(idx, idx)]
        rho_par = problem.rho[np.ix_(idx, idx)]
        basis = np.eye(p_par.shape[0], dtype=np.complex128)[:, idx]
        basis_map = tuple(int(i) for i in idx)
    else:
        w, v = np.linalg.eigh(0.5 * (p_par + p_par.conj().T))
        basis = v[:, w > 0.5]
        if basis.shape[1] == 0:
            raise EmptyParallelSpace("P_par has rank 0")
        u_par = basis.conj().T @ problem.U @ basis
        rho_par = basis.conj().T @ problem.rho @ basis
        basis_map = None
    eig = general_eig(u_par, **eig_kwargs)
    if np.max(eig.moduli) > 1 + 1e-9:
        log.warning("U_par eigenvalue modulus %.3e exceeds 1", np.max(eig.moduli))
    eig = _unitary_block(eig, u_par)
    log.debug("compress: d_par=%d residual=%.2e cond=%.2e", u_par.shape[0], eig.residual, eig.condition)
    return SurvivalPath(u_par, eig, rho_par, basis, basis_map, problem.tau)


def _unitary_block(eig: GeneralEigen, u_par: np.ndarray, unit_tol: float = tol.UNIT_MODULUS_TOL) -> GeneralEigen:
    """Re-diagonalize the unit-modulus part of ``eig`` in an orthonormal basis.

    For a contraction, eigenvectors with ``|lam| = 1`` span an invariant
    subspace on which the map is unitary and which is orthogonal to every
    other eigenvector.  LAPACK returns a non-orthogonal basis for degenerate
    unit eigenvalues and moduli a few ulp away from 1; both effects grow
    linearly in ``k`` once raised to high powers.  A complex Schur form of
    the restricted block gives orthonormal eigenvectors, whose eigenvalues
    are then put exactly on the unit circle.
    """
    sel = 1.0 - eig.moduli < unit_tol
    if not sel.any():
        return eig
    q = eig.right_vectors
    v = orthonormal_basis(q[:, sel])
    if v.shape[1] != sel.sum():
        return eig
    t, z = scipy.linalg.schur(v.conj().T @ u_par @ v, output="complex")
    if np.max(np.abs(np.triu(t, 1)), initial=0.0) > tol.RECONSTRUCTION_TOL:
        return eig
    lam = eig.eigenvalues.copy()
    unit = np.diag(t)
    lam[sel] = unit / np.abs(unit)
    q_new = q.copy()
    q_new[:, sel] = v @ z
    rest = q[:, ~sel] - v @ (v.conj().T @ q[:, ~sel])
    q_new[:, ~sel] = rest / np.linalg.norm(rest, axis=0)
    try:
        qinv = scipy.linalg.inv(q_new)
    except (scipy.linalg.LinAlgError, ValueError):
        return eig
    scale = max(1.0, float(np.max(np.abs(u_par))))
    residual = float(np.max(np.abs((q_new * lam) @ qinv - u_par))) / scale
    if residual > max(10 * eig.residual, tol.RECONSTRUCTION_TOL * 1e-2):
        log.debug("unit block re-diagonalization rejected (residual %.2e)", residual)
        return eig
    return GeneralEigen(lam, q_new, qinv, residual=residual, condition=float(np.linalg.cond(q_new)))


def survival_operator(path: SurvivalPath, k: int) -> np.ndarray:
    m = matrix_power(path.eig, k)
    return m.conj().T @ m


class _SurvivalEvaluator:
    """Evaluates ``S_k = ||Q Lam^k C||_F^2`` for batches of ``k``.

    ``C = Q^-1 V sqrt(w)`` with ``rho_par = V diag(w) V^dag``, so each S_k
    costs one small batched matrix product.
    """

    def __init__(self, path: SurvivalPath):
        rho = 0.5 * (path.rho_par + path.rho_par.conj().T)
        w, v = np.linalg.eigh(rho)
        keep = w > 1e-15 * max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
        self.c = path.eig.inverse_vectors @ (v[:, keep] * np.sqrt(w[keep]))
        self.q = path.eig.right_vectors
        self.lam = path.eig.eigenvalues
        self.trace = float(np.sum(w[keep]))

    def __call__(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks)
        if self.c.shape[1] == 0:
            return np.zeros(ks.shape)
        powers = eigenvalue_powers(self.lam, ks)            # (K, d)
        y = self.q @ (powers[:, :, None] * self.c[None])    # (K, d, r)
        s = np.sum(np.abs(y) ** 2, axis=(1, 2))
        s[ks == 0] = self.trace
        return s


def _clip_survival(s: np.ndarray) -> np.ndarray:
    excursion = max(float(np.max(s - 1.0, initial=0.0)), float(np.max(-s, initial=0.0)))
    if excursion > tol.SURVIVAL_CLIP_TOL:
        log.warning("survival probability left [0, 1] by %.2e", excursion)
    return np.clip(s, 0.0, 1.0)


def survival_series(path: SurvivalPath, k_max: int) -> np.ndarray:
    """``S_0 ... S_kmax`` as a real array of length ``k_max + 1``."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    ev = _SurvivalEvaluator(path)
    out = []
    for start in range(0, k_max + 1, 2048):
        ks = np.arange(start, min(start + 2048, k_max + 1))
        out.append(ev(ks))
    s = _clip_survival(np.concatenate(out))
    s[0] = 1.0
    return s


def _survival_blocks(path: SurvivalPath, first: int = 1, last: int | None = None) -> Iterator[tuple]:
    ev = _SurvivalEvaluator(path)
    size = 64
    k = first
    while last is None or k <= last:
        stop = k + size if last is None else min(k + size, last + 1)
        ks = np.arange(k, stop)
        yield ks, _clip_survival(ev(ks))
        k = stop
        size = min(size * 2, 4096)


def trapped_projector(path: SurvivalPath, unit_tol: float = tol.UNIT_MODULUS_TOL) -> np.ndarray:
    """Projector on the span of unit-modulus eigenvectors of ``U_par``."""
    sel = 1.0 - path.eig.moduli < unit_tol
    d = path.dimension
    if not np.any(sel):
        return np.zeros((d, d), dtype=np.complex128)
    if np.all(sel):
        return np.eye(d, dtype=np.complex128)
    try:
        return orthonormal_projector(path.eig.right_vectors[:, sel])
    except EmptySet:
        return np.zeros((d, d), dtype=np.complex128)


def trapped_survival(path: SurvivalPath, p_trapped: np.ndarray | None = None) -> float:
    """``S_inf = Tr(P_T rho_par)``, clipped to [0, 1]."""
    if p_trapped is None:
        p_trapped = trapped_projector(path)
    s = float(np.real(np.trace(p_trapped @ path.rho_par)))
    return min(max(s, 0.0), 1.0)


def detectable_weight(hamiltonian, p_perp, rho, krylov_tol: float = tol.KRYLOV_TOL) -> float:
    """Weight of ``rho`` on the smallest H-invariant subspace containing range(P_perp).

    A state with zero weight there is never detected, whatever the sampling
    time: its orthogonal complement is invariant under both H and P_perp.
    """
    h = as_matrix(hamiltonian)
    try:
        b = orthonormal_basis(np.asarray(p_perp, dtype=np.complex128), krylov_tol)
    except EmptySet:
        return 0.0
    if b.shape[1] == 0:
        return 0.0
    while True:
        nb = orthonormal_basis(np.hstack([b, h @ b]), krylov_tol)
        if nb.shape[1] == b.shape[1]:
            break
        b = nb
    rho = _rho_matrix(rho)
    return float(np.real(np.trace(b.conj().T @ rho @ b)))


@dataclass(frozen=True)
class FirstDetectionTime:
    value: float | None
    flag: Flag | None
    k_truncated: int
    reason: Truncation

    @property
    def defined(self) -> bool:
        return self.flag is None


def mean_first_detection_time(
    path: SurvivalPath,
    S_inf: float,
    tau: float,
    eps: float = tol.TRUNCATION_EPS,
    k_cap: int = tol.TRUNCATION_KCAP,
    *,
    n_terms: int | None = None,
    never_detectable: bool = False,
) -> FirstDetectionTime:
    """``<t_f> = tau * (1 + sum_k (S_k - S_inf) / (1 - S_inf))``, truncated.

    The series stops before the first ``k`` with ``S_k - S_inf < eps`` or
    after ``k_cap`` terms.  ``n_terms`` overrides both and sums exactly that
    many terms.  When ``1 - S_inf`` vanishes the time is undefined; the flag
    says whether the state is trapped at this ``tau`` or can never be
    detected at all (``never_detectable``, decided by the caller).
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    denom = 1.0 - S_inf
    if denom < tol.DENOMINATOR_TOL:
        flag = Flag.UNDEFINED_ZERO_DETECTION if never_detectable else Flag.UNDEFINED_TRAPPED
        return FirstDetectionTime(None, flag, 0, Truncation.UNDEFINED)

    total = 0.0
    if n_terms is not None:
        if n_terms > 0:
            for ks, s in _survival_blocks(path, 1, n_terms):
                total += float(np.sum(s - S_inf))
        return FirstDetectionTime(tau * (1.0 + total / denom), None, n_terms, Truncation.FIXED)

    k_done = 0
    reason = Truncation.K_CAP
    for ks, s in _survival_blocks(path, 1, k_cap):
        diff = s - S_inf
        below = np.flatnonzero(diff < eps)
        if below.size:
            j = int(below[0])
            total += float(np.sum(diff[:j]))
            k_done = int(ks[j]) - 1
            reason = Truncation.CONVERGED
            break
        total += float(np.sum(diff))
        k_done = int(ks[-1])
    return FirstDetectionTime(tau * (1.0 + total / denom), None, k_done, reason)


class _SharedSurvival:
    """``S_k`` for several states supported on one small common subspace.

    With ``B`` an orthonormal basis of the joint support and ``R_s`` the
    states written in it, ``S_k(s) = Tr(W_k R_s)`` where
    ``W_k = (Q Lam^k Q^-1 B)^dag (Q Lam^k Q^-1 B)`` is shared by all states.
    """

    def __init__(self, path: SurvivalPath, rhos_par):
        rhos = [0.5 * (r + r.conj().T) for r in rhos_par]
        try:
            b = orthonormal_basis(np.hstack(rhos), 1e-12)
        except EmptySet:
            b = np.zeros((path.dimension, 0), dtype=np.complex128)
        self.c = path.eig.inverse_vectors @ b
        self.q = path.eig.right_vectors
        self.lam = path.eig.eigenvalues
        self.r = np.array([b.conj().T @ r @ b for r in rhos])      # (n, m, m)
        self.trace = np.real(np.trace(self.r, axis1=1, axis2=2))

    def __call__(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks)
        if self.c.shape[1] == 0:
            return np.zeros((ks.size, self.r.shape[0]))
        powers = eigenvalue_powers(self.lam, ks)
        y = self.q @ (powers[:, :, None] * self.c[None])          # (K, d, m)
        w = np.conj(np.swapaxes(y, 1, 2)) @ y                     # (K, m, m)
        s = np.real(np.einsum("kab,nba->kn", w, self.r))
        s[ks == 0] = self.trace
        return s


def mean_first_detection_times(
    path: SurvivalPath,
    states,
    S_infs,
    tau: float,
    eps: float = tol.TRUNCATION_EPS,
    k_cap: int = tol.TRUNCATION_KCAP,
    *,
    never_detectable=None,
) -> list[FirstDetectionTime]:
    """:func:`mean_first_detection_time` for many states sharing one path.

    ``states`` are full-space density matrices (or :class:`ManyBodyState`).
    Agrees with the single-state function term by term; it only shares the
    propagation work between states.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    n = len(states)
    never = [False] * n if never_detectable is None else list(never_detectable)
    b = path.basis
    rhos = [b.conj().T @ _rho_matrix(r) @ b for r in states]
    s_inf = np.asarray(S_infs, dtype=float)
    out: list[FirstDetectionTime | None] = [None] * n
    active = []
    for i in range(n):
        if 1.0 - s_inf[i] < tol.DENOMINATOR_TOL:
            flag = Flag.UNDEFINED_ZERO_DETECTION if never[i] else Flag.UNDEFINED_TRAPPED
            out[i] = FirstDetectionTime(None, flag, 0, Truncation.UNDEFINED)
        else:
            active.append(i)
    if not active:
        return out

    ev = _SharedSurvival(path, [rhos[i] for i in active])
    total = np.zeros(len(active))
    k_done = np.zeros(len(active), dtype=int)
    done = np.zeros(len(active), dtype=bool)
    size, k = 64, 1
    while k <= k_cap and not done.all():
        ks = np.arange(k, min(k + size, k_cap + 1))
        s = _clip_survival(ev(ks))
        for a in np.flatnonzero(~done):
            diff = s[:, a] - s_inf[active[a]]
            below = np.flatnonzero(diff < eps)
            if below.size:
                j = int(below[0])
                total[a] += float(np.sum(diff[:j]))
                k_done[a] = int(ks[j]) - 1
                done[a] = True
            else:
                total[a] += float(np.sum(diff))
                k_done[a] = int(ks[-1])
        k = int(ks[-1]) + 1
        size = min(size * 2, 4096)
    for a, i in enumerate(active):
        reason = Truncation.CONVERGED if done[a] else Truncation.K_CAP
        value = tau * (1.0 + total[a] / (1.0 - s_inf[i]))
        out[i] = FirstDetectionTime(value, None, int(k_done[a]), reason)
    return out


@dataclass(frozen=True)
class DetectionStatistics:
    """Series indexed from ``k = 1``: ``F[k-1]``, ``D[k-1]``, ``S[k-1]``."""

    F: np.ndarray
    D: np.ndarray
    S: np.ndarray
    S_inf: float
    t_first: float | None
    flag: Flag | None
    k_truncated: int
    truncation_reason: Truncation
    max_modulus: float = float("nan")


def _first_detection_from_survival(s_with_zero: np.ndarray) -> np.ndarray:
    f = s_with_zero[:-1] - s_with_zero[1:]
    if np.any(f < -tol.NEGATIVE_F_TOL):
        raise NumericalError(f"negative first-detection probability {f.min():.3e}")
    return np.clip(f, 0.0, None)


def detection_statistics(
    problem: StrobeProblem,
    k_max: int = 200,
    eps: float = tol.TRUNCATION_EPS,
    k_cap: int = tol.TRUNCATION_KCAP,
    *,
    path: SurvivalPath | None = None,
    unit_tol: float = tol.UNIT_MODULUS_TOL,
) -> DetectionStatistics:
    """Fast-path statistics: F/D/S up to ``k_max`` plus S_inf and <t_f>."""
    if path is None:
        path = compress(problem)
    s = survival_series(path, k_max)
    f = _first_detection_from_survival(s)
    s_inf = trapped_survival(path, trapped_projector(path, unit_tol))
    never = False
    if problem.hamiltonian is not None and 1.0 - s_inf < tol.DENOMINATOR_TOL:
        never = detectable_weight(problem.hamiltonian, problem.pair.P_perp, problem.rho) < tol.DENOMINATOR_TOL
    if problem.tau > 0:
        tf = mean_first_detection_time(path, s_inf, problem.tau, eps, k_cap, never_detectable=never)
    else:
        flag = Flag.UNDEFINED_ZERO_DETECTION if never else Flag.UNDEFINED_TRAPPED
        tf = FirstDetectionTime(None, flag, 0, Truncation.UNDEFINED)
    return DetectionStatistics(
        F=f, D=1.0 - s[1:], S=s[1:], S_inf=s_inf, t_first=tf.value, flag=tf.flag,
        k_truncated=tf.k_truncated, truncation_reason=tf.reason,
        max_modulus=float(np.max(path.eig.moduli)),
    )


def direct_protocol_oracle(problem: StrobeProblem, k_max: int) -> DetectionStatistics:
    """Simulate measure-and-collapse explicitly on the full space.

    ``S_inf`` is reported as the final survival probability and ``t_first``
    as the finite-k mean detection time ``tau * sum_j j F_j / D_k``.
    """
    if k_max > 1000:
        raise ValueError("the direct oracle is limited to k_max <= 1000")
    u = problem.U
    ud = u.conj().T
    p_perp = problem.pair.P_perp
    p_par = problem.pair.P_par
    rho = problem.rho.copy()
    surv = 1.0
    F = np.zeros(k_max)
    S = np.zeros(k_max)
    for k in range(k_max):
        rho = u @ rho @ ud
        p = float(np.real(np.trace(p_perp @ rho)))
        p = min(max(p, 0.0), 1.0)
        F[k] = surv * p
        surv *= 1.0 - p
        S[k] = surv
        if 1.0 - p < 1e-14:
            S[k:] = 0.0
            surv = 0.0
            break
        rho = p_par @ rho @ p_par / (1.0 - p)
    D = 1.0 - S
    if D[-1] > tol.DENOMINATOR_TOL and problem.tau > 0:
        t = problem.tau * float(np.sum(np.arange(1, k_max + 1) * F)) / D[-1]
        flag = None
    else:
        t, flag = None, Flag.UNDEFINED_TRAPPED
    return DetectionStatistics(F=F, D=D, S=S, S_inf=float(S[-1]), t_first=t, flag=flag,
                               k_truncated=k_max, truncation_reason=Truncation.FIXED)


@dataclass(frozen=True)
class BunchedReport:
    factor: float
    F: np.ndarray
    F_distinguishable: np.ndarray
    max_deviation: float
    passed: bool


def bunched_factorization_check(
    state: ManyBodyState,
    distinguishable_state: ManyBodyState,
    U: np.ndarray,
    pair: ProjectorPair,
    tau: float = 1.0,
    k_max: int = 200,
    atol: float = 1e-10,
) -> BunchedReport:
    """Compare ``F_k`` against ``N! <Pi_S> F_k^D`` for an all-on-target detector."""
    base = StrobeProblem(U, pair, state, tau)
    path = compress(base)
    f = _first_detection_from_survival(survival_series(path, k_max))
    f_d = _first_detection_from_survival(survival_series(path.with_state(distinguishable_state), k_max))
    factor = math.factorial(state.N) * symmetric_expectation(state)
    dev = float(np.max(np.abs(f - factor * f_d)))
    return BunchedReport(factor, f, f_d, dev, dev <= atol)
