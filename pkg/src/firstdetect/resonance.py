"""Resonant sampling times.

Three tools:

* :func:`degenerate_times` lists sampling times at which distinct
  eigenenergies pick up equal phases, ``(E_j - E_k) tau = 2 pi m``;
* :func:`scan_moduli` follows the sorted eigenvalue moduli of the
  no-detection block over a tau grid and locates isolated points where a
  branch touches the unit circle;
* :func:`fit_divergence` fits ``<t_f>/tau ~ A + B |dtau|^-p`` near one of
  those points.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from . import tolerances as tol
from .detection import DetectionSpec, ProjectorPair, projectors
from .errors import DefectiveMatrix, InsufficientSamples, NoDivergence
from .lattice import LatticeModel, many_body_hamiltonian
from .linalg import general_eig, hermitian_eig, orthonormal_projector, HermitianEigen

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class DegenerateTime:
    tau: float
    omega: tuple              # indices into the (ascending) energy vector
    m_values: tuple           # (E_j - E_omega[0]) tau / 2pi for j in omega
    phase: float = 0.0        # common phase E tau mod 2pi


def _wrap(phase):
    return (np.asarray(phase) + math.pi) % TWO_PI - math.pi


def _distinct_levels(energies: np.ndarray, level_tol: float) -> list[list[int]]:
    order = np.argsort(energies, kind="stable")
    groups: list[list[int]] = []
    for i in order:
        if groups and abs(energies[i] - energies[groups[-1][-1]]) <= level_tol:
            groups[-1].append(int(i))
        else:
            groups.append([int(i)])
    return groups


def degenerate_times(
    energies,
    tau_max: float,
    tol_tau: float = 1e-9,
    phase_tol: float = tol.PHASE_TOL,
) -> list[DegenerateTime]:
    """Enumerate degenerate sampling times ``0 < tau <= tau_max``.

    Candidates ``2 pi m / gap`` come from every gap between distinct levels;
    candidates closer than ``tol_tau`` are merged, and at each merged time
    the full spectrum is partitioned by phase.  Every phase class holding
    at least two distinct levels yields one :class:`DegenerateTime`.
    """
    e = np.asarray(energies, dtype=float).ravel()
    if tau_max <= 0:
        raise ValueError("tau_max must be positive")
    scale = max(1.0, float(np.max(np.abs(e)))) if e.size else 1.0
    levels = _distinct_levels(e, 1e-9 * scale)
    if len(levels) < 2:
        return []
    reps = np.array([e[g[0]] for g in levels])

    cands = []
    for a in range(len(reps)):
        for b in range(a + 1, len(reps)):
            gap = abs(reps[b] - reps[a])
            m_max = int(math.floor(tau_max * gap / TWO_PI + 1e-12))
            cands.extend(TWO_PI * m / gap for m in range(1, m_max + 1))
    if not cands:
        return []
    cands.sort()

    clusters = [[cands[0]]]
    for c in cands[1:]:
        if c - clusters[-1][-1] <= tol_tau:
            clusters[-1].append(c)
        else:
            clusters.append([c])

    out: list[DegenerateTime] = []
    for cl in clusters:
        if cl[-1] - cl[0] > 1e-12:
            log.warning("merged degenerate-time candidates spanning %.2e around tau=%.9f",
                        cl[-1] - cl[0], cl[0])
        tau = float(np.mean(cl))
        phases = _wrap(reps * tau)
        remaining = list(range(len(reps)))
        while remaining:
            first = remaining[0]
            members = [j for j in remaining
                       if abs(_wrap((reps[j] - reps[first]) * tau)) <= phase_tol]
            remaining = [j for j in remaining if j not in members]
            if len(members) < 2:
                continue
            omega = tuple(sorted(i for j in members for i in levels[j]))
            e0 = e[omega[0]]
            ms = tuple(int(round((e[i] - e0) * tau / TWO_PI)) for i in omega)
            out.append(DegenerateTime(tau, omega, ms, float(phases[first] % TWO_PI)))
    return out


def degenerate_projector(eig: HermitianEigen, dt: DegenerateTime) -> np.ndarray:
    """Projector on the span of the eigenvectors in ``dt.omega``."""
    return orthonormal_projector(eig.eigenvectors[:, list(dt.omega)])


@dataclass(frozen=True)
class ResonanceScan:
    tau_grid: np.ndarray
    moduli: np.ndarray                      # (len(tau_grid), d_par), sorted descending
    resonant_times: list                    # (tau_res, branch index), branch counted from the top
    skipped: list = field(default_factory=list)
    unit_tol: float = tol.UNIT_MODULUS_TOL

    def resonant_taus(self, merge_tol: float = 1e-6) -> list[float]:
        taus = sorted(t for t, _ in self.resonant_times)
        out: list[float] = []
        for t in taus:
            if not out or t - out[-1] > merge_tol:
                out.append(t)
        return out


class _BlockModuli:
    """Sorted moduli of the no-detection block of ``exp(-i H tau)``."""

    def __init__(self, h: np.ndarray, pair: ProjectorPair):
        self.eig = hermitian_eig(h)
        p_par = pair.P_par
        if pair.is_diagonal:
            idx = np.flatnonzero(np.real(np.diag(p_par)) > 0.5)
            self.basis = np.eye(p_par.shape[0], dtype=np.complex128)[:, idx]
        else:
            w, v = np.linalg.eigh(p_par)
            self.basis = v[:, w > 0.5]
        self.v_par = self.basis.conj().T @ self.eig.eigenvectors
        self.calls = 0
        self.max_residual = 0.0

    def block(self, tau: float) -> np.ndarray:
        vp = self.v_par
        return (vp * np.exp(-1j * self.eig.energies * tau)) @ vp.conj().T

    def __call__(self, tau: float) -> np.ndarray:
        self.calls += 1
        eig = general_eig(self.block(tau))
        self.max_residual = max(self.max_residual, eig.residual)
        return np.sort(np.abs(eig.eigenvalues))[::-1]

    def quick(self, tau: float) -> np.ndarray:
        """Same as calling, without the eigenvector checks (used while refining)."""
        self.calls += 1
        return np.sort(np.abs(scipy.linalg.eigvals(self.block(tau))))[::-1]


def _scan(bm: _BlockModuli, tau_grid, unit_tol: float, refine: bool, refine_threshold: float = 0.05):
    grid = np.asarray(tau_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("tau grid must be strictly increasing with at least two points")
    d = bm.basis.shape[1]
    mod = np.full((grid.size, d), np.nan)
    skipped = []
    for i, t in enumerate(grid):
        try:
            mod[i] = bm(t)
        except DefectiveMatrix as exc:
            log.warning("skipping tau=%.6f: %s", t, exc)
            skipped.append(float(t))
    log.debug("scan over %d points: largest reconstruction residual %.2e", grid.size, bm.max_residual)

    res = []
    ok = ~np.isnan(mod[:, 0])
    if refine and d and ok.any():
        f = 1.0 - mod
        # Branches at unit modulus for every tau (dark states) sit on top of the
        # sorted list; the first branch below them is the one that can touch.
        q = int(np.min(np.sum(f[ok] <= 10 * unit_tol, axis=1)))
        if q < d:
            g = f[:, q]
            # unit modulus over a stretch of the grid is neither persistent nor isolated
            flat = np.concatenate([[False], np.nan_to_num(g, nan=1.0) <= 10 * unit_tol, [False]])
            edges = np.flatnonzero(np.diff(flat.astype(int)))
            for a, b in zip(edges[::2], edges[1::2]):
                if b - a >= 3:
                    log.info("branch %d stays on the unit circle for tau in [%.6f, %.6f]", q, grid[a], grid[b - 1])
            for i in range(1, grid.size - 1):
                gl, gc, gr = g[i - 1], g[i], g[i + 1]
                if np.isnan(gl) or np.isnan(gc) or np.isnan(gr):
                    continue
                if not (gc <= gl and gc <= gr and gc < refine_threshold):
                    continue
                if gl <= 10 * unit_tol and gr <= 10 * unit_tol:
                    continue
                # refine even when the grid point already passes: flat minima
                # can sit a few 1e-6 away from it
                def obj(t):
                    return 1.0 - bm.quick(t)[q]
                r = scipy.optimize.minimize_scalar(
                    obj, bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                    options={"xatol": 1e-13, "maxiter": 200},
                )
                t_best, g_best = float(r.x), float(r.fun)
                if gc < g_best:
                    t_best, g_best = float(grid[i]), gc
                if g_best >= unit_tol:
                    continue
                # bracketing grid points; a grid point closer than a small
                # fraction of the spacing counts as the touch point itself
                sep = 1e-3 * (grid[i + 1] - grid[i - 1])
                lo = int(np.searchsorted(grid, t_best - sep)) - 1
                hi = int(np.searchsorted(grid, t_best + sep, side="right"))
                if lo < 0 or hi >= grid.size:
                    continue
                if g[lo] > 10 * unit_tol and g[hi] > 10 * unit_tol:
                    res.append((t_best, q))
    uniq = []
    for t, j in sorted(res):
        if not any(abs(t - t2) < 1e-7 for t2, _ in uniq):
            uniq.append((t, j))
    return ResonanceScan(grid, mod, uniq, skipped, unit_tol)


def scan_moduli(
    model: LatticeModel,
    detector: DetectionSpec,
    tau_grid,
    *,
    interaction=None,
    unit_tol: float = tol.UNIT_MODULUS_TOL,
    refine: bool = True,
) -> ResonanceScan:
    """Eigenvalue moduli of the no-detection block over ``tau_grid``.

    Branches stuck at unit modulus over the whole grid are set aside.  Local
    minima of ``1 - |lambda|`` for the largest remaining modulus are refined
    by a bounded scalar minimization; a refined point counts as resonant
    when the modulus reaches ``1 - unit_tol`` there while both bracketing
    grid points stay below ``1 - 10 unit_tol``.  The reported eigenindex is
    the position of that branch in the sorted list.
    """
    h = many_body_hamiltonian(model.hamiltonian(), detector.N, interaction)
    return scan_hamiltonian(h, projectors(detector), tau_grid, unit_tol=unit_tol, refine=refine)


def scan_hamiltonian(h, pair: ProjectorPair, tau_grid, *, unit_tol: float = tol.UNIT_MODULUS_TOL,
                     refine: bool = True) -> ResonanceScan:
    return _scan(_BlockModuli(np.asarray(h), pair), tau_grid, unit_tol, refine)


def snap_to_degenerate(taus, candidates, snap_tol: float = 1e-5) -> list[float]:
    """Replace each tau by the nearest degenerate time when closer than ``snap_tol``."""
    cand = np.array(sorted({c.tau if isinstance(c, DegenerateTime) else float(c) for c in candidates}))
    out = []
    for t in taus:
        if cand.size:
            j = int(np.argmin(np.abs(cand - t)))
            if abs(cand[j] - t) <= snap_tol:
                out.append(float(cand[j]))
                continue
        out.append(float(t))
    return out


@dataclass(frozen=True)
class DivergenceFit:
    tau_res: float
    A: float
    B: float
    B_stderr: float
    fitted_exponent: float
    residual: float
    n_samples: int

    @property
    def accepted(self) -> bool:
        return 1.8 <= self.fitted_exponent <= 2.2 and self.residual < 0.05


def fit_divergence(tau_res: float, samples, window: float = tol.FIT_WINDOW, min_per_side: int = 6) -> DivergenceFit:
    """Fit ``y = A + B |dtau|^-p`` to samples ``(dtau, <t_f>/tau)``.

    ``A`` and ``B`` are reported for ``p = 2`` (linear least squares); ``p``
    comes from a separate three-parameter fit with relative weights.
    ``residual`` is the RMS relative deviation of that free fit.
    """
    pts = []
    for dt, y in samples:
        if y is None or not np.isfinite(y):
            raise InsufficientSamples("samples must not contain undefined values")
        if dt != 0 and abs(dt) <= window:
            pts.append((float(dt), float(y)))
    left = sum(1 for dt, _ in pts if dt < 0)
    right = sum(1 for dt, _ in pts if dt > 0)
    if left < min_per_side or right < min_per_side:
        raise InsufficientSamples(
            f"need {min_per_side} samples per side within |dtau| <= {window}, got {left}/{right}"
        )
    dt = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    x = np.abs(dt)

    design = np.column_stack([np.ones_like(x), x**-2.0])
    w = 1.0 / np.abs(y)
    coef, *_ = np.linalg.lstsq(design * w[:, None], y * w, rcond=None)
    a2, b2 = coef
    resid = (y - design @ coef) * w
    dof = max(len(y) - 2, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.pinv((design * w[:, None]).T @ (design * w[:, None]))
    b_err = float(math.sqrt(max(cov[1, 1], 0.0)))
    if not b2 > 0 or abs(b2) <= 3 * b_err:
        raise NoDivergence(f"B = {b2:.3e} is consistent with zero (stderr {b_err:.3e})")

    def model(xx, a, logb, p):
        return a + np.exp(logb) * xx**-p

    try:
        popt, _ = scipy.optimize.curve_fit(
            model, x, y, p0=(a2, math.log(b2), 2.0), sigma=np.abs(y),
            xtol=1e-15, ftol=1e-15, gtol=1e-15, maxfev=20000,
        )
    except RuntimeError as exc:
        raise NoDivergence(f"power-law fit failed: {exc}") from exc
    p = float(popt[2])
    rel = (y - model(x, *popt)) / y
    residual = float(np.sqrt(np.mean(rel**2)))
    return DivergenceFit(tau_res, float(a2), float(b2), b_err, p, residual, len(y))
