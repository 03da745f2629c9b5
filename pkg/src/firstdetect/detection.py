"""Binary number-resolving measurements on a single target site.

All projectors here are diagonal in the tensor basis.  They are assembled
from genuine q-particle observables ``P_q`` by alternating sums with exact
integer coefficients; :func:`counting_projector` builds the same operators
by directly counting particles on the target site and serves as a check.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .lattice import check_dimension, site_occupations


class Mode(str, enum.Enum):
    EXACTLY = "exactly"
    AT_LEAST = "at_least"


@dataclass(frozen=True)
class DetectionSpec:
    mode: Mode
    n: int
    target_site: int
    N: int
    l: int

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not 1 <= self.n <= self.N:
            raise ValueError(f"n must lie in 1..N, got n={self.n}, N={self.N}")
        if not 1 <= self.target_site <= self.l:
            raise ValueError(f"target site must lie in 1..{self.l}")

    @property
    def label(self) -> str:
        return ("=" if self.mode is Mode.EXACTLY else ">=") + str(self.n)

    @classmethod
    def parse(cls, label: str, N: int, l: int, target_site: int | None = None) -> "DetectionSpec":
        """Build from labels like ``'=2'``, ``'>=1'`` or ``'ge1'``; target defaults to site l."""
        s = label.strip().lower()
        for prefix, mode in ((">=", Mode.AT_LEAST), ("ge", Mode.AT_LEAST),
                             ("==", Mode.EXACTLY), ("=", Mode.EXACTLY), ("eq", Mode.EXACTLY)):
            if s.startswith(prefix):
                try:
                    n = int(s[len(prefix):])
                except ValueError:
                    break
                return cls(mode, n, l if target_site is None else target_site, N, l)
        raise ValueError(f"cannot parse detector label {label!r}")


@dataclass(frozen=True)
class ProjectorPair:
    P_perp: np.ndarray
    P_par: np.ndarray

    @classmethod
    def from_perp(cls, p_perp: np.ndarray) -> "ProjectorPair":
        p_perp = np.asarray(p_perp)
        return cls(p_perp, np.eye(p_perp.shape[0], dtype=p_perp.dtype) - p_perp)

    @property
    def is_diagonal(self) -> bool:
        p = self.P_perp
        return not np.any(p - np.diag(np.diag(p)))


def _target_hits(N: int, l: int, target: int) -> np.ndarray:
    """Boolean ``(l**N, N)`` array: is particle ``a`` on the target site."""
    return site_occupations(l, N) == target


def genuine_q_projector(q: int, N: int, l: int, target: int) -> np.ndarray:
    """Sum over the ``C(N, q)`` placements of ``q`` target-site projectors.

    Returned as an integer matrix.
    """
    if not 0 <= q <= N:
        raise ValueError("q must lie in 0..N")
    check_dimension(l, N)
    hits = _target_hits(N, l, target)
    diag = np.zeros(l**N, dtype=np.int64)
    for placement in combinations(range(N), q):
        diag += np.all(hits[:, list(placement)], axis=1)
    return np.diag(diag)


def _alternating_sum(spec: DetectionSpec, coefficient) -> np.ndarray:
    N, l, t = spec.N, spec.l, spec.target_site
    total = np.zeros((l**N, l**N), dtype=np.int64)
    for q in range(spec.n, N + 1):
        total += (-1) ** (q - spec.n) * coefficient(q) * genuine_q_projector(q, N, l, t)
    return total


def exactly_perp(spec: DetectionSpec) -> np.ndarray:
    """Integer projector for exactly ``n`` particles on the target."""
    return _alternating_sum(spec, lambda q: comb(q, spec.n))


def at_least_perp(spec: DetectionSpec) -> np.ndarray:
    """Integer projector for at least ``n`` particles on the target."""
    # (n/q) C(q, n) == C(q-1, n-1), always an integer
    return _alternating_sum(spec, lambda q: comb(q - 1, spec.n - 1))


def projector_exactly(spec: DetectionSpec) -> ProjectorPair:
    return ProjectorPair.from_perp(exactly_perp(spec).astype(np.complex128))


def projector_at_least(spec: DetectionSpec) -> ProjectorPair:
    return ProjectorPair.from_perp(at_least_perp(spec).astype(np.complex128))


def projectors(spec: DetectionSpec) -> ProjectorPair:
    if spec.mode is Mode.EXACTLY:
        return projector_exactly(spec)
    return projector_at_least(spec)


def counting_projector(spec: DetectionSpec) -> np.ndarray:
    """Integer projector built by counting particles on the target site."""
    count = _target_hits(spec.N, spec.l, spec.target_site).sum(axis=1)
    if spec.mode is Mode.EXACTLY:
        keep = count == spec.n
    else:
        keep = count >= spec.n
    return np.diag(keep.astype(np.int64))
