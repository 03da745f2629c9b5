from __future__ import annotations

import numpy as np
import pytest

from firstdetect.detection import DetectionSpec, projectors
from firstdetect.lattice import LatticeModel, evolution
from firstdetect.manybody import two_particle_state
from firstdetect.strobe import StrobeProblem


def two_particle_problem(l: int, detector: str, overlap: float, tau: float, *, with_h: bool = True) -> StrobeProblem:
    ev = evolution(LatticeModel(l), 2, tau)
    pair = projectors(DetectionSpec.parse(detector, 2, l))
    state = two_particle_state(overlap, l)
    return StrobeProblem(ev.U, pair, state, tau, hamiltonian=ev.H if with_h else None)


def rabi_problem(tau: float) -> StrobeProblem:
    """One particle on two sites, starting on site 1, detector on site 2."""
    ev = evolution(LatticeModel(2), 1, tau)
    pair = projectors(DetectionSpec.parse(">=1", 1, 2))
    rho = np.diag([1.0, 0.0]).astype(complex)
    return StrobeProblem(ev.U, pair, rho, tau, hamiltonian=ev.H)


@pytest.fixture
def make_problem():
    return two_particle_problem


def pytest_terminal_summary(terminalreporter):
    """Print one pass/fail line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") != "call" and outcome != "error":
                continue
            name = rep.nodeid.split("::")[-1]
            if "test_acceptance" in rep.nodeid and name.startswith("test_criterion_"):
                num = int(name.split("_")[2])
                label = " ".join(name.split("_")[3:])
                lines.append((num, f"criterion {num:2d} {label}: {'PASS' if outcome == 'passed' else 'FAIL'}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
