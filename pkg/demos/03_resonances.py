"""
Resonant sampling times
=======================

An eigenvalue of the no-detection block that touches the unit circle at an
isolated tau makes <t_f> blow up like 1/dtau^2 nearby.  Such times sit on
degenerate sampling times, where several energies pick up equal phases.
"""

import math

import numpy as np

from firstdetect import DetectionSpec, LatticeModel, projectors
from firstdetect.lattice import evolution, many_body_hamiltonian
from firstdetect.manybody import two_particle_state
from firstdetect.resonance import degenerate_times, fit_divergence, scan_moduli
from firstdetect.strobe import StrobeProblem, compress, mean_first_detection_time, trapped_survival

l = 3
h = many_body_hamiltonian(LatticeModel(l).hamiltonian(), 2)
cands = degenerate_times(np.linalg.eigvalsh(h), 10.0)
print("degenerate times / (pi/sqrt2):",
      sorted({round(d.tau / (math.pi / math.sqrt(2)), 4) for d in cands}))

grid = np.linspace(0.0, 10.0, 501)
for label in (">=1", "=2"):
    scan = scan_moduli(LatticeModel(l), DetectionSpec.parse(label, 2, l), grid)
    print(f"resonant times for {label}:", [round(t, 4) for t in scan.resonant_taus()])

# Sample <t_f>/tau on both sides of the mirror time and fit A + B/dtau^p.
tau_res = math.pi / math.sqrt(2)
pair = projectors(DetectionSpec.parse("=2", 2, l))
state = two_particle_state(0.5, l)
samples = []
for d in np.concatenate([-np.geomspace(0.005, 0.05, 8), np.geomspace(0.005, 0.05, 8)]):
    t = tau_res + d
    path = compress(StrobeProblem(evolution(LatticeModel(l), 2, t).U, pair, state, t))
    r = mean_first_detection_time(path, trapped_survival(path), t, k_cap=10**7)
    samples.append((d, r.value / t))
fit = fit_divergence(tau_res, samples)
print(f"fit at pi/sqrt2: A = {fit.A:.4f}, B = {fit.B:.3e}, p = {fit.fitted_exponent:.5f}, "
      f"residual = {fit.residual:.1e}")
