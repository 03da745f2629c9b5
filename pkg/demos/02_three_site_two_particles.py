"""
Two particles on three sites
============================

Particles start on sites 1 and 2, the detector watches site 3.  The signed
overlap x = +-|<phi_1|phi_2>|^2 interpolates between fermions (x = -1),
distinguishable particles (x = 0) and bosons (x = 1).
"""

import math

from firstdetect import DetectionSpec, LatticeModel, projectors
from firstdetect.lattice import evolution
from firstdetect.manybody import symmetric_expectation, two_particle_state
from firstdetect.strobe import StrobeProblem, detection_statistics

l, tau = 3, 1.0
ev = evolution(LatticeModel(l), 2, tau)

# "at least one", "exactly one" and "both" particles on the target site
for label in (">=1", "=1", "=2"):
    pair = projectors(DetectionSpec.parse(label, 2, l))
    print(f"detector {label}")
    for x in (-1.0, -0.5, 0.0, 0.5, 1.0):
        state = two_particle_state(x, l)
        stats = detection_statistics(StrobeProblem(ev.U, pair, state, tau, hamiltonian=ev.H), eps=1e-12)
        shown = f"{stats.t_first:9.4f}" if stats.t_first is not None else stats.flag.value
        print(f"   x = {x:+.2f}   <Pi_S> = {symmetric_expectation(state):.3f}   "
              f"S_inf = {stats.S_inf:.4f}   <t_f> = {shown}")

# With the "=2" detector the time does not depend on x: the first-detection
# distribution only gets rescaled by the symmetric weight, and the
# normalization removes that factor again.  (With the default eps = 1e-4
# the series is cut at slightly different k for each x, which leaves a
# spread of a few 1e-4; the tight eps above hides it.)  Identical fermions never meet
# on one site and are never detected.

# At tau = pi/sqrt(2) the chain mirrors the pair onto sites 2 and 3, which
# never doubly occupies the target: everything is trapped.
tau = math.pi / math.sqrt(2)
ev = evolution(LatticeModel(l), 2, tau)
pair = projectors(DetectionSpec.parse("=2", 2, l))
stats = detection_statistics(StrobeProblem(ev.U, pair, two_particle_state(0.5, l), tau, hamiltonian=ev.H))
print(f"tau = pi/sqrt2, detector =2: S_inf = {stats.S_inf:.12f}, flag = {stats.flag.value}")
