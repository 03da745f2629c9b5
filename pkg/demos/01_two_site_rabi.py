"""
One particle, two sites
=======================

The smallest stroboscopic problem: a particle starts on site 1 of a
two-site chain and we look for it on site 2 every tau.  The no-detection
block is the 1x1 matrix cos(tau), so the mean first detection time has the
closed form tau / sin(tau)^2.
"""

import math

import numpy as np

from firstdetect import DetectionSpec, LatticeModel, projectors
from firstdetect.lattice import evolution
from firstdetect.strobe import StrobeProblem, detection_statistics

pair = projectors(DetectionSpec.parse(">=1", 1, 2))
rho = np.diag([1.0, 0.0]).astype(complex)

# The default truncation stops once S_k - S_inf < 1e-4; a tighter eps makes
# the comparison with the closed form sharp.
print(" tau     <t_f> engine   tau/sin^2   k used")
for tau in (0.3, 0.8, 1.2, math.pi / 2, 2.5):
    ev = evolution(LatticeModel(2), 1, tau)
    stats = detection_statistics(StrobeProblem(ev.U, pair, rho, tau), k_max=50, eps=1e-13)
    print(f"{tau:5.3f}  {stats.t_first:12.6f}  {tau / math.sin(tau) ** 2:10.6f}  {stats.k_truncated:6d}")

# F_k is geometric: the particle is found at step k with probability
# sin^2(tau) cos^{2(k-1)}(tau).
tau = 0.8
ev = evolution(LatticeModel(2), 1, tau)
stats = detection_statistics(StrobeProblem(ev.U, pair, rho, tau), k_max=5)
print("F_1..F_5:", np.round(stats.F, 6))
print("closed  :", np.round([math.sin(tau) ** 2 * math.cos(tau) ** (2 * (k - 1)) for k in range(1, 6)], 6))

# At tau = pi the block is -1: the particle returns to site 1 every time.
stats = detection_statistics(StrobeProblem(evolution(LatticeModel(2), 1, math.pi).U, pair, rho, math.pi))
print("tau = pi:", stats.flag.value, "S_inf =", stats.S_inf)
