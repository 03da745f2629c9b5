"""Numerical tolerances shared by every module.

All values are plain module constants so callers can read them, and most
public functions accept an override keyword.
"""

# linalg
HERMITIAN_TOL = 1e-12          # relative, ||H - H^dag||_max / ||H||_max
RECONSTRUCTION_TOL = 1e-8      # Q diag(lam) Qinv vs M, scaled by max(1, ||M||_max)
INVERSE_TOL = 1e-8             # ||Q Qinv - 1||_max
UNITARY_TOL = 1e-10
RANK_TOL = 1e-8                # singular value cutoff for spans

# lattice
DIMENSION_CAP = 20_000
INTERACTION_SYMMETRY_TOL = 1e-12

# manybody
GRAM_PSD_TOL = 1e-10
ZERO_NORM_TOL = 1e-12

# strobe
UNIT_MODULUS_TOL = 1e-9        # trapped-subspace membership, 1 - |lam| < tol
SURVIVAL_CLIP_TOL = 1e-9       # largest excursion of S_k outside [0, 1] that is silently clipped
NEGATIVE_F_TOL = 1e-12
DENOMINATOR_TOL = 1e-12        # guard on 1 - S_inf and D_inf
TRUNCATION_EPS = 1e-4
TRUNCATION_KCAP = 10_000
KRYLOV_TOL = 1e-10

# resonance
PHASE_TOL = 1e-8
FIT_WINDOW = 0.05
