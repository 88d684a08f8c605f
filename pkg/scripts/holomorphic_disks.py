"""
Holomorphic disks with boundary on RP^3
=======================================

Solve the boundary-value problem for the standard RP^3 and for a small
deformation of it, and look at the topological invariants of the solutions.
"""

import numpy as np

from zollfrei.disks import (QGrid, SolverConfig, build_family, closed_form_error, flat_anchor,
                            flat_partial_indices, maslov_index, solve_disk)
from zollfrei.embedding import random_embedding

# the flat disks are known in closed form
a, b = 0.3 - 0.1j, 0.2j
q, _ = flat_anchor(a, b)
sol = solve_disk(None, q, cfg=SolverConfig(modes=32))
print("closed-form error:", closed_form_error(sol, a, b))
print("Maslov index:", maslov_index(sol), " partial indices:", flat_partial_indices(sol)[0])

# a deformed RP^3, warm-started from the flat disk
P = random_embedding(np.random.default_rng(3), norm=0.05)
pert = solve_disk(P, q, seed=sol, cfg=SolverConfig(modes=32))
print(f"perturbed disk: {pert.iterations} Newton steps, residual {pert.residual:.1e}, "
      f"Maslov {maslov_index(pert, P)}")
C, rho = pert.spectral_decay()
print(f"Fourier coefficients decay like {C:.2g} * {rho:.2g}^k")

# a coarse family by continuation over a grid of anchors
fam = build_family(P, QGrid(4, 4), SolverConfig(modes=12))
print(f"family: {len(fam.disks)} disks, {len(fam.failures)} failures")
