"""
Recovering the conformal class from the disks
=============================================

Beta-planes from the disk family, the null-cone fit, and the round trip back
to a self-dual metric (coarse settings so the script runs in about a minute).
"""

import numpy as np

from zollfrei.disks import QGrid, SolverConfig, build_family, flat_anchor, solve_disk
from zollfrei.embedding import random_embedding
from zollfrei.manifold import random_point, selfdual_residual
from zollfrei.reconstruction import fit_at, gauge_fixed, plucker_fit, reconstruct_metric_field

P = random_embedding(np.random.default_rng(5), norm=0.05)
sol = solve_disk(P, flat_anchor(0.1, -0.2j)[0], cfg=SolverConfig(modes=16))

# eight beta-planes at the anchor fix a split-signature form up to scale
fit, planes = fit_at(sol)
print("signature", fit.signature, " uniqueness gap", f"{fit.gap:.1e}")
print(np.round(gauge_fixed(fit.Gq), 4))

# the same form through the bivectors of the planes
G, gap = plucker_fit(planes)
print("Plucker route agrees to", np.max(np.abs(gauge_fixed(G) - gauge_fixed(fit.Gq))))

# interpolate the fits into a metric on S^2 x S^2; a 5x6 grid only resolves degree 2,
# so expect residuals near 1e-2 here (the acceptance runs use an 8x14 grid and degree 6)
fam = build_family(P, QGrid(5, 6), SolverConfig(modes=12))
rec = reconstruct_metric_field(fam, L=2)
pts = random_point(np.random.default_rng(6), 3)
print(f"fit error {rec.fit_error:.1e}, self-duality residual {selfdual_residual(rec.metric, pts):.1e}")
