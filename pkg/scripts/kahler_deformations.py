"""
Deformations that keep the Kahler structure
===========================================

Divergence-free fields on RP^3, the pullback of the meromorphic 3-form, and
exact deformations built by flowing along a holomorphic vector field.
"""

import numpy as np

from zollfrei.embedding import random_embedding
from zollfrei.kahler import (FlowEmbedding, divergence_split, holomorphic_flow, kahler_scalar_curvature,
                             phi_pullback_linearized, phi_pullback_norm, random_divfree)
from zollfrei.manifold import random_point

# first order: the imaginary part of the pullback is the divergence
free, comp = divergence_split(3)
print(f"{len(free)} divergence-free fields, max linearized pullback "
      f"{max(phi_pullback_linearized(v) for v in free):.1e}")
print(f"{len(comp)} complementary fields, min linearized pullback "
      f"{min(phi_pullback_linearized(v) for v in comp):.2f}")

# a generic graph deformation is not special Lagrangian for the 3-form
print("generic embedding:", phi_pullback_norm(random_embedding(np.random.default_rng(1), norm=0.05)))

# the holomorphic flow of a divergence-free field keeps it real
f = random_divfree(np.random.default_rng(2), norm=0.05)
for t in (0.05, 0.1, 0.2):
    print(f"t = {t}: pullback {holomorphic_flow(f, t).pullback_norm():.1e}")

# the Kahler representative of the resulting metric is scalar-flat
q = random_point(np.random.default_rng(3))
print("scalar curvature:", kahler_scalar_curvature(FlowEmbedding(f, 0.1), q))
