"""
The flat model on S^2 x S^2
===========================

Curvature, null geodesics and beta-surfaces of the product metric with
opposite signs on the two unit spheres.
"""

import numpy as np

from zollfrei.geodesics import integrate_beta_surface, surface_intersection_count, zollfrei_closure_test
from zollfrei.manifold import curvature_decompose, random_point
from zollfrei.metrics import g0, product_nonround

rng = np.random.default_rng(0)

# every curvature block vanishes except the tracefree Ricci part
cd = curvature_decompose(g0(), random_point(rng))
print("|W+|, |W-|, |ric0|, s =", np.round(cd.norms(), 10))

# the non-round control metric is not self-dual
cd = curvature_decompose(product_nonround(), random_point(rng))
print("control metric |W-| =", np.linalg.norm(cd.Wminus))

# null geodesics are pairs of great circles and return after 2 pi
for r in zollfrei_closure_test(g0(), 5, seed=1):
    print(f"closed={r.closed} gap={r.endpoint_gap:.1e} period={r.period_estimate:.10f}")

# two beta-surfaces meet in exactly two points
p1, p2 = random_point(rng, 2)
S1 = integrate_beta_surface(g0(), p1, 0.3)
S2 = integrate_beta_surface(g0(), p2, -1.2)
print("beta-surface intersections:", surface_intersection_count(S1, S2))
