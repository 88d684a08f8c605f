"""Acceptance criteria A1-A10; each test prints one ``A# PASS/FAIL`` line.

Tolerances and sample counts are pinned here and must not be relaxed.
"""

import time

import numpy as np
import pytest

from _support import (NORM, ROUNDTRIP_SEEDS, embedding_for, nearby_embedding, record, roundtrip,
                      roundtrip_seed)
from zollfrei.disks import (SolverConfig, closed_form_error, flat_anchor, flat_partial_indices,
                            maslov_index, solve_disk)
from zollfrei.distribution import conformal_invariance_check, involutivity_residual
from zollfrei.embedding import sample_sphere3
from zollfrei.geodesics import zollfrei_closure_test
from zollfrei.kahler import (FlowEmbedding, divergence_split, holomorphic_flow,
                             phi_pullback_linearized, random_divfree, residue_exterior_derivative)
from zollfrei.manifold import curvature_decompose, random_point
from zollfrei.metrics import g0, product_nonround
from zollfrei.reconstruction import beta_surface_from_point, surface_pair_intersections

# pinned tolerances
A1_TOL, A1_SECONDS = 1e-6, 10.0
A2_GAP, A2_PERIOD, A2_SECONDS = 1e-6, 1e-6, 60.0
A3_TOL, A3_SECONDS = 1e-8, 60.0
A5_SD, A5_GAP, A5_SECONDS = 1e-3, 1e-3, 1800.0
A7_SD, A7_NSD, A7_FRACTION = 1e-6, 1e-3, 0.9
A8_FREE, A8_COMP, A8_FLOW, A8_CLOSED = 1e-8, 1e-4, 1e-6, 1e-5
A9_TOL = 1e-7


def test_A1_flat_curvature():
    t0 = time.perf_counter()
    norms = np.array([curvature_decompose(g0(), p).norms()
                      for p in random_point(np.random.default_rng(101), 50)])
    dt = time.perf_counter() - t0
    wp, wm, s = norms[:, 0].max(), norms[:, 1].max(), np.abs(norms[:, 3]).max()
    ok = wp < A1_TOL and wm < A1_TOL and s < A1_TOL and dt < A1_SECONDS
    record("A1", ok, f"|s| {s:.2e}, |W+| {wp:.2e}, |W-| {wm:.2e} at 50 points in {dt:.1f} s")
    assert ok


def test_A2_flat_zollfrei():
    t0 = time.perf_counter()
    reps = zollfrei_closure_test(g0(), 100, seed=102, tol=A2_GAP)
    dt = time.perf_counter() - t0
    gap = max(r.endpoint_gap for r in reps)
    per = max(abs(r.period_estimate - 2 * np.pi) for r in reps)
    ok = all(r.closed for r in reps) and gap < A2_GAP and per < A2_PERIOD and dt < A2_SECONDS
    record("A2", ok, f"100 geodesics, max gap {gap:.2e}, max |T - 2pi| {per:.2e} in {dt:.1f} s")
    assert ok


def test_A3_flat_disks_exact():
    rng = np.random.default_rng(103)
    t0 = time.perf_counter()
    errs = []
    for _ in range(100):
        a, b = (complex(*rng.uniform(-1, 1, 2)) for _ in range(2))
        sol = solve_disk(None, flat_anchor(a, b)[0], cfg=SolverConfig(modes=32))
        errs.append(closed_form_error(sol, a, b))
    dt = time.perf_counter() - t0
    ok = max(errs) < A3_TOL and dt < A3_SECONDS
    record("A3", ok, f"100 disks at N = 32, max boundary error {max(errs):.2e} in {dt:.1f} s")
    assert ok


def test_A4_maslov_and_partial_indices():
    rng = np.random.default_rng(104)
    flat = [maslov_index(solve_disk(None, flat_anchor(*(complex(*rng.uniform(-1, 1, 2))
                                                        for _ in range(2)))[0],
                                    cfg=SolverConfig(modes=16)))
            for _ in range(20)]
    rep = roundtrip_seed(ROUNDTRIP_SEEDS[0])
    fam = rep.get("family")
    pert = [maslov_index(s, fam.embedding) for s in fam.disks.values()] if fam else []
    idx, defect = flat_partial_indices(solve_disk(None, flat_anchor(0j, 0j)[0],
                                                  cfg=SolverConfig(modes=16)))
    ok = bool(pert) and set(flat) == {4} and set(pert) == {4} and idx == (2, 1, 1) and defect < 1e-10
    record("A4", ok, f"Maslov {sorted(set(flat))} on 20 flat disks, {sorted(set(pert))} on "
                     f"{len(pert)} perturbed disks (norm {NORM}); partial indices {idx}")
    assert ok


def test_A5_roundtrip():
    lines, ok = [], True
    total = 0.0
    for seed in ROUNDTRIP_SEEDS:
        r = roundtrip_seed(seed)
        total += r["seconds"]
        good = (r["stage"] == "done" and r["selfdual_residual"] < A5_SD
                and r["closed_fraction"] == 1.0 and r["max_closure_gap"] < A5_GAP)
        ok &= good
        if r["stage"] == "done":
            lines.append(f"v{seed}: sd {r['selfdual_residual']:.2e}, gap {r['max_closure_gap']:.2e}")
        else:
            lines.append(f"v{seed}: stopped at {r['stage']} ({r.get('error')})")
    ok &= total < A5_SECONDS
    record("A5", ok, "; ".join(lines) + f"; total {total / 60:.1f} min")
    assert ok


def test_A6_two_point_intersection():
    P = embedding_for(ROUNDTRIP_SEEDS[0])
    ys = sample_sphere3(20, np.random.default_rng(106))
    counts, chis = [], []
    for k in range(10):
        S1 = beta_surface_from_point(P, ys[2 * k], n=42)
        S2 = beta_surface_from_point(P, ys[2 * k + 1], n=42)
        counts.append(len(surface_pair_intersections(S1, S2, P)))
        chis += [S1.euler_characteristic(), S2.euler_characteristic()]
    ok = set(counts) == {2} and set(chis) == {2}
    record("A6", ok, f"intersection counts {counts}, Euler characteristics {sorted(set(chis))}")
    assert ok


def test_A7_involutivity_dichotomy():
    rng = np.random.default_rng(107)
    sd = [involutivity_residual(g0(), p, float(z))
          for p, z in zip(random_point(rng, 50), rng.uniform(-2, 2, 50))]
    nsd = [involutivity_residual(product_nonround(), p, float(z))
           for p, z in zip(random_point(rng, 50), rng.uniform(-2, 2, 50))]
    frac = float(np.mean(np.array(nsd) > A7_NSD))
    ok = max(sd) < A7_SD and frac >= A7_FRACTION
    record("A7", ok, f"g0 max residual {max(sd):.2e}; control metric above {A7_NSD:g} at "
                     f"{100 * frac:.0f}% of 50 samples")
    assert ok


def test_A8_kahler_dichotomy():
    free, comp = divergence_split(3)
    a = max(phi_pullback_linearized(v) for v in free)
    b = min(phi_pullback_linearized(v) for v in comp)
    f = random_divfree(np.random.default_rng(108), norm=NORM)
    flows = [holomorphic_flow(f, t).pullback_norm() for t in (0.05, 0.1, 0.15, 0.2)]
    d, _ = residue_exterior_derivative(FlowEmbedding(f, 0.2), random_point(np.random.default_rng(109)))
    ok = a < A8_FREE and b > A8_COMP and max(flows) < A8_FLOW and d < A8_CLOSED
    record("A8", ok, f"div-free basis ({len(free)}) max {a:.2e}, complement ({len(comp)}) min {b:.2e}; "
                     f"flow pullback max {max(flows):.2e} for t <= 0.2; |d omega| {d:.2e}")
    assert ok


def test_A9_conformal_invariance():
    f = lambda x, y: 1.0 + 0.1 * x[..., 2]
    rng = np.random.default_rng(110)
    vals = [conformal_invariance_check(g0(), f, p, float(z))
            for p, z in zip(random_point(rng, 50), rng.uniform(-2, 2, 50))]
    ok = max(vals) < A9_TOL
    record("A9", ok, f"max identity defect {max(vals):.2e} at 50 samples")
    assert ok


def test_A10_empirical_stability():
    base = roundtrip_seed(ROUNDTRIP_SEEDS[0])
    r = roundtrip(("nearby", ROUNDTRIP_SEEDS[0]), nearby_embedding(ROUNDTRIP_SEEDS[0]))
    ok = (base["stage"] == "done" and r["stage"] == "done" and r["closed_fraction"] == 1.0
          and r["max_closure_gap"] < A5_GAP and r["selfdual_residual"] < A5_SD)
    detail = (f"nudged v{ROUNDTRIP_SEEDS[0]}: sd {r.get('selfdual_residual', float('nan')):.2e}, "
              f"gap {r.get('max_closure_gap', float('nan')):.2e}, closed "
              f"{r.get('closed_fraction', 0):.0%} (empirical check)")
    record("A10", ok, detail)
    assert ok
