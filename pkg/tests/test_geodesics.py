import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles as o
from zollfrei.errors import ContractViolation, IntegrabilityError
from zollfrei.geodesics import (beta_plane_vectors, closure_of, induced_curvature,
                                integrate_beta_surface, integrate_null_geodesic,
                                random_null_vector, surface_intersection_count,
                                wronskian_check, zollfrei_closure_test)
from zollfrei.manifold import (PHI, Point4, Tangent4, chart_basis, gram_schmidt_frame,
                               hodge_star, random_point, stereographic_chart)
from zollfrei.metrics import flat, g0, product_nonround

seeds = st.integers(0, 2 ** 31 - 1)


def _unit_null(p, rng):
    u = rng.standard_normal(3)
    u -= (u @ p.x) * p.x
    w = rng.standard_normal(3)
    w -= (w @ p.y) * p.y
    return Tangent4(u / np.linalg.norm(u), w / np.linalg.norm(w))


# -- null geodesics ----------------------------------------------------------------


@given(seeds)
def test_g0_geodesics_are_great_circle_pairs(seed):
    rng = np.random.default_rng(seed)
    p = random_point(rng)
    v = _unit_null(p, rng)
    tr = integrate_null_geodesic(g0(), p, v, 4 * np.pi, n_out=101)
    t = tr.t[:, None]
    x = np.cos(t) * p.x + np.sin(t) * v.u
    y = np.cos(t) * p.y + np.sin(t) * v.w
    assert np.max(np.abs(tr.X - np.hstack([x, y]))) < 1e-8


def test_non_null_rejected():
    p = random_point(np.random.default_rng(0))
    v = _unit_null(p, np.random.default_rng(1))
    with pytest.raises(ContractViolation):
        integrate_null_geodesic(g0(), p, Tangent4(v.u, 0.5 * v.w), 1.0)


def test_flat_chart_geodesic_is_straight():
    rng = np.random.default_rng(2)
    while True:
        p = random_point(rng)
        if abs(p.x[2] - p.y[2]) > 0.8:
            break
    v = random_null_vector(flat(), p, rng)
    tr = integrate_null_geodesic(flat(), p, v, 0.05, n_out=21)
    c = np.array([stereographic_chart(q) for q in tr.points])
    d = c - c[0]
    s = np.linalg.svd(d, compute_uv=False)
    assert s[1] < 1e-9 * s[0]


def test_g0_closure_period():
    reps = zollfrei_closure_test(g0(), 10, seed=3, tol=1e-6)
    for r in reps:
        assert r.closed and r.endpoint_gap < 1e-6
        assert abs(r.period_estimate - 2 * np.pi) < 1e-6


def test_flat_chart_none_closed():
    rng = np.random.default_rng(4)
    gaps = []
    for _ in range(5):
        while True:
            p = random_point(rng)
            if abs(p.x[2] - p.y[2]) > 0.8:
                break
        v = random_null_vector(flat(), p, rng)
        r = closure_of(flat(), p, v, tol=1e-6, max_length=0.2)
        assert not r.closed
        gaps.append(r.endpoint_gap)
    assert min(gaps) > 1e-3


@pytest.mark.slow
def test_reconstructed_metric_closes():
    from _support import roundtrip_seed
    rep = roundtrip_seed(11)
    assert rep["stage"] == "done"
    assert rep["closed_fraction"] == 1.0 and rep["max_closure_gap"] < 1e-3


# -- beta-surfaces ---------------------------------------------------------------


def test_beta_plane_at_zeta_zero():
    E = np.eye(4)
    a, b = beta_plane_vectors(E, 0.0)
    np.testing.assert_array_equal(a, [1, 0, 0, -1])
    np.testing.assert_array_equal(b, [0, 1, -1, 0])
    # the plane is anti-self-dual: a ^ b lies in Lambda^-
    W = np.outer(a, b) - np.outer(b, a)
    np.testing.assert_allclose(hodge_star(W), -W, atol=1e-15)
    np.testing.assert_allclose(W, np.sqrt(2) * (PHI[0] - PHI[1]), atol=1e-15)


@given(st.floats(-3, 3))
def test_beta_planes_totally_null(z):
    a, b = beta_plane_vectors(np.eye(4), z)
    G = np.diag([1.0, 1, -1, -1])
    assert max(abs(a @ G @ a), abs(a @ G @ b), abs(b @ G @ b)) < 1e-9 * (1 + z * z) ** 2


def test_g0_beta_surface_is_graph_sphere():
    p = random_point(np.random.default_rng(5))
    S = integrate_beta_surface(g0(), p, 0.0)
    X = S.X.reshape(-1, 6)
    R = np.linalg.lstsq(X[:, :3], X[:, 3:], rcond=None)[0].T
    assert np.max(np.abs(X[:, :3] @ R.T - X[:, 3:])) < 1e-8
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-8)
    # the rim at r = pi collapses to the antipode, so the surface closes up
    assert np.max(np.abs(S.X[-1] + p.array)) < 1e-8
    assert S.isotropy < 1e-9


def test_flat_beta_surface_is_affine_plane():
    rng = np.random.default_rng(6)
    while True:
        p = random_point(rng)
        if abs(p.x[2] - p.y[2]) > 0.8:
            break
    S = integrate_beta_surface(flat(), p, 0.3, extent=0.1, n=6)
    c = np.array([stereographic_chart(Point4(r[:3], r[3:])) for r in S.X.reshape(-1, 6)])
    s = np.linalg.svd(c - c.mean(axis=0), compute_uv=False)
    assert s[2] < 1e-8 * s[0]


def test_nonselfdual_beta_surface_fails():
    p = Point4(o.REF_X, o.REF_Y)
    with pytest.raises(IntegrabilityError):
        integrate_beta_surface(product_nonround(), p, 0.0, n=12)


def test_two_g0_surfaces_meet_twice():
    rng = np.random.default_rng(7)
    p1, p2 = random_point(rng, 2)
    S1 = integrate_beta_surface(g0(), p1, 0.2)
    S2 = integrate_beta_surface(g0(), p2, -0.7)
    assert surface_intersection_count(S1, S2) == 2


def test_self_comparison_rejected():
    S = integrate_beta_surface(g0(), random_point(np.random.default_rng(8)), 0.0, n=8)
    with pytest.raises(ContractViolation):
        surface_intersection_count(S, S)


# -- Wronskian --------------------------------------------------------------------


def test_g0_kappa_matches_round_oracle():
    p = random_point(np.random.default_rng(9))
    S = integrate_beta_surface(g0(), p, 0.0)
    V = S.direction(0.4)
    a, b = S.basis
    W = b - (b @ V) / (V @ V) * V
    assert induced_curvature(g0(), p.array, V, W) == pytest.approx(o.round_beta_kappa(V), abs=1e-7)
    assert o.round_beta_kappa(V) == pytest.approx(o.FROZEN["g0_beta_kappa"], abs=1e-12)


def test_g0_wronskian_drift():
    p = random_point(np.random.default_rng(10))
    S = integrate_beta_surface(g0(), p, 0.0)
    tr = integrate_null_geodesic(g0(), p, Tangent4.from_array(S.direction(0.3)), 2.5)
    assert wronskian_check(g0(), S, tr) < 1e-8


def test_flat_wronskian_drift():
    rng = np.random.default_rng(11)
    while True:
        p = random_point(rng)
        if abs(p.x[2] - p.y[2]) > 0.8:
            break
    S = integrate_beta_surface(flat(), p, 0.0, extent=0.1, n=8)
    tr = integrate_null_geodesic(flat(), p, Tangent4.from_array(S.direction(1.1)), 0.08)
    assert wronskian_check(flat(), S, tr) < 1e-12


@pytest.mark.slow
def test_reconstructed_wronskian_and_surfaces():
    from _support import roundtrip_seed
    g = roundtrip_seed(11)["reconstruction"].metric
    rng = np.random.default_rng(12)
    p1, p2 = random_point(rng, 2)
    # the reconstructed metric is self-dual to the round-trip tolerance, not to 1e-5
    S1 = integrate_beta_surface(g, p1, 0.1, n=12, iso_tol=1e-3)
    S2 = integrate_beta_surface(g, p2, -0.4, n=12, iso_tol=1e-3)
    tr = integrate_null_geodesic(g, p1, Tangent4.from_array(S1.direction(0.7)), 2.0)
    assert wronskian_check(g, S1, tr) < 1e-4
    assert surface_intersection_count(S1, S2) == 2


def test_frame_default_is_gram_schmidt():
    p = random_point(np.random.default_rng(13))
    S = integrate_beta_surface(g0(), p, 0.0, n=4)
    F = gram_schmidt_frame(g0(), p)
    a, b = beta_plane_vectors(F.E, 0.0)
    np.testing.assert_allclose(S.base_plane, [a, b], atol=1e-14)
    assert chart_basis(p).shape == (6, 4)
