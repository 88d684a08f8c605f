import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles as o
from zollfrei.errors import ChartDomainError, ContractViolation, FrameError
from zollfrei.manifold import (EPS4, PAIRING, PHI, PSI, Frame4, Point4, Tangent4, asd_basis,
                               chart_basis, chart_to_point, curvature_decompose,
                               curvature_operator, eval_g0, form_inner, gram_schmidt_frame,
                               hodge_star, pairing_matrix, point_to_chart, random_point,
                               reassemble_riemann, selfdual_residual, stereographic_chart)
from zollfrei.metrics import flat, g0, product_nonround

seeds = st.integers(0, 2 ** 31 - 1)


def _pt(seed):
    return random_point(np.random.default_rng(seed))


# -- points and g0 ------------------------------------------------------------

P0 = Point4(np.array([1.0, 0, 0]), np.array([0, 0, 1.0]))


@pytest.mark.parametrize("u,w,val", [((0, 1, 0), (0, 0, 0), 1.0), ((0, 1, 0), (1, 0, 0), 0.0),
                                     ((0, 0, 0), (1, 0, 0), -1.0)])
def test_eval_g0_examples(u, w, val):
    t = Tangent4(np.array(u, float), np.array(w, float))
    assert eval_g0(P0, t, t) == val


def test_point_contract():
    with pytest.raises(ContractViolation):
        Point4(np.array([1.0, 1.0, 0]), np.array([0, 0, 1.0]))


@given(seeds)
def test_g0_matches_metric_field(seed):
    rng = np.random.default_rng(seed)
    p = random_point(rng)
    T = chart_basis(p)
    a, b = (Tangent4.from_array(T @ rng.standard_normal(4)) for _ in range(2))
    assert g0()(p, a, b) == pytest.approx(eval_g0(p, a, b), abs=1e-12)
    assert eval_g0(p, a, b) == pytest.approx(eval_g0(p, b, a), abs=1e-12)


# -- charts -----------------------------------------------------------------------


def test_stereographic_examples():
    p = Point4(np.array([1.0, 0, 0]), np.array([0, 0, -1.0]))
    np.testing.assert_allclose(stereographic_chart(p), o.FROZEN["stereo_a"], atol=1e-15)
    p = Point4(np.array([0, 1.0, 0]), np.array([0, 0, -1.0]))
    np.testing.assert_allclose(stereographic_chart(p), o.FROZEN["stereo_b"], atol=1e-15)


def test_stereographic_domain_error():
    with pytest.raises(ChartDomainError):
        stereographic_chart(Point4(np.array([1.0, 0, 0]), np.array([1.0, 0, 0])))


@given(seeds, st.lists(st.floats(-0.3, 0.3), min_size=4, max_size=4))
def test_gnomonic_chart_roundtrip(seed, c):
    p = _pt(seed)
    q = chart_to_point(p, np.array(c))
    np.testing.assert_allclose(point_to_chart(p, q), c, atol=1e-12)


def test_chart_basis_orthonormal_and_tangent():
    p = _pt(3)
    T = chart_basis(p)
    np.testing.assert_allclose(T.T @ T, np.eye(4), atol=1e-14)
    assert np.allclose(T[:3].T @ p.x, 0) and np.allclose(T[3:].T @ p.y, 0)


# -- frames ----------------------------------------------------------------------

GRAM = np.diag([1.0, 1, -1, -1])


@given(seeds)
def test_gram_schmidt_frame_gram(seed):
    p = _pt(seed)
    F = gram_schmidt_frame(g0(), p)
    A = g0().tensor(p.x, p.y)
    assert np.max(np.abs(F.E @ A @ F.E.T - GRAM)) < 1e-12


def test_gram_schmidt_idempotent():
    p = _pt(4)
    F = gram_schmidt_frame(g0(), p)
    F2 = gram_schmidt_frame(g0(), p, F.vectors)
    np.testing.assert_allclose(F2.E, F.E, atol=1e-14)


def test_gram_schmidt_repeated_seed():
    p = _pt(5)
    v = gram_schmidt_frame(g0(), p).vectors
    with pytest.raises(FrameError):
        gram_schmidt_frame(g0(), p, [v[0], v[0], v[2], v[3]])


# -- 2-forms -------------------------------------------------------------------------


@given(seeds)
def test_pairing_table(seed):
    rng = np.random.default_rng(seed)
    p = random_point(rng)
    T = chart_basis(p)
    seed_vecs = [Tangent4.from_array(T @ rng.standard_normal(4)) for _ in range(4)]
    try:
        F = gram_schmidt_frame(g0(), p, seed_vecs)
    except FrameError:
        return
    B = asd_basis(F)
    np.testing.assert_allclose(pairing_matrix(B.forms), np.diag([1.0, -1, -1]), atol=1e-14)
    np.testing.assert_array_equal(PAIRING, [1.0, -1, -1])


def test_hodge_eigenvalue_matches_oracle():
    lam = o.FROZEN["hodge_asd_eigenvalues"]
    for j in range(3):
        np.testing.assert_allclose(hodge_star(PHI[j]), lam[j] * PHI[j], atol=1e-15)
        np.testing.assert_allclose(hodge_star(PSI[j]), -lam[j] * PSI[j], atol=1e-15)
    # the package forms equal the oracle's wedge construction
    for j, phi in enumerate(o.asd_forms_oracle()):
        np.testing.assert_allclose(PHI[j], np.array(phi, dtype=float), atol=1e-15)


def test_hodge_star_involution():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((4, 4))
    a = a - a.T
    np.testing.assert_allclose(hodge_star(hodge_star(a)), a, atol=1e-13)
    assert EPS4[0, 1, 2, 3] == 1


def test_swap_e1_e2_flips_phi1():
    g = g0()
    p = _pt(6)
    F = gram_schmidt_frame(g, p)
    v = F.vectors
    Fs = gram_schmidt_frame(g, p, [v[1], v[0], v[2], v[3]])
    # the orientation repair negates e4 of the swapped seed
    np.testing.assert_allclose(Fs.E, np.array([F.E[1], F.E[0], F.E[2], -F.E[3]]), atol=1e-14)
    forms = asd_basis(Fs).components_in(F, g)
    np.testing.assert_allclose(forms[0], -PHI[0], atol=1e-14)
    np.testing.assert_allclose(forms[1], PHI[2], atol=1e-14)
    np.testing.assert_allclose(forms[2], PHI[1], atol=1e-14)


def test_wedge_antisymmetry_raw_swap():
    # relabelling e1 <-> e2 in the components flips e^1 ^ e^2
    S = np.eye(4)[[1, 0, 2, 3]]
    e12 = np.zeros((4, 4))
    e12[0, 1], e12[1, 0] = 1, -1
    np.testing.assert_allclose(S @ e12 @ S.T, -e12)


# -- curvature -------------------------------------------------------------------------


def test_g0_curvature_flat_model():
    rng = np.random.default_rng(7)
    for p in random_point(rng, 20):
        cd = curvature_decompose(g0(), p)
        wp, wm, _, s = cd.norms()
        assert s < 1e-6 and wp < 1e-6 and wm < 1e-6


def test_g0_riemann_normalisation():
    # product of unit spheres: each factor has R_1212 = +1 in its orthonormal frame
    cd = curvature_decompose(g0(), _pt(8))
    R = cd.riemann
    assert R[0, 1, 0, 1] == pytest.approx(1.0, abs=1e-6)
    assert R[2, 3, 2, 3] == pytest.approx(-1.0, abs=1e-6)
    assert R[0, 2, 0, 2] == pytest.approx(0.0, abs=1e-6)


def _chart_domain_points(rng, n):
    out = []
    while len(out) < n:
        p = random_point(rng)
        if abs(p.x[2] - p.y[2]) > 0.3:
            out.append(p)
    return out


def test_flat_chart_metric_all_blocks_zero():
    for p in _chart_domain_points(np.random.default_rng(9), 5):
        cd = curvature_decompose(flat(), p)
        assert max(cd.norms()) < 1e-8
    assert selfdual_residual(flat(), _chart_domain_points(np.random.default_rng(1), 3)) < 1e-8


def test_g0_selfdual_residual():
    assert selfdual_residual(g0(), random_point(np.random.default_rng(10), 10)) < 1e-6


def test_nonround_matches_index_loop_oracle():
    p = Point4(o.REF_X, o.REF_Y)
    cd = curvature_decompose(product_nonround(), p)
    wp, wm, _, _ = cd.norms()
    assert cd.s == pytest.approx(o.FROZEN["nonround_scalar"], abs=1e-7)
    assert wp == pytest.approx(o.FROZEN["nonround_weyl_norm"], abs=1e-7)
    assert wm == pytest.approx(o.FROZEN["nonround_weyl_norm"], abs=1e-7)


@given(seeds)
def test_nonround_matches_oracle_random(seed):
    p = _pt(seed)
    s, wp, wm = o.nonround_curvature_oracle(p.x, p.y)
    cd = curvature_decompose(product_nonround(), p)
    assert cd.s == pytest.approx(s, abs=1e-6)
    assert np.linalg.norm(cd.Wminus) == pytest.approx(wm, abs=1e-6)


def test_nonround_not_selfdual():
    p = Point4(o.REF_X, o.REF_Y)
    assert selfdual_residual(product_nonround(), [p]) > 1e-3
    # generic points too
    pts = random_point(np.random.default_rng(12), 5)
    assert selfdual_residual(product_nonround(), pts) > 1e-3


def test_reassemble_inverts_operator():
    rng = np.random.default_rng(2)
    M = rng.standard_normal((6, 6))
    # a curvature operator is symmetric for the pairing
    pair = np.concatenate([PAIRING, PAIRING])
    M = 0.5 * (M + (pair[:, None] * M.T * pair[None, :]))
    R = reassemble_riemann(M)
    np.testing.assert_allclose(curvature_operator(R), M, atol=1e-12)


def test_form_inner_orthogonality_of_halves():
    for a in PHI:
        for b in PSI:
            assert form_inner(a, b) == pytest.approx(0.0, abs=1e-15)


def test_frame_components():
    p = _pt(13)
    F = gram_schmidt_frame(g0(), p)
    assert isinstance(F, Frame4)
    C = F.components()
    np.testing.assert_allclose(chart_basis(p) @ C, F.E.T, atol=1e-14)
