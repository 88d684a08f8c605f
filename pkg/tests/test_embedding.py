import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

import oracles as o
from zollfrei.embedding import (PolyField, TotallyRealEmbedding, affine_chart, affine_inverse,
                                embed_P, fs_distance, gimel_embed, monomial_exponents,
                                odd_exponents, on_affine_B, plane_form, point_from_plane,
                                point_from_quadric, quadric_point, quadric_value,
                                random_embedding, sample_sphere3, standard_position)
from zollfrei.errors import ContractViolation
from zollfrei.manifold import random_point

seeds = st.integers(0, 2 ** 31 - 1)


def _xy(seed, scale=1.0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(4)
    x /= np.linalg.norm(x)
    y = rng.standard_normal(4) * scale
    y -= (y @ x) * x
    return x, y


# -- the gimel map ---------------------------------------------------------------------


def test_gimel_identity_on_zero_section():
    x, _ = _xy(0)
    np.testing.assert_array_equal(gimel_embed(x, np.zeros(4)), x)


@given(seeds, st.floats(0.0, 10.0))
def test_gimel_quadric_value(seed, scale):
    x, y = _xy(seed, scale)
    z = gimel_embed(x, y)
    expr = sp.sympify(o.FROZEN["gimel_quadric"])
    expected = float(expr.subs("r2", float(y @ y)))
    assert np.sum(z * z) == pytest.approx(expected, abs=1e-12)
    assert np.sum(z * z).real > 0


def test_gimel_example():
    z = gimel_embed(np.array([1.0, 0, 0, 0]), np.array([0, 1.0, 0, 0]))
    ref = np.array([complex(*c) for c in o.FROZEN["gimel_example"]])
    np.testing.assert_allclose(z, ref, atol=1e-15)


def test_gimel_contracts():
    with pytest.raises(ContractViolation):
        gimel_embed(np.array([2.0, 0, 0, 0]), np.zeros(4))
    with pytest.raises(ContractViolation):
        gimel_embed(np.array([1.0, 0, 0, 0]), np.array([1.0, 0, 0, 0]))


# -- graph embeddings -------------------------------------------------------------------


def test_zero_field_is_standard():
    x = sample_sphere3(20, np.random.default_rng(1))
    np.testing.assert_allclose(embed_P(TotallyRealEmbedding(), x), x, atol=1e-15)


@given(seeds)
def test_graph_avoids_quadric(seed):
    P = random_embedding(np.random.default_rng(seed), norm=0.5)
    x = sample_sphere3(50, np.random.default_rng(seed + 1))
    z = P.embed(x)
    v = P.v(x)
    np.testing.assert_allclose(np.sum(z * z, axis=-1), 1 / (1 + np.sum(v * v, axis=-1)), atol=1e-12)


def test_distance_taylor_expansion():
    c3 = o.FROZEN["fs_taylor_cubic"]
    base = random_embedding(np.random.default_rng(2), norm=1.0)
    x = sample_sphere3(40, np.random.default_rng(3))
    for s in (0.05, 0.02, 0.01):
        P = base.scaled(s)
        r = np.linalg.norm(P.v(x), axis=-1)
        d = fs_distance(P.embed(x), x.astype(complex))
        ok = r > 1e-3 * s
        assert np.max(np.abs(d - r)) <= 1.01 * abs(c3) * s ** 3 + 1e-15
        np.testing.assert_allclose((d[ok] - r[ok]) / r[ok] ** 3, c3, atol=5 * s * s)


def test_even_fields_rejected():
    exps = monomial_exponents(2)
    with pytest.raises(ContractViolation):
        TotallyRealEmbedding(PolyField(exps, np.ones((len(exps), 4))))


@given(seeds)
def test_field_tangent_and_descends(seed):
    P = random_embedding(np.random.default_rng(seed))
    assert P.tangency_defect() < 1e-14
    assert P.evenness_defect() < 1e-14
    assert P.sup_norm() == pytest.approx(0.05, rel=1e-12)


def test_jet_matches_finite_difference():
    P = random_embedding(np.random.default_rng(4), norm=0.2)
    x = sample_sphere3(1, np.random.default_rng(5))[0]
    t = np.random.default_rng(6).standard_normal(4)
    t -= (t @ x) * x
    z, J = P.jet(x)
    h = 1e-6
    fd = (P.embed(x + h * t) - P.embed(x - h * t)) / (2 * h)
    np.testing.assert_allclose(J @ t, fd, atol=1e-8)


def test_embedding_json_roundtrip(tmp_path):
    P = random_embedding(np.random.default_rng(7))
    P.save(tmp_path / "v.json")
    Q = TotallyRealEmbedding.load(tmp_path / "v.json")
    x = sample_sphere3(10)
    np.testing.assert_array_equal(P.embed(x), Q.embed(x))
    with pytest.raises(ContractViolation):
        TotallyRealEmbedding.from_json({"exponents": [[1, 0, 0, 0]], "coefficients": []})


def test_odd_exponents_only_odd():
    e = odd_exponents(5)
    assert np.all(e.sum(axis=1) % 2 == 1) and e.sum(axis=1).max() == 5


# -- affine chart and quadric --------------------------------------------------------------


@given(seeds)
def test_affine_roundtrip(seed):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    np.testing.assert_allclose(affine_chart(affine_inverse(w)), w, atol=1e-12)


@given(seeds)
def test_real_points_on_affine_B(seed):
    x = sample_sphere3(5, np.random.default_rng(seed))
    assert np.max(on_affine_B(affine_chart(x.astype(complex)))) < 1e-12


@given(seeds)
def test_quadric_points(seed):
    p = random_point(np.random.default_rng(seed))
    z = quadric_point(p)
    assert abs(np.sum(z * z)) < 1e-14
    assert abs(quadric_value(affine_chart(z))) < 1e-12
    np.testing.assert_allclose(point_from_quadric(z).array, p.array, atol=1e-12)


@given(seeds)
def test_plane_correspondence(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(4), rng.standard_normal(4)
    W = plane_form(point_from_plane(x, y))
    Pr = -W @ W
    np.testing.assert_allclose(Pr @ x, x, atol=1e-12)
    np.testing.assert_allclose(Pr @ y, y, atol=1e-12)


def test_standard_position_orthogonal():
    p = random_point(np.random.default_rng(8))
    A = standard_position(p)
    np.testing.assert_allclose(A.T @ A, np.eye(4), atol=1e-13)
    assert np.linalg.det(A) == pytest.approx(1.0)


@given(seeds)
def test_fs_distance_metric_properties(seed):
    rng = np.random.default_rng(seed)
    z, w = (rng.standard_normal(4) + 1j * rng.standard_normal(4) for _ in range(2))
    assert fs_distance(z, z) == pytest.approx(0.0, abs=1e-15)
    assert fs_distance(z, (2 - 3j) * z) == pytest.approx(0.0, abs=1e-15)
    assert fs_distance(z, w) == pytest.approx(fs_distance(w, z), abs=1e-14)
    assert 0 <= fs_distance(z, w) <= np.pi / 2 + 1e-15
