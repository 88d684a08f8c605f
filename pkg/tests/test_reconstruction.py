import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as o
from zollfrei.disks import QGrid, SolverConfig, build_family, flat_anchor, solve_disk
from zollfrei.embedding import plane_form, random_embedding, sample_sphere3
from zollfrei.errors import DegeneracyError, ResolutionError
from zollfrei.manifold import Point4, chart_basis, random_point, selfdual_residual
from zollfrei.reconstruction import (Reconstruction, beta_plane_at, beta_surface_from_point,
                                     fit_at, fit_conformal_metric, flat_beta_plane, gauge_fixed,
                                     plucker_fit, principal_angle, reconstruct_metric_field,
                                     roundtrip_certify, surface_pair_intersections)

seeds = st.integers(0, 2 ** 31 - 1)
G0 = np.diag([1.0, 1, -1, -1])


def _ab(rng, r=0.3):
    return tuple(r * complex(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(2))


# -- beta-planes ------------------------------------------------------------------------


@settings(max_examples=6)
@given(seeds)
def test_flat_beta_planes_match_closed_form(seed):
    rng = np.random.default_rng(seed)
    a, b = _ab(rng)
    q, _ = flat_anchor(a, b)
    sol = solve_disk(None, q, cfg=SolverConfig(modes=32))
    for th in rng.uniform(0, 2 * np.pi, 3):
        y = sol.boundary(th)[0]
        ref = o.flat_beta_plane_oracle(a, b, y)
        assert principal_angle(beta_plane_at(sol, th).ambient, ref) < 1e-6
        assert principal_angle(flat_beta_plane(q, y)[0], ref) < 1e-6


def test_flat_beta_plane_well_conditioned():
    sol = solve_disk(None, flat_anchor(0.1, -0.2j)[0], cfg=SolverConfig(modes=16))
    s = beta_plane_at(sol, 1.3).singular_values
    np.testing.assert_allclose(s, [2 ** -0.5, 2 ** -0.5], atol=1e-8)


# -- null-cone fits -----------------------------------------------------------------------


def test_flat_fit_is_g0():
    sol = solve_disk(None, flat_anchor(0.2 - 0.1j, 0.15j)[0], cfg=SolverConfig(modes=32))
    f, planes = fit_at(sol)
    assert f.signature == (2, 2)
    assert np.max(np.abs(gauge_fixed(f.Gq) - G0)) < 1e-5
    assert f.annihilation < 1e-10


def test_single_plane_fit_rejected():
    sol = solve_disk(None, flat_anchor(0.1j, 0.1)[0], cfg=SolverConfig(modes=16))
    _, planes = fit_at(sol)
    with pytest.raises(DegeneracyError):
        fit_conformal_metric(planes[:1])
    with pytest.raises(DegeneracyError):
        fit_conformal_metric([planes[0]] * 4)


@settings(max_examples=4)
@given(seeds)
def test_perturbed_fit_signature_and_gap(seed):
    rng = np.random.default_rng(seed)
    P = random_embedding(rng, norm=0.05)
    sol = solve_disk(P, flat_anchor(*_ab(rng))[0], cfg=SolverConfig(modes=16))
    f, _ = fit_at(sol)
    assert f.signature == (2, 2)
    assert f.gap > 1e3


def test_plucker_route_agrees_with_null_cone_route():
    rng = np.random.default_rng(3)
    P = random_embedding(rng, norm=0.05)
    sol = solve_disk(P, flat_anchor(*_ab(rng))[0], cfg=SolverConfig(modes=16))
    f, planes = fit_at(sol)
    Gp, gap = plucker_fit(planes)
    assert gap > 1e3
    assert np.max(np.abs(gauge_fixed(Gp) - gauge_fixed(f.Gq))) < 1e-8


# -- interpolated metric ----------------------------------------------------------------------


@pytest.fixture(scope="module")
def flat_reconstruction():
    fam = build_family(None, QGrid(5, 5), SolverConfig(modes=12))
    return reconstruct_metric_field(fam, L=2)


def test_flat_reconstruction_off_grid(flat_reconstruction):
    rec = flat_reconstruction
    assert rec.fit_error < 1e-8
    for p in random_point(np.random.default_rng(0), 10):
        T = chart_basis(p)
        G = T.T @ rec.metric.tensor(p.x, p.y) @ T
        assert np.max(np.abs(G - G0)) < 1e-4


def test_flat_reconstruction_selfdual(flat_reconstruction):
    pts = random_point(np.random.default_rng(1), 3)
    assert selfdual_residual(flat_reconstruction.metric, pts) < 1e-4


def test_under_resolved_grid_rejected(flat_reconstruction):
    fam = build_family(None, QGrid(4, 4), SolverConfig(modes=8))
    with pytest.raises(ResolutionError):
        reconstruct_metric_field(fam, L=2)


def test_metric_grid_json_roundtrip(tmp_path, flat_reconstruction):
    rec = flat_reconstruction
    rec.save(tmp_path / "g.json")
    back = Reconstruction.load(tmp_path / "g.json")
    for p in random_point(np.random.default_rng(2), 4):
        np.testing.assert_array_equal(back.metric.tensor(p.x, p.y), rec.metric.tensor(p.x, p.y))
    assert back.L == rec.L and back.grid.shape == rec.grid.shape


# -- beta-surfaces S_y ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def flat_surfaces():
    y1, y2 = sample_sphere3(2, np.random.default_rng(3))
    return beta_surface_from_point(None, y1, n=42), beta_surface_from_point(None, y2, n=42)


def test_flat_surface_contains_y(flat_surfaces):
    for S in flat_surfaces:
        worst = 0.0
        for q in S.points:
            W = plane_form(Point4.from_array(q))
            worst = max(worst, np.linalg.norm(-W @ W @ S.y - S.y))
        assert worst < 1e-6


def test_flat_surface_is_sphere(flat_surfaces):
    for S in flat_surfaces:
        assert S.euler_characteristic() == 2
        assert S.is_closed_surface()


def test_flat_surfaces_meet_twice(flat_surfaces):
    S1, S2 = flat_surfaces
    assert len(surface_pair_intersections(S1, S2, None)) == 2


def test_perturbed_surfaces_meet_twice():
    P = random_embedding(np.random.default_rng(5), norm=0.05)
    y1, y2 = sample_sphere3(2, np.random.default_rng(3))
    S1 = beta_surface_from_point(P, y1, n=42)
    S2 = beta_surface_from_point(P, y2, n=42)
    assert S1.euler_characteristic() == 2
    assert len(surface_pair_intersections(S1, S2, P)) == 2


# -- round trip ---------------------------------------------------------------------------------


def test_roundtrip_rejects_large_deformation():
    rep = roundtrip_certify(random_embedding(np.random.default_rng(1), norm=5.0))
    assert rep["stage"] == "solver" and not rep["passed"]
    assert "SolverError" in rep["error"]
