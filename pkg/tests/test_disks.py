import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zollfrei.disks import (QGrid, SolverConfig, build_family, closed_form_error, disjointness,
                            doubling_difference, family_quadric_check, flat_anchor,
                            flat_frame_display, flat_partial_indices, maslov_index,
                            quadric_intersections, solve_disk, winding_number)
from zollfrei.embedding import TotallyRealEmbedding, quadric_value, random_embedding
from zollfrei.errors import HoleError
from zollfrei.manifold import Point4

seeds = st.integers(0, 2 ** 31 - 1)


def _ab(rng, r=0.4):
    a, b = (r * (rng.uniform(-1, 1) + 1j * rng.uniform(-1, 1)) for _ in range(2))
    return a, b


def fit_affine_data(w):
    """Least-squares ``(a, b)`` with ``w2 = a + conj(a) w1``, ``w3 = b + conj(b) w1`` on boundary samples."""
    M = np.column_stack([1 + w[:, 0], 1j * (1 - w[:, 0])])
    M = np.concatenate([M.real, M.imag])
    out = []
    for k in (1, 2):
        rhs = np.concatenate([w[:, k].real, w[:, k].imag])
        re, im = np.linalg.lstsq(M, rhs, rcond=None)[0]
        out.append(re + 1j * im)
    return out


# -- flat model ----------------------------------------------------------------------


@settings(max_examples=8)
@given(seeds)
def test_flat_disks_match_closed_form(seed):
    a, b = _ab(np.random.default_rng(seed))
    q, _ = flat_anchor(a, b)
    sol = solve_disk(None, q, cfg=SolverConfig(modes=32))
    assert closed_form_error(sol, a, b) < 1e-8


def test_flat_disk_at_origin():
    q, zeta = flat_anchor(0j, 0j)
    assert zeta == 0
    sol = solve_disk(None, q, cfg=SolverConfig(modes=32))
    z = 0.7 * np.exp(2j * np.pi * np.arange(16) / 16)
    w = sol.chart(z)
    np.testing.assert_allclose(w[:, 1:], 0, atol=1e-12)
    np.testing.assert_allclose(np.abs(w[:, 0]), 0.7, atol=1e-12)
    assert closed_form_error(sol, 0j, 0j) < 1e-12


def test_closed_form_error_detects_wrong_data():
    q, _ = flat_anchor(0.1 + 0.1j, -0.2j)
    sol = solve_disk(None, q, cfg=SolverConfig(modes=16))
    assert closed_form_error(sol, 0.1 + 0.1j, -0.2j) < 1e-10
    assert closed_form_error(sol, 0.2 + 0.1j, -0.2j) > 1e-2


# -- perturbed model ----------------------------------------------------------------------


def test_perturbed_warm_start_converges_fast():
    rng = np.random.default_rng(1)
    P = random_embedding(rng, norm=0.05)
    for _ in range(3):
        a, b = _ab(rng)
        q, _ = flat_anchor(a, b)
        flat = solve_disk(None, q, cfg=SolverConfig(modes=32))
        sol = solve_disk(P, q, seed=flat, cfg=SolverConfig(modes=32))
        assert sol.iterations <= 8
        assert sol.residual < 1e-9


def test_doubling_change_small():
    P = random_embedding(np.random.default_rng(2), norm=0.05)
    q, _ = flat_anchor(0.2 - 0.1j, 0.05j)
    diff, s1, s2 = doubling_difference(P, q, SolverConfig(modes=32))
    assert diff < 1e-8


def test_spectral_decay():
    P = random_embedding(np.random.default_rng(3), norm=0.05)
    sol = solve_disk(P, flat_anchor(0.1j, 0.1)[0], cfg=SolverConfig(modes=24))
    C, rho = sol.spectral_decay()
    assert 0 < rho < 0.5


# -- Maslov index and partial indices -------------------------------------------------------


def test_maslov_flat():
    sol = solve_disk(None, flat_anchor(0.3, -0.1j)[0], cfg=SolverConfig(modes=16))
    assert maslov_index(sol) == 4


@settings(max_examples=5)
@given(seeds)
def test_maslov_perturbed(seed):
    rng = np.random.default_rng(seed)
    P = random_embedding(rng, norm=0.05)
    sol = solve_disk(P, flat_anchor(*_ab(rng))[0], cfg=SolverConfig(modes=16))
    assert maslov_index(sol, P) == 4


def test_partial_indices_display():
    sol = solve_disk(None, flat_anchor(0j, 0j)[0], cfg=SolverConfig(modes=16))
    idx, defect = flat_partial_indices(sol)
    assert idx == (2, 1, 1)
    assert defect < 1e-10
    D = flat_frame_display(np.exp(1j * np.linspace(0.1, 6, 5)))
    assert D.shape == (5, 3, 3)
    assert sum(idx) == maslov_index(sol)


def test_winding_number():
    th = 2 * np.pi * np.arange(64) / 64
    assert winding_number(np.exp(3j * th)) == 3
    assert winding_number(np.exp(-1j * th)) == -1


# -- families -------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def flat_family():
    return build_family(None, QGrid(4, 4), SolverConfig(modes=12))


@pytest.fixture(scope="module")
def perturbed_family():
    P = random_embedding(np.random.default_rng(4), norm=0.05)
    return build_family(P, QGrid(4, 4), SolverConfig(modes=12))


def test_flat_family_closed_forms(flat_family):
    """Every disk is a closed-form disk in the affine chart of its standard frame.

    The flat family is invariant under SO(4), and some disks pass through the
    line at infinity of the original chart, so each is checked in its own frame.
    """
    assert not flat_family.failures
    flat_family.require_complete()
    z = np.exp(2j * np.pi * np.arange(128) / 128)
    worst = 0.0
    for sol in flat_family.disks.values():
        w = sol.chart_standard(z)
        a, b = fit_affine_data(w)
        assert winding_number(w[:, 0]) == 1
        err = np.max(np.abs([np.abs(w[:, 0]) - 1, w[:, 1] - a - np.conj(a) * w[:, 0],
                             w[:, 2] - b - np.conj(b) * w[:, 0]]))
        worst = max(worst, err)
    assert worst < 1e-8


def test_family_meets_quadric_once(perturbed_family):
    assert not perturbed_family.failures
    for n, val in family_quadric_check(perturbed_family).values():
        assert n == 1 and val < 1e-10


def test_quadric_count_single_disk():
    sol = solve_disk(None, flat_anchor(0.1, 0.2j)[0], cfg=SolverConfig(modes=12))
    assert quadric_intersections(sol) == 1
    assert abs(quadric_value(sol.fourier[0])) < 1e-12


def test_family_disjoint(perturbed_family):
    d, pair = disjointness(perturbed_family, rng=np.random.default_rng(5), n_pairs=40)
    assert d > 1e-4


def test_hole_error_names_cell(flat_family):
    disks = dict(flat_family.disks)
    cell = sorted(disks)[7]
    del disks[cell]
    fam = type(flat_family)(flat_family.embedding, flat_family.grid, disks,
                            flat_family.continuation_order, {cell: "forced"}, flat_family.cfg)
    with pytest.raises(HoleError, match=str(cell).replace("(", r"\(").replace(")", r"\)")):
        fam.require_complete()


def test_family_persistence(tmp_path, perturbed_family):
    perturbed_family.save(tmp_path / "fam")
    loaded = type(perturbed_family).load(tmp_path / "fam")
    c = sorted(perturbed_family.disks)[3]
    th = np.linspace(0, 6, 9)
    np.testing.assert_allclose(loaded.disks[c].boundary(th), perturbed_family.disks[c].boundary(th),
                               atol=1e-14)
    assert isinstance(loaded.embedding, TotallyRealEmbedding)


def test_grid_minimum_resolution():
    with pytest.raises(ValueError):
        QGrid(3, 8)


def test_anchor_is_on_quadric():
    q, zeta = flat_anchor(0.3 - 0.2j, 0.1 + 0.1j)
    assert isinstance(q, Point4) and abs(zeta) < 1
