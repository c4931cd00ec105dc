import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bcmortar.forms import barycentric_coords
from bcmortar.mesh import build_complex, refine_barycentric, refine_uniform
from bcmortar.overlay import (OverlayError, clip_segment, clip_segments, integrate_polynomial,
                              intersect_meshes, locate_point, locate_points, write_overlay)
from conftest import grid, random_delaunay


def _inside(mesh, facets, points, tol=1e-9):
    return (barycentric_coords(mesh, facets, points) >= -tol).all(axis=1)


@pytest.mark.parametrize("method", ["front", "batch"])
def test_overlay_of_test_pair(method):
    a, b = grid(2), grid(3, "nw")
    ov = intersect_meshes(a, b, method=method)
    assert ov.total_area == pytest.approx(1.0, abs=1e-12)
    assert (ov.areas > 0).all()
    cen = ov.cells.mean(axis=1)
    assert _inside(a, ov.parent_a, cen).all()
    assert _inside(b, ov.parent_b, cen).all()
    # every parent facet is tiled completely
    np.testing.assert_allclose(np.bincount(ov.parent_a, ov.areas, a.n_facets), a.areas, rtol=1e-12)
    np.testing.assert_allclose(np.bincount(ov.parent_b, ov.areas, b.n_facets), b.areas, rtol=1e-12)


def test_overlay_with_itself_is_the_mesh():
    m = random_delaunay(40, 5)
    ov = intersect_meshes(m, m)
    assert len(ov) == m.n_facets
    np.testing.assert_array_equal(np.sort(ov.parent_a), np.arange(m.n_facets))
    np.testing.assert_array_equal(ov.parent_a, ov.parent_b)


def test_nested_overlay():
    coarse = grid(3, "nw")
    fine = refine_barycentric(coarse).refined
    ov = intersect_meshes(fine, coarse)
    assert len(ov) == fine.n_facets


def test_swap_symmetry():
    a, b = random_delaunay(30, 1), random_delaunay(50, 2)
    ab, ba = intersect_meshes(a, b), intersect_meshes(b, a)
    assert len(ab) == len(ba)
    key = lambda ov: sorted(zip(ov.parent_a.tolist(), ov.parent_b.tolist(), np.round(ov.areas, 14)))
    pairs_ab = {}
    for pa, pb, ar in zip(ab.parent_a, ab.parent_b, ab.areas):
        pairs_ab[(pa, pb)] = pairs_ab.get((pa, pb), 0) + ar
    pairs_ba = {}
    for pb, pa, ar in zip(ba.parent_a, ba.parent_b, ba.areas):
        pairs_ba[(pa, pb)] = pairs_ba.get((pa, pb), 0) + ar
    assert pairs_ab.keys() == pairs_ba.keys()
    for k in pairs_ab:
        assert pairs_ab[k] == pytest.approx(pairs_ba[k], rel=1e-10)
    sw = ab.swapped()
    np.testing.assert_array_equal(sw.parent_a, ab.parent_b)


def test_domain_mismatch_raises():
    a = grid(2)
    half = build_complex([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)])
    with pytest.raises(OverlayError):
        intersect_meshes(a, half)
    far = build_complex([(5, 5), (6, 5), (5, 6)], [(0, 1, 2)])
    with pytest.raises(OverlayError):
        intersect_meshes(far, half, method="batch")


def test_unknown_method():
    with pytest.raises(ValueError):
        intersect_meshes(grid(2), grid(2), method="magic")


def test_polynomial_integration_across_meshes():
    a, b = refine_uniform(grid(2)), random_delaunay(70, 9)
    ov = intersect_meshes(a, b)
    f = lambda x, y: 1 + x * y - 3 * y**2 + x**2
    exact = 1 + 0.25 - 1 + 1 / 3
    assert integrate_polynomial(ov, f) == pytest.approx(exact, rel=1e-13)


def test_locate_points():
    m = grid(3, "nw")
    pts = np.random.default_rng(0).uniform(0, 1, (200, 2))
    fac, bary = locate_points(m, pts)
    assert _inside(m, fac, pts).all()
    np.testing.assert_allclose(bary.sum(axis=1), 1.0)
    f, lam = locate_point(m, (1.0, 1.0))  # a corner vertex
    assert lam.max() == pytest.approx(1.0)
    with pytest.raises(OverlayError):
        locate_points(m, [(1.5, 0.5)])


def test_clip_segment_partitions_the_segment():
    m = grid(3, "nw")
    parts = clip_segment(m, (0.05, 0.1), (0.95, 0.8))
    length = sum(np.linalg.norm(q1 - q0) for _, q0, q1 in parts)
    assert length == pytest.approx(np.hypot(0.9, 0.7), rel=1e-14)
    for (f, q0, q1), nxt in zip(parts, parts[1:]):
        np.testing.assert_allclose(q1, nxt[1])
    for f, q0, q1 in parts:
        assert _inside(m, [f], [(q0 + q1) / 2]).all()


def test_clip_segment_along_mesh_edges():
    m = grid(3, "nw")
    seg, fac, t0, t1 = clip_segments(m, [(0, 1 / 3)], [(1, 1 / 3)])
    np.testing.assert_allclose(t0, [0, 1 / 3, 2 / 3], atol=1e-14)
    np.testing.assert_allclose(t1, [1 / 3, 2 / 3, 1], atol=1e-14)


def test_clip_segment_leaving_the_mesh():
    with pytest.raises(OverlayError):
        clip_segments(grid(2), [(0.5, 0.5)], [(1.5, 0.5)])


def test_write_overlay(tmp_path):
    ov = intersect_meshes(grid(2), grid(3, "nw"))
    write_overlay(ov, tmp_path / "ov.txt")
    lines = (tmp_path / "ov.txt").read_text().splitlines()
    assert len(lines) == len(ov)
    assert len(lines[0].split()) == 8


@settings(max_examples=12, deadline=None)
@given(st.integers(10, 90), st.integers(10, 90), st.integers(0, 10_000))
def test_random_pairs_conserve_area(n1, n2, seed):
    a, b = random_delaunay(n1, seed), random_delaunay(n2, seed + 1)
    ov = intersect_meshes(a, b)
    assert ov.total_area == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(np.bincount(ov.parent_a, ov.areas, a.n_facets), a.areas,
                               rtol=1e-9, atol=1e-14)
