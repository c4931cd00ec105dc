import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bcmortar.mesh import (MeshError, build_complex, build_dual, read_mesh, refine_barycentric,
                           refine_uniform, write_mesh)
from conftest import grid, random_delaunay


def test_single_triangle_counts():
    m = build_complex([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)])
    assert (m.n_nodes, m.n_edges, m.n_facets) == (3, 3, 1)
    assert m.euler_characteristic() == 1
    assert m.area == pytest.approx(0.5)
    assert m.boundary_edges.all()


def test_cw_facet_is_reoriented():
    m = build_complex([(0, 0), (1, 0), (0, 1)], [(0, 2, 1)])
    assert m.areas[0] > 0


def test_two_triangle_square():
    m = build_complex([(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1, 2), (0, 2, 3)])
    assert m.n_edges == 5
    assert m.boundary_edges.sum() == 4
    assert m.boundary_nodes.sum() == 4


def test_edges_sorted_and_incidence_signs():
    m = grid(3, "nw")
    assert (m.edges[:, 0] < m.edges[:, 1]).all()
    D0 = m.D0.toarray()
    assert D0.shape == (m.n_nodes, m.n_edges)
    for e, (a, b) in enumerate(m.edges):
        assert D0[a, e] == -1 and D0[b, e] == 1


def test_complex_property_on_grids():
    for mesh in (grid(2), grid(3, "nw"), refine_uniform(grid(2))):
        assert abs(mesh.D0 @ mesh.D1).max() == 0


def test_d1_sign_is_ccw_traversal():
    m = grid(2)
    x = m.node_coords
    D1 = m.D1.toarray()
    for f, tri in enumerate(m.facets):
        c = x[tri].mean(axis=0)
        for e in np.flatnonzero(D1[:, f]):
            a, b = x[m.edges[e]]
            u, v = b - a, c - a
            turn = u[0] * v[1] - u[1] * v[0]
            assert np.sign(turn) == D1[e, f]


@pytest.mark.parametrize("bad, exc", [
    ([(0, 1, 7)], MeshError),
    ([(0, 1, 1)], MeshError),
    ([(0, 1, 2), (0, 1, 2)], MeshError),
])
def test_build_complex_rejects(bad, exc):
    with pytest.raises(exc):
        build_complex([(0, 0), (1, 0), (0, 1), (1, 1)], bad)


def test_degenerate_facet_rejected():
    with pytest.raises(MeshError):
        build_complex([(0, 0), (1, 0), (2, 0)], [(0, 1, 2)])


def test_nonmanifold_edge_rejected():
    pts = [(0, 0), (1, 0), (0.5, 1), (0.5, -1), (0.5, 2)]
    with pytest.raises(MeshError):
        build_complex(pts, [(0, 1, 2), (1, 0, 3), (0, 1, 4)])


def test_uniform_refinement_counts_and_area():
    m = grid(3, "nw")
    r = refine_uniform(m)
    assert r.n_facets == 4 * m.n_facets
    assert r.n_nodes == m.n_nodes + m.n_edges
    assert r.area == pytest.approx(1.0, abs=1e-14)
    assert r.max_edge_length == pytest.approx(m.max_edge_length / 2)


def test_barycentric_refinement_structure():
    m = grid(2)
    ref = refine_barycentric(m)
    fine = ref.refined
    assert fine.n_facets == 6 * m.n_facets
    assert fine.n_nodes == m.n_nodes + m.n_edges + m.n_facets
    np.testing.assert_allclose(np.bincount(ref.facet_parent, weights=fine.areas), m.areas, rtol=1e-14)
    # each refined facet touches its primal vertex and the midpoint of its primal edge
    for t in range(fine.n_facets):
        nodes = set(fine.facets[t].tolist())
        assert ref.facet_vertex[t] in nodes
        assert ref.midpoint_node(ref.facet_edge[t]) in nodes
        assert ref.barycenter_node(ref.facet_parent[t]) in nodes


def test_dual_chains_interior_and_boundary():
    m = grid(2)
    dual = build_dual(refine_barycentric(m))
    nv1 = dual.n_v(1)
    assert set(nv1[m.boundary_edges].tolist()) == {1}
    assert set(nv1[~m.boundary_edges].tolist()) == {2}
    # dual 2-cells: one refined facet per (vertex, incident facet) side
    deg = np.bincount(m.facets.ravel(), minlength=m.n_nodes)
    np.testing.assert_array_equal(dual.n_v(2), 2 * deg)
    np.testing.assert_array_equal(dual.n_v(0), np.ones(m.n_facets))
    assert dual.star(1, 3) == (1, 3)


def test_dual_chain_boundaries_match_primal_incidence():
    # boundary of dual 2-cell of an interior node is the sum of its dual edges
    m = refine_uniform(grid(2))
    ref = refine_barycentric(m)
    dual = build_dual(ref)
    fine = ref.refined
    interior = np.flatnonzero(~m.boundary_nodes)
    bd2 = (dual.C2 @ fine.D1.T).toarray()
    expected = (m.D0 @ dual.C1).toarray()
    np.testing.assert_array_equal(bd2[interior], expected[interior])


def test_mesh_roundtrip(tmp_path):
    m = random_delaunay(30, 3)
    p = tmp_path / "m.mesh"
    write_mesh(m, p)
    back = read_mesh(p)
    np.testing.assert_array_equal(back.node_coords, m.node_coords)
    np.testing.assert_array_equal(back.facets, m.facets)
    np.testing.assert_array_equal(back.edges, m.edges)


def test_read_mesh_edge_count_mismatch(tmp_path):
    p = tmp_path / "bad.mesh"
    p.write_text("3 5 1\n0 0\n1 0\n0 1\n0 1 2\n")
    with pytest.raises(MeshError):
        read_mesh(p)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=5, max_value=80), st.integers(min_value=0, max_value=10_000))
def test_random_meshes_form_a_complex(n, seed):
    m = random_delaunay(n, seed)
    assert abs(m.D0 @ m.D1).max() == 0
    assert m.euler_characteristic() == 1
    assert m.area == pytest.approx(1.0, abs=1e-12)
    assert (m.areas > 0).all()
    fine = refine_barycentric(m).refined
    assert abs(fine.D0 @ fine.D1).max() == 0
    assert fine.euler_characteristic() == 1
