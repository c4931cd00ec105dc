import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bcmortar.bc import (BCConstructionError, bc_space, build_bc, eval_bc_form, extder_defect,
                         interpolation_defect, support_sets, write_coefficients)
from bcmortar.mesh import build_dual, refine_barycentric, refine_uniform
from conftest import grid, random_delaunay


@pytest.fixture(scope="module")
def basis():
    return build_bc(refine_barycentric(grid(3, "nw")))


def test_shapes(basis):
    m, fine = basis.primal, basis.refined
    assert basis.R0.shape == (m.n_facets, fine.n_nodes)
    assert basis.R1.shape == (m.n_edges, fine.n_edges)
    assert basis.R2.shape == (m.n_nodes, fine.n_facets)


def test_2forms_integrate_to_one(basis):
    # each refined Whitney 2-form has unit flux, so row sums are the dual-cell integrals
    np.testing.assert_allclose(np.asarray(basis.R2.sum(axis=1)).ravel(), 1.0, rtol=1e-15)


def test_2form_weights_equal(basis):
    for v in range(basis.primal.n_nodes):
        row = basis.R2[v].data
        np.testing.assert_allclose(row, 1.0 / len(row))


def test_coefficient_lattice(basis):
    # 1-form coefficients are multiples of 1/12 and 0-form ones are in {1/6, 1/2, 1}
    r1 = basis.R1.data
    np.testing.assert_allclose(r1 * 12, np.round(r1 * 12), atol=1e-12)
    assert np.abs(r1).max() <= 1 + 1e-12
    r0 = basis.R0.data[np.abs(basis.R0.data) > 1e-14]
    assert set(np.round(r0 * 6).astype(int).tolist()) <= {1, 3, 6}


def test_0form_column_sums(basis):
    fine = basis.refined
    colsum = np.asarray(basis.R0.sum(axis=0)).ravel()
    on_boundary = fine.boundary_nodes
    np.testing.assert_allclose(colsum[~on_boundary], 1.0, atol=1e-14)
    np.testing.assert_allclose(colsum[on_boundary], 0.0, atol=1e-14)


def test_interpolation_and_extder(basis):
    assert interpolation_defect(basis) <= 1e-12
    assert extder_defect(basis) <= 1e-12
    assert max(basis.residuals.values()) <= 1e-12


def test_supports_are_dual_neighbourhoods(basis):
    sup = support_sets(basis.dual)
    ref = basis.refinement
    for v in range(basis.primal.n_nodes):
        assert set(ref.facet_vertex[sup[2][v]].tolist()) == {v}
    for e in range(basis.primal.n_edges):
        nodes = set(ref.facet_vertex[sup[1][e]].tolist())
        assert nodes == set(basis.primal.edges[e].tolist())
    # nonzeros never leave the supports
    fine = basis.refined
    for e in range(basis.primal.n_edges):
        cols = basis.R1[e].indices
        allowed = set(fine.facet_edges[sup[1][e]].ravel().tolist())
        assert set(cols.tolist()) <= allowed


def test_mutation_is_detected(basis):
    R1 = basis.R1.copy()
    R1.data[5] += 1e-6
    assert extder_defect(basis, R1=R1) > 1e-8
    R0 = basis.R0.copy()
    R0.data[0] -= 1e-6
    assert extder_defect(basis, R0=R0) > 1e-8


def test_closed_variant_needs_closed_surface():
    with pytest.raises((ValueError, BCConstructionError)):
        build_bc(refine_barycentric(grid(2)), variant="closed")
    with pytest.raises(ValueError):
        build_bc(refine_barycentric(grid(2)), variant="nope")


def test_bc_space_cache_keeps_identity():
    m = grid(2)
    assert bc_space(m) is bc_space(m)


def test_eval_bc_form_matches_coefficients(basis):
    fine = basis.refined
    t = int(basis.supports[2][4][0])
    p = fine.node_coords[fine.facets[t]].mean(axis=0)
    expected = basis.R2[4, t] / fine.areas[t]
    assert eval_bc_form(basis, 2, 4, t, p) == pytest.approx(expected)
    outside = int(np.setdiff1d(np.arange(fine.n_facets), basis.supports[2][4])[0])
    assert eval_bc_form(basis, 2, 4, outside, fine.node_coords[fine.facets[outside]].mean(0)) == 0.0


def test_write_coefficients(tmp_path, basis):
    p = tmp_path / "r.txt"
    write_coefficients(basis, p)
    lines = p.read_text().splitlines()
    assert len(lines) == basis.R0.nnz + basis.R1.nnz + basis.R2.nnz
    q, v, w, val = lines[-1].split()
    assert q == "2"


def test_metric_free_under_shear():
    m = grid(2)
    sheared = type(m)(m.node_coords @ np.array([[2.0, 0.3], [0.1, 0.7]]).T, m.edges, m.facets,
                      m.facet_edges, m.facet_signs)
    a, b = build_bc(refine_barycentric(m)), build_bc(refine_barycentric(sheared))
    for q in range(3):
        assert (a.R(q) != b.R(q)).nnz == 0


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=8, max_value=120), st.integers(min_value=0, max_value=99_999))
def test_identities_on_random_meshes(n, seed):
    basis = build_bc(refine_barycentric(random_delaunay(n, seed)))
    assert interpolation_defect(basis) <= 1e-12
    assert extder_defect(basis) <= 1e-12
    colsum = np.asarray(basis.R0.sum(axis=0)).ravel()
    assert np.all(colsum >= -1e-14) and np.all(colsum <= 1 + 1e-14)


def test_refined_mesh_basis():
    basis = build_bc(refine_barycentric(refine_uniform(grid(3, "nw"))))
    assert interpolation_defect(basis) <= 1e-12
    assert extder_defect(basis) <= 1e-12


def test_dual_supplied_explicitly():
    ref = refine_barycentric(grid(2))
    dual = build_dual(ref)
    assert build_bc(ref, dual=dual).dual is dual
