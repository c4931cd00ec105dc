"""Oriented triangulated surfaces, refinements and the barycentric dual.

Conventions used throughout the package:

* edges are stored with sorted endpoints ``(a, b)``, ``a < b``, oriented a -> b;
* facets are stored counterclockwise;
* ``D0[n, e]`` is +1 if node ``n`` is the head of edge ``e``, -1 if it is the tail;
* ``D1[e, f]`` is +1 if edge ``e`` runs counterclockwise around facet ``f``.

With these conventions the coefficient vector of ``d w`` is ``D.T @ w``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

__all__ = [
    "MeshError",
    "SurfaceMesh",
    "BarycentricRefinement",
    "DualMesh",
    "build_complex",
    "refine_uniform",
    "refine_barycentric",
    "build_dual",
    "read_mesh",
    "write_mesh",
]


class MeshError(ValueError):
    """Raised for invalid triangulations."""


def _signed_areas(coords, tris):
    p0, p1, p2 = coords[tris[:, 0]], coords[tris[:, 1]], coords[tris[:, 2]]
    return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class SurfaceMesh:
    """Oriented 2-D simplicial complex embedded in the plane.

    Instances are immutable; use :func:`build_complex` to construct one.
    """

    def __init__(self, node_coords, edges, facets, facet_edges, facet_signs):
        self.node_coords = _frozen(np.asarray(node_coords, dtype=float))
        self.edges = _frozen(edges)
        self.facets = _frozen(facets)
        # local edge k of a facet is the side opposite local vertex k
        self.facet_edges = _frozen(facet_edges)
        self.facet_signs = _frozen(facet_signs)

        n_nodes, n_edges, n_facets = len(self.node_coords), len(edges), len(facets)
        ecols = np.repeat(np.arange(n_edges), 2)
        self.D0 = sp.csr_matrix(
            (np.tile([-1, 1], n_edges), (edges.ravel(), ecols)),
            shape=(n_nodes, n_edges), dtype=np.int64)
        self.D1 = sp.csr_matrix(
            (facet_signs.ravel(), (facet_edges.ravel(), np.repeat(np.arange(n_facets), 3))),
            shape=(n_edges, n_facets), dtype=np.int64)

        edge_facets = np.full((n_edges, 2), -1, dtype=np.int64)
        fe, fs = facet_edges.ravel(), facet_signs.ravel()
        fid = np.repeat(np.arange(n_facets), 3)
        edge_facets[fe[fs > 0], 0] = fid[fs > 0]
        edge_facets[fe[fs < 0], 1] = fid[fs < 0]
        self.edge_facets = _frozen(edge_facets)  # (left, right)

        bedge = (edge_facets < 0).any(axis=1)
        bnode = np.zeros(n_nodes, dtype=bool)
        bnode[edges[bedge].ravel()] = True
        self.boundary_edges = _frozen(bedge)
        self.boundary_nodes = _frozen(bnode)
        self.boundary_facets = _frozen(bedge[facet_edges].any(axis=1))

    @property
    def n_nodes(self):
        return len(self.node_coords)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_facets(self):
        return len(self.facets)

    def n_cells(self, r):
        return (self.n_nodes, self.n_edges, self.n_facets)[r]

    def incidence(self, r):
        return (self.D0, self.D1)[r]

    @cached_property
    def areas(self):
        return _frozen(_signed_areas(self.node_coords, self.facets))

    @cached_property
    def edge_lengths(self):
        d = self.node_coords[self.edges[:, 1]] - self.node_coords[self.edges[:, 0]]
        return _frozen(np.hypot(d[:, 0], d[:, 1]))

    @cached_property
    def facet_neighbors(self):
        """Facet across local edge k, or -1 on the boundary."""
        ef = self.edge_facets[self.facet_edges]  # (F, 3, 2)
        own = np.arange(self.n_facets)[:, None]
        other = np.where(ef[:, :, 0] == own, ef[:, :, 1], ef[:, :, 0])
        return _frozen(other)

    @cached_property
    def barycentric_gradients(self):
        """Gradients of the three barycentric functions per facet, shape (F, 3, 2)."""
        p = self.node_coords[self.facets]
        grads = np.empty((self.n_facets, 3, 2))
        for k in range(3):
            a, b = p[:, (k + 1) % 3], p[:, (k + 2) % 3]
            # rotate the opposite side by +90 degrees
            grads[:, k, 0] = -(b[:, 1] - a[:, 1])
            grads[:, k, 1] = b[:, 0] - a[:, 0]
        grads /= (2.0 * self.areas)[:, None, None]
        return _frozen(grads)

    @property
    def area(self):
        return float(self.areas.sum())

    @property
    def max_edge_length(self):
        return float(self.edge_lengths.max())

    def euler_characteristic(self):
        return self.n_nodes - self.n_edges + self.n_facets

    def __repr__(self):
        return f"SurfaceMesh(N={self.n_nodes}, E={self.n_edges}, F={self.n_facets})"


def build_complex(node_coords, facets):
    """Build a :class:`SurfaceMesh` from coordinates and node triples.

    Facets given clockwise are reordered counterclockwise. Non-manifold
    edges, duplicate facets, degenerate triangles and inconsistent facet
    orientations raise :class:`MeshError`.
    """
    coords = np.asarray(node_coords, dtype=float)
    tris = np.array(facets, dtype=np.int64).reshape(-1, 3)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise MeshError("node coordinates must have shape (N, 2)")
    if len(tris) == 0:
        raise MeshError("mesh has no facets")
    if tris.min() < 0 or tris.max() >= len(coords):
        bad = int(np.flatnonzero((tris < 0).any(1) | (tris >= len(coords)).any(1))[0])
        raise MeshError(f"facet {bad} references a node index out of range")
    repeated = (tris[:, 0] == tris[:, 1]) | (tris[:, 1] == tris[:, 2]) | (tris[:, 0] == tris[:, 2])
    if repeated.any():
        raise MeshError(f"facet {int(np.flatnonzero(repeated)[0])} repeats a node")

    areas = _signed_areas(coords, tris)
    scale = np.ptp(coords, axis=0).max() if len(coords) > 1 else 1.0
    degenerate = np.abs(areas) <= 1e-14 * scale**2
    if degenerate.any():
        raise MeshError(f"facet {int(np.flatnonzero(degenerate)[0])} is degenerate (zero area)")
    cw = areas < 0
    tris[cw] = tris[cw][:, [0, 2, 1]]

    key = np.sort(tris, axis=1)
    _, first, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    if (counts > 1).any():
        dup = int(first[np.flatnonzero(counts > 1)[0]])
        raise MeshError(f"facet {dup} is duplicated")

    # side k is opposite vertex k, traversed counterclockwise
    heads = tris[:, [1, 2, 0]].ravel()
    tails = tris[:, [2, 0, 1]].ravel()
    sides = np.stack([np.minimum(heads, tails), np.maximum(heads, tails)], axis=1)
    edges, inverse, counts = np.unique(sides, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if (counts > 2).any():
        e = int(np.flatnonzero(counts > 2)[0])
        raise MeshError(f"edge {tuple(int(v) for v in edges[e])} is shared by more than two facets")
    signs = np.where(heads < tails, 1, -1).astype(np.int64)
    net = np.bincount(inverse, weights=signs, minlength=len(edges))
    clash = (counts == 2) & (net != 0)
    if clash.any():
        e = int(np.flatnonzero(clash)[0])
        raise MeshError(
            f"edge {tuple(int(v) for v in edges[e])} has inconsistent facet orientations")

    return SurfaceMesh(coords, edges.astype(np.int64), tris,
                       inverse.reshape(-1, 3), signs.reshape(-1, 3))


def refine_uniform(mesh):
    """Split every facet into four at its edge midpoints.

    Original nodes keep their indices; midpoint of edge ``e`` becomes node
    ``N + e``. The four children of facet ``f`` are ``4f .. 4f+3``.
    """
    n = mesh.n_nodes
    mids = 0.5 * (mesh.node_coords[mesh.edges[:, 0]] + mesh.node_coords[mesh.edges[:, 1]])
    coords = np.vstack([mesh.node_coords, mids])
    a, b, c = mesh.facets.T
    # midpoint opposite local vertex k sits on local edge k
    m_bc, m_ca, m_ab = (n + mesh.facet_edges[:, k] for k in range(3))
    children = np.stack([
        np.stack([a, m_ab, m_ca], 1),
        np.stack([m_ab, b, m_bc], 1),
        np.stack([m_ca, m_bc, c], 1),
        np.stack([m_ab, m_bc, m_ca], 1),
    ], axis=1).reshape(-1, 3)
    return build_complex(coords, children)


@dataclass(frozen=True, eq=False)
class BarycentricRefinement:
    """Barycentric refinement with maps back to the primal complex.

    Refined node ``k`` is the barycenter of the primal cell
    ``(node_parent_dim[k], node_parent[k])``: nodes first, then edge
    midpoints, then facet barycenters. Refined edges and facets record the
    unique lowest-dimensional primal cell containing them. ``facet_vertex``
    and ``facet_edge`` name the primal node and edge touched by each refined
    facet.
    """

    primal: SurfaceMesh
    refined: SurfaceMesh
    node_parent_dim: np.ndarray
    node_parent: np.ndarray
    edge_parent_dim: np.ndarray
    edge_parent: np.ndarray
    facet_parent: np.ndarray
    facet_vertex: np.ndarray
    facet_edge: np.ndarray

    def midpoint_node(self, e):
        return self.primal.n_nodes + e

    def barycenter_node(self, f):
        return self.primal.n_nodes + self.primal.n_edges + f


def refine_barycentric(mesh):
    """Split each facet into six triangles (vertex, edge midpoint, barycenter)."""
    n, ne, nf = mesh.n_nodes, mesh.n_edges, mesh.n_facets
    x = mesh.node_coords
    mids = 0.5 * (x[mesh.edges[:, 0]] + x[mesh.edges[:, 1]])
    bary = x[mesh.facets].mean(axis=1)
    coords = np.vstack([x, mids, bary])

    g = n + ne + np.arange(nf)
    tris, tvert, tedge = [], [], []
    for k in range(3):
        v, v_next = mesh.facets[:, k], mesh.facets[:, (k + 1) % 3]
        e_fwd = mesh.facet_edges[:, (k + 2) % 3]  # side (v, v_next)
        tris += [np.stack([v, n + e_fwd, g], 1), np.stack([n + e_fwd, v_next, g], 1)]
        tvert += [v, v_next]
        tedge += [e_fwd, e_fwd]
    order = lambda parts: np.stack(parts, axis=1).reshape(-1, *parts[0].shape[1:])
    tris, tvert, tedge = order(tris), order(tvert), order(tedge)
    refined = build_complex(coords, tris)

    node_dim = np.concatenate([np.zeros(n), np.ones(ne), np.full(nf, 2)]).astype(np.int64)
    node_par = np.concatenate([np.arange(n), np.arange(ne), np.arange(nf)]).astype(np.int64)

    # a refined edge lies in a primal edge iff neither endpoint is a barycenter
    ed = refined.edges
    on_edge = node_dim[ed[:, 1]] < 2
    edge_dim = np.where(on_edge, 1, 2)
    edge_par = np.empty(refined.n_edges, dtype=np.int64)
    # sorted endpoints: (primal node, midpoint) for halves of primal edges
    edge_par[on_edge] = node_par[ed[on_edge, 1]]
    left_right = refined.edge_facets
    owner = np.where(left_right[:, 0] >= 0, left_right[:, 0], left_right[:, 1])
    facet_par = np.repeat(np.arange(nf), 6)
    edge_par[~on_edge] = facet_par[owner[~on_edge]]

    return BarycentricRefinement(
        primal=mesh, refined=refined,
        node_parent_dim=_frozen(node_dim), node_parent=_frozen(node_par),
        edge_parent_dim=_frozen(edge_dim.astype(np.int64)), edge_parent=_frozen(edge_par),
        facet_parent=_frozen(facet_par), facet_vertex=_frozen(tvert), facet_edge=_frozen(tedge),
    )


@dataclass(frozen=True, eq=False)
class DualMesh:
    """Barycentric dual, truncated at the boundary, as chains of refined cells.

    Dual q-cells are indexed like the primal (2-q)-cells they are starred
    from, so ``star`` is the identity on indices. ``C[q]`` has one row per
    dual q-cell and one column per refined q-cell.
    """

    refinement: BarycentricRefinement
    C0: sp.csr_matrix
    C1: sp.csr_matrix
    C2: sp.csr_matrix

    def chain(self, q):
        return (self.C0, self.C1, self.C2)[q]

    def n_v(self, q):
        return np.diff(self.chain(q).indptr)

    def star(self, r, t):
        """Dual (2-r)-cell of primal r-cell ``t``."""
        return 2 - r, t


def build_dual(ref):
    """Build the dual chains with the orientation ``(*t, t)`` positive."""
    m, fine = ref.primal, ref.refined
    n, ne, nf = m.n_nodes, m.n_edges, m.n_facets

    c0 = sp.csr_matrix((np.ones(nf, dtype=np.int64),
                        (np.arange(nf), ref.barycenter_node(np.arange(nf)))),
                       shape=(nf, fine.n_nodes))

    # dual edge of e runs from the barycenter of its left facet to that of its right facet
    lookup = {tuple(e): i for i, e in enumerate(fine.edges.tolist())}
    rows, cols, vals = [], [], []
    for e in range(ne):
        mid = ref.midpoint_node(e)
        left, right = m.edge_facets[e]
        if left >= 0:
            g = ref.barycenter_node(left)
            rows.append(e)
            cols.append(lookup[(mid, g)])
            vals.append(-1)  # refined edge is oriented mid -> g, path goes g -> mid
        if right >= 0:
            g = ref.barycenter_node(right)
            rows.append(e)
            cols.append(lookup[(mid, g)])
            vals.append(1)
    c1 = sp.csr_matrix((np.array(vals, dtype=np.int64), (rows, cols)), shape=(ne, fine.n_edges))

    c2 = sp.csr_matrix((np.ones(fine.n_facets, dtype=np.int64),
                        (ref.facet_vertex, np.arange(fine.n_facets))),
                       shape=(n, fine.n_facets))
    for c in (c0, c1, c2):
        c.sort_indices()
    dual = DualMesh(ref, c0, c1, c2)
    _check_dual_orientation(dual)
    return dual


def _check_dual_orientation(dual):
    ref = dual.refinement
    m, fine = ref.primal, ref.refined
    # the dual edge crosses its primal edge from left to right
    chains = dual.C1.tocoo()
    x = fine.node_coords
    d = x[fine.edges[chains.col, 1]] - x[fine.edges[chains.col, 0]]
    d *= chains.data[:, None]
    t = m.node_coords[m.edges[chains.row, 1]] - m.node_coords[m.edges[chains.row, 0]]
    cross = d[:, 0] * t[:, 1] - d[:, 1] * t[:, 0]
    if not (cross > 0).all():
        bad = int(chains.row[np.flatnonzero(cross <= 0)[0]])
        raise AssertionError(f"dual edge {bad} violates the orientation convention")


def read_mesh(path):
    """Read the plain-text mesh format (``N E F`` header, coordinates, triples)."""
    with open(path, encoding="ascii") as fh:
        tokens = fh.read().split()
    n, ne, nf = (int(t) for t in tokens[:3])
    pos = 3
    coords = np.array(tokens[pos:pos + 2 * n], dtype=float).reshape(n, 2)
    pos += 2 * n
    facets = np.array(tokens[pos:pos + 3 * nf], dtype=np.int64).reshape(nf, 3)
    mesh = build_complex(coords, facets)
    if ne and ne != mesh.n_edges:
        raise MeshError(f"header declares {ne} edges but the facets define {mesh.n_edges}")
    return mesh


def write_mesh(mesh, path, with_edges=True):
    lines = [f"{mesh.n_nodes} {mesh.n_edges} {mesh.n_facets}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.node_coords.tolist()]
    lines += [f"{a} {b} {c}" for a, b, c in mesh.facets.tolist()]
    if with_edges:
        lines.append("# edges")
        lines += [f"# {a} {b}" for a, b in mesh.edges.tolist()]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
