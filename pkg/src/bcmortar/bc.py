"""Buffa-Christiansen basis forms as combinations of refined Whitney forms.

Row ``v`` of ``R[q]`` holds the coefficients of the B-C q-form attached to
dual cell ``v`` (indexed by the primal (2-q)-cell it is dual to) with respect
to the Whitney q-forms of the barycentric refinement. The construction only
looks at incidences, never at coordinates.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .forms import barycentric_coords, local_basis
from .mesh import DualMesh, build_dual, refine_barycentric

__all__ = [
    "BCConstructionError",
    "BCBasis",
    "support_sets",
    "build_bc_2forms",
    "build_bc_1forms",
    "build_bc_0forms",
    "build_bc",
    "bc_space",
    "eval_bc_form",
    "interpolation_defect",
    "extder_defect",
    "write_coefficients",
]

CONSISTENCY_TOL = 1e-12


class BCConstructionError(RuntimeError):
    """A redundant equation of the coefficient recursion is violated."""


@dataclass(frozen=True, eq=False)
class BCBasis:
    dual: DualMesh
    R0: sp.csr_matrix
    R1: sp.csr_matrix
    R2: sp.csr_matrix
    supports: dict
    variant: str = "b0"
    residuals: dict = field(default_factory=dict)

    @property
    def refinement(self):
        return self.dual.refinement

    @property
    def primal(self):
        return self.dual.refinement.primal

    @property
    def refined(self):
        return self.dual.refinement.refined

    def R(self, q):
        return (self.R0, self.R1, self.R2)[q]


def support_sets(dual):
    """Refined facets making up the support of every B-C basis form.

    Returns ``{q: [array of refined facet ids per dual q-cell]}``.
    """
    ref = dual.refinement
    primal = ref.primal
    u2 = np.split(dual.C2.indices, dual.C2.indptr[1:-1])
    # the dual edge of e bounds the dual facets of the endpoints of e
    u1 = [np.union1d(u2[a], u2[b]) for a, b in primal.edges]
    # the dual node of t bounds the dual edges of the sides of t
    u0 = [np.union1d(np.union1d(u1[e0], u1[e1]), u1[e2]) for e0, e1, e2 in primal.facet_edges]
    return {2: u2, 1: u1, 0: u0}


def build_bc_2forms(dual):
    """Equal weights ``c / n_v`` on the refined triangles of each dual facet."""
    c2 = dual.C2.astype(float)
    return sp.csr_matrix(sp.diags(1.0 / dual.n_v(2)) @ c2)


def _row(mat, i):
    lo, hi = mat.indptr[i], mat.indptr[i + 1]
    return dict(zip(mat.indices[lo:hi].tolist(), mat.data[lo:hi].tolist()))


def _boundary_of(cells, cell_faces):
    """Faces appearing exactly once among ``cells`` (the chain boundary)."""
    faces, counts = np.unique(cell_faces[cells].ravel(), return_counts=True)
    return faces, set(faces[counts == 1].tolist())


def build_bc_1forms(dual, R2, supports=None, variant="b0"):
    """Coefficients of the B-C 1-forms, one dual edge at a time.

    Known values (chain weights, zero trace on the support boundary, and
    zero on the halves of the primal edge) seed a sweep over the refined
    facets of the support; every facet whose boundary holds exactly one
    unknown fixes it. The equations left over are consistency checks.
    """
    ref = dual.refinement
    primal, fine = ref.primal, ref.refined
    closed = not primal.boundary_edges.any()
    if variant == "closed" and not closed:
        raise ValueError("closed variant requires an interface without boundary")
    supports = supports or support_sets(dual)
    rhs_all = sp.csr_matrix(primal.D0.T.astype(float) @ R2)
    fe, fs = fine.facet_edges, fine.facet_signs
    halves_of = [[] for _ in range(primal.n_edges)]
    for w in np.flatnonzero(ref.edge_parent_dim == 1):
        halves_of[ref.edge_parent[w]].append(w)

    rows, cols, vals = [], [], []
    worst = 0.0
    for e in range(primal.n_edges):
        U = supports[1][e]
        edges_in_u, on_boundary = _boundary_of(U, fe)
        known = {w: 0.0 for w in on_boundary}
        known.update({w: c / dual.n_v(1)[e] for w, c in _row(dual.C1, e).items()})
        for w in halves_of[e]:
            if w in known:
                continue
            primal_end = fine.edges[w, 0]  # sorted: (primal node, midpoint)
            if closed or not primal.boundary_nodes[primal_end]:
                known[w] = 0.0
        rhs = _row(rhs_all, e)
        values = _sweep_facets(U, fe, fs, rhs, known, edges_in_u, f"dual edge {e}")
        worst = max(worst, values.pop(None))
        for w, x in values.items():
            if x != 0.0:
                rows.append(e)
                cols.append(w)
                vals.append(x)
    R1 = sp.csr_matrix((vals, (rows, cols)), shape=(primal.n_edges, fine.n_edges))
    R1.sort_indices()
    return R1, worst


def _sweep_facets(U, fe, fs, rhs, known, edges_in_u, label):
    values = dict(known)
    unknown = set(edges_in_u.tolist()) - set(values)
    facets_of = {}
    for z in U.tolist():
        for w in fe[z].tolist():
            facets_of.setdefault(w, []).append(z)
    queue = deque(U.tolist())
    while queue and unknown:
        z = queue.popleft()
        open_edges = [k for k in range(3) if fe[z, k] in unknown]
        if len(open_edges) != 1:
            continue
        k = open_edges[0]
        acc = rhs.get(z, 0.0)
        for j in range(3):
            if j != k:
                acc -= values[fe[z, j]] * fs[z, j]
        w = int(fe[z, k])
        values[w] = acc / fs[z, k]
        unknown.discard(w)
        queue.extend(facets_of[w])
    if unknown:
        raise BCConstructionError(f"{label}: {len(unknown)} coefficients left undetermined")
    worst = 0.0
    for z in U.tolist():
        res = sum(values[fe[z, j]] * fs[z, j] for j in range(3)) - rhs.get(z, 0.0)
        worst = max(worst, abs(res))
    if worst > CONSISTENCY_TOL:
        raise BCConstructionError(f"{label}: consistency residual {worst:.3e}")
    values[None] = worst
    return values


def build_bc_0forms(dual, R1, supports=None):
    """Coefficients of the B-C 0-forms by propagation along a spanning tree.

    The tree is breadth-first from the barycenter of the primal facet
    (coefficient 1); nodes on the support boundary are fixed to 0. Every
    refined edge of the support, tree or cotree, is then checked.
    """
    ref = dual.refinement
    primal, fine = ref.primal, ref.refined
    supports = supports or support_sets(dual)
    rhs_all = sp.csr_matrix(-(primal.D1.T.astype(float) @ R1))
    fe = fine.facet_edges
    fine_edges = fine.edges

    rows, cols, vals = [], [], []
    worst = 0.0
    for t in range(primal.n_facets):
        U = supports[0][t]
        edges_in_u, on_boundary = _boundary_of(U, fe)
        values = {int(n): 0.0 for w in on_boundary for n in fine_edges[w]}
        root = int(ref.barycenter_node(t))
        values[root] = 1.0
        rhs = _row(rhs_all, t)
        incident = {}
        for w in edges_in_u.tolist():
            p, q = fine_edges[w]
            incident.setdefault(int(p), []).append(w)
            incident.setdefault(int(q), []).append(w)
        queue = deque([root] + sorted(n for n in values if n != root))
        while queue:
            p = queue.popleft()
            for w in incident.get(p, ()):
                a, b = (int(n) for n in fine_edges[w])
                other = b if a == p else a
                if other in values:
                    continue
                # R[b] - R[a] = rhs[w]
                jump = rhs.get(w, 0.0)
                values[other] = values[p] + jump if other == b else values[p] - jump
                queue.append(other)
        missing = set(incident) - set(values)
        if missing:
            raise BCConstructionError(f"dual node {t}: nodes {sorted(missing)} unreachable")
        for w in edges_in_u.tolist():
            a, b = (int(n) for n in fine_edges[w])
            res = values[b] - values[a] - rhs.get(w, 0.0)
            if abs(res) > CONSISTENCY_TOL:
                raise BCConstructionError(
                    f"dual node {t}: refined edge {w} violates the tree equations by {res:.3e}")
            worst = max(worst, abs(res))
        for n, x in values.items():
            if x != 0.0:
                rows.append(t)
                cols.append(n)
                vals.append(x)
    R0 = sp.csr_matrix((vals, (rows, cols)), shape=(primal.n_facets, fine.n_nodes))
    R0.sort_indices()
    return R0, worst


def build_bc(ref, dual=None, variant="b0"):
    """All three coefficient matrices of the (boundary-truncated) B-C complex."""
    if variant not in ("b0", "closed"):
        raise ValueError(f"unknown variant {variant!r}")
    dual = dual if dual is not None else build_dual(ref)
    supports = support_sets(dual)
    R2 = build_bc_2forms(dual)
    R1, res1 = build_bc_1forms(dual, R2, supports, variant)
    R0, res0 = build_bc_0forms(dual, R1, supports)
    return BCBasis(dual, R0, R1, R2, supports, variant, {1: res1, 0: res0})


_SPACE_CACHE = {}


def bc_space(mesh):
    """B-C basis of ``mesh`` (cached per mesh object)."""
    key = id(mesh)
    hit = _SPACE_CACHE.get(key)
    if hit is None or hit[0] is not mesh:
        basis = build_bc(refine_barycentric(mesh))
        if len(_SPACE_CACHE) > 16:
            _SPACE_CACHE.clear()
        _SPACE_CACHE[key] = hit = (mesh, basis)
    return hit[1]


def eval_bc_form(basis, q, v, facet, point):
    """Value of the B-C q-form of dual cell ``v`` at ``point`` in refined ``facet``."""
    fine = basis.refined
    if facet not in set(basis.supports[q][v].tolist()):
        return np.zeros(2) if q == 1 else 0.0
    bary = barycentric_coords(fine, [facet], np.reshape(point, (1, 2)))
    ids, vals = local_basis(fine, q, [facet], bary)
    coeff = basis.R(q)[v].toarray().ravel()[ids[0]]
    return np.tensordot(coeff, vals[0], axes=(0, 0))


def interpolation_defect(basis):
    """max |C^q (R^q)^T - I| over q = 0, 1, 2."""
    worst = 0.0
    for q in range(3):
        P = (basis.dual.chain(q).astype(float) @ basis.R(q).T).toarray()
        worst = max(worst, np.abs(P - np.eye(len(P))).max())
    return worst


def extder_defect(basis, R0=None, R1=None, R2=None):
    """max entrywise defect of R^{q-1} D~^{q-1} = (-1)^r (D^r)^T R^q."""
    R0 = basis.R0 if R0 is None else R0
    R1 = basis.R1 if R1 is None else R1
    R2 = basis.R2 if R2 is None else R2
    primal, fine = basis.primal, basis.refined
    top = R1 @ fine.D1 - primal.D0.T @ R2
    low = R0 @ fine.D0 + primal.D1.T @ R1
    return max(abs(top).max(), abs(low).max())


def write_coefficients(basis, path):
    """Coordinate-format text, one ``q v w value`` line per nonzero."""
    with open(path, "w", encoding="ascii") as fh:
        for q in range(3):
            m = basis.R(q).tocoo()
            for v, w, x in zip(m.row.tolist(), m.col.tolist(), m.data.tolist()):
                fh.write(f"{q} {v} {w} {x!r}\n")
