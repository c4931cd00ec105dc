"""Mesh coupling operators Q^r_ji : W^r_i -> W^r_j.

Three families are provided:

``derham``    Whitney interpolation on the source, de Rham map on the target.
``galerkin``  L2 projection (Euclidean inner product of vector proxies).
``bc``        projection with Buffa-Christiansen multipliers of the target,
              using the metric-free pairing b(beta, omega) = int beta ^ omega.

Projection methods solve ``M_own x_j = M_cross x_i`` with CGS.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .bc import bc_space
from .forms import FormDoFs, barycentric_coords, exterior_derivative, local_basis, norm_L2
from .overlay import clip_segments, intersect_meshes, locate_points
from .quadrature import line_rule, quad_points

__all__ = [
    "METHODS",
    "CGSError",
    "CGSResult",
    "CouplingOperator",
    "pairing_matrix",
    "assemble_own",
    "assemble_cross",
    "derham_matrix",
    "solve_cgs",
    "build_operator",
    "apply_Q",
    "condition_number",
    "check_commuting",
    "write_matrix",
]

log = logging.getLogger(__name__)

METHODS = ("derham", "galerkin", "bc")


class CGSError(RuntimeError):
    def __init__(self, message, residual, iterations):
        super().__init__(f"{message} (relative residual {residual:.3e} after {iterations} steps)")
        self.residual = residual
        self.iterations = iterations


@dataclass
class CGSResult:
    x: np.ndarray
    iterations: int
    residual: float


def solve_cgs(M, rhs, tol=1e-6, maxit=200):
    """Conjugate gradients squared from a zero initial guess.

    Stops once ``||M x - rhs|| <= tol ||rhs||``; raises :class:`CGSError`
    on breakdown or when ``maxit`` steps do not suffice.
    """
    b = np.asarray(rhs, dtype=float)
    nb = np.linalg.norm(b)
    x = np.zeros_like(b)
    if nb == 0.0:
        return CGSResult(x, 0, 0.0)
    r = b.copy()
    r0 = b.copy()
    rho = r0 @ r
    u = r.copy()
    p = r.copy()
    res = 1.0
    for it in range(1, maxit + 1):
        v = M @ p
        sigma = r0 @ v
        if sigma == 0.0 or not np.isfinite(sigma):
            raise CGSError("CGS breakdown (sigma = 0)", res, it)
        alpha = rho / sigma
        q = u - alpha * v
        uq = u + q
        x += alpha * uq
        r -= alpha * (M @ uq)
        res = np.linalg.norm(r) / nb
        if res <= tol:
            true_res = np.linalg.norm(M @ x - b) / nb
            if true_res <= 10 * tol:
                return CGSResult(x, it, float(true_res))
            r = b - M @ x  # recurrence drifted; keep iterating on the true residual
        rho_new = r0 @ r
        if abs(rho_new) <= 1e-300:
            raise CGSError("CGS breakdown (rho = 0)", res, it)
        beta = rho_new / rho
        rho = rho_new
        u = r + beta * q
        p = u + beta * (q + beta * p)
    raise CGSError("CGS did not converge", res, maxit)


def _values(vals, r):
    return vals if r == 1 else vals[..., None]


def pairing_matrix(mesh_x, qx, mesh_y, ry, facets_x, facets_y, points, weights, kind):
    """Sparse matrix of pairings between basis forms of two meshes.

    Integration points ``points`` (P, 2) with ``weights`` lie in facet
    ``facets_x`` of ``mesh_x`` and ``facets_y`` of ``mesh_y``. ``kind`` is
    ``"wedge"`` (requires qx + ry = 2) or ``"l2"`` (requires qx = ry).
    """
    bx = barycentric_coords(mesh_x, facets_x, points)
    by = barycentric_coords(mesh_y, facets_y, points)
    ix, vx = local_basis(mesh_x, qx, facets_x, bx)
    iy, vy = local_basis(mesh_y, ry, facets_y, by)
    if kind == "wedge":
        if qx + ry != 2:
            raise ValueError(f"wedge pairing needs complementary degrees, got {qx} and {ry}")
        if qx == 1:
            local = (np.einsum("pi,pj->pij", vx[..., 0], vy[..., 1])
                     - np.einsum("pi,pj->pij", vx[..., 1], vy[..., 0]))
        else:
            local = np.einsum("pi,pj->pij", vx, vy)
    elif kind == "l2":
        if qx != ry:
            raise ValueError(f"L2 pairing needs equal degrees, got {qx} and {ry}")
        local = np.einsum("pid,pjd->pij", _values(vx, qx), _values(vy, ry))
    else:
        raise ValueError(f"unknown pairing {kind!r}")
    local *= weights[:, None, None]
    rows = np.broadcast_to(ix[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(iy[:, None, :], local.shape).ravel()
    shape = (mesh_x.n_cells(qx), mesh_y.n_cells(ry))
    m = sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()
    m.sum_duplicates()
    return m


@lru_cache(maxsize=32)
def _overlay(mesh_a, mesh_b):
    return intersect_meshes(mesh_a, mesh_b)


def _cell_quadrature(cells, parent_a, parent_b, order=4):
    pts, w = quad_points(cells, order)
    nq = w.shape[1]
    return np.repeat(parent_a, nq), np.repeat(parent_b, nq), pts.reshape(-1, 2), w.ravel()


def assemble_own(target, method, r):
    """``[M]_jj``: multipliers of the target paired with its own Whitney r-forms."""
    if method == "bc":
        basis = bc_space(target)
        fine = basis.refined
        cells = fine.node_coords[fine.facets]
        fx, fy, pts, w = _cell_quadrature(cells, np.arange(fine.n_facets),
                                          basis.refinement.facet_parent)
        P = pairing_matrix(fine, 2 - r, target, r, fx, fy, pts, w, "wedge")
        return sp.csr_matrix(basis.R(2 - r) @ P)
    if method == "galerkin":
        cells = target.node_coords[target.facets]
        ids = np.arange(target.n_facets)
        fx, fy, pts, w = _cell_quadrature(cells, ids, ids)
        return pairing_matrix(target, r, target, r, fx, fy, pts, w, "l2")
    if method == "derham":
        raise ValueError("the de Rham operator has no mass matrix")
    raise ValueError(f"unknown method {method!r}")


def assemble_cross(target, source, method, r, overlay=None):
    """``[M]_ji``: multipliers of the target paired with Whitney r-forms of the source."""
    if method == "bc":
        basis = bc_space(target)
        fine = basis.refined
        ov = overlay if overlay is not None else _overlay(fine, source)
        fx, fy, pts, w = _cell_quadrature(ov.cells, ov.parent_a, ov.parent_b)
        P = pairing_matrix(fine, 2 - r, source, r, fx, fy, pts, w, "wedge")
        return sp.csr_matrix(basis.R(2 - r) @ P)
    if method == "galerkin":
        ov = overlay if overlay is not None else _overlay(target, source)
        fx, fy, pts, w = _cell_quadrature(ov.cells, ov.parent_a, ov.parent_b)
        return pairing_matrix(target, r, source, r, fx, fy, pts, w, "l2")
    if method == "derham":
        raise ValueError("the de Rham operator has no mass matrix")
    raise ValueError(f"unknown method {method!r}")


def derham_matrix(target, source, r):
    """Matrix of de Rham map (target) after Whitney interpolation (source)."""
    if r == 0:
        fac, bary = locate_points(source, target.node_coords)
        rows = np.repeat(np.arange(target.n_nodes), 3)
        return sp.csr_matrix((bary.ravel(), (rows, source.facets[fac].ravel())),
                             shape=(target.n_nodes, source.n_nodes))
    if r == 1:
        x = target.node_coords
        a, b = x[target.edges[:, 0]], x[target.edges[:, 1]]
        seg, fac, t0, t1 = clip_segments(source, a, b)
        s, gw = line_rule(2)
        tangent = b[seg] - a[seg]
        rows, cols, vals = [], [], []
        for sk, wk in zip(s, gw):
            t = t0 + sk * (t1 - t0)
            pts = a[seg] + t[:, None] * tangent
            ids, v = local_basis(source, 1, fac, barycentric_coords(source, fac, pts))
            contrib = np.einsum("pkd,pd->pk", v, tangent) * (wk * (t1 - t0))[:, None]
            rows.append(np.repeat(seg, 3))
            cols.append(ids.ravel())
            vals.append(contrib.ravel())
        m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(target.n_edges, source.n_edges)).tocsr()
        m.sum_duplicates()
        return m
    if r == 2:
        ov = _overlay(target, source)
        vals = ov.areas / source.areas[ov.parent_b]
        m = sp.coo_matrix((vals, (ov.parent_a, ov.parent_b)),
                          shape=(target.n_facets, source.n_facets)).tocsr()
        m.sum_duplicates()
        return m
    raise ValueError(f"degree must be 0, 1 or 2, got {r}")


@dataclass(eq=False)
class CouplingOperator:
    method: str
    degree: int
    source: object
    target: object
    M_own: sp.csr_matrix | None = None
    M_cross: sp.csr_matrix | None = None
    Q: sp.csr_matrix | None = None
    tol: float = 1e-6
    maxit: int = 200
    history: list = field(default_factory=list)

    @property
    def shape(self):
        return (self.target.n_cells(self.degree), self.source.n_cells(self.degree))


def build_operator(method, r, source, target, tol=1e-6, maxit=200):
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if r not in (0, 1, 2):
        raise ValueError(f"degree must be 0, 1 or 2, got {r}")
    if method == "derham":
        return CouplingOperator(method, r, source, target, Q=derham_matrix(target, source, r),
                                tol=tol, maxit=maxit)
    return CouplingOperator(method, r, source, target,
                            M_own=assemble_own(target, method, r),
                            M_cross=assemble_cross(target, source, method, r),
                            tol=tol, maxit=maxit)


def apply_Q(op, w, tol=None, return_info=False):
    """Map a Whitney form from the source mesh of ``op`` to its target mesh."""
    if w.degree != op.degree:
        raise ValueError(f"operator acts on {op.degree}-forms, got a {w.degree}-form")
    if w.mesh is not op.source:
        raise ValueError("form does not live on the source mesh")
    info = None
    if op.method == "derham":
        coeffs = op.Q @ w.coeffs
    else:
        info = solve_cgs(op.M_own, op.M_cross @ w.coeffs, op.tol if tol is None else tol, op.maxit)
        op.history.append(info.iterations)
        coeffs = info.x
    out = FormDoFs(op.degree, op.target, coeffs)
    return (out, info) if return_info else out


def condition_number(M):
    """2-norm condition number via dense singular values (inf if singular)."""
    dense = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    s = np.linalg.svd(dense, compute_uv=False)
    if s[-1] < 1e-14 * s[0]:
        return np.inf
    return float(s[0] / s[-1])


def check_commuting(method, source, target, w, tol=1e-12):
    """``|| d Q^r w - Q^{r+1} d w ||_L2`` on the target mesh."""
    if w.degree not in (0, 1):
        raise ValueError("commuting check needs a 0- or 1-form")
    r = w.degree
    op_r = build_operator(method, r, source, target, tol=tol, maxit=1000)
    op_r1 = build_operator(method, r + 1, source, target, tol=tol, maxit=1000)
    lhs = exterior_derivative(apply_Q(op_r, w))
    rhs = apply_Q(op_r1, exterior_derivative(w))
    return norm_L2(target, lhs - rhs)


def write_matrix(M, path, header=None):
    """Coordinate text (``row col value`` per nonzero) with an optional ``#`` header."""
    m = sp.coo_matrix(M)
    with open(path, "w", encoding="ascii") as fh:
        if header:
            for key, value in header.items():
                fh.write(f"# {key}: {value}\n")
        fh.write(f"# shape: {m.shape[0]} {m.shape[1]}\n")
        for i, j, v in zip(m.row.tolist(), m.col.tolist(), m.data.tolist()):
            fh.write(f"{i} {j} {v!r}\n")
