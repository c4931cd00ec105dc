"""Lowest-order Whitney forms: evaluation, de Rham maps, d, and L2 norms.

Vector proxies of 1-forms are the Euclidean covector components
``(w_x, w_y)``; 2-forms are represented by their density with respect to
``dx ^ dy``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import SurfaceMesh
from .quadrature import line_rule, triangle_rule

__all__ = [
    "FormDoFs",
    "AnalyticForm",
    "barycentric_coords",
    "local_basis",
    "eval_whitney",
    "de_rham_map",
    "exterior_derivative",
    "eval_form",
    "eval_form_at",
    "norm_L2",
    "diff_norm_L2",
    "seminorm_Hd",
    "read_dofs",
    "write_dofs",
]


@dataclass(frozen=True, eq=False)
class FormDoFs:
    """Coefficients of a Whitney r-form on ``mesh``."""

    degree: int
    mesh: SurfaceMesh
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if self.degree not in (0, 1, 2):
            raise ValueError(f"degree must be 0, 1 or 2, got {self.degree}")
        if c.shape != (self.mesh.n_cells(self.degree),):
            raise ValueError(
                f"{self.degree}-form on {self.mesh!r} needs {self.mesh.n_cells(self.degree)} "
                f"coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    def __add__(self, other):
        _check_same(self, other)
        return FormDoFs(self.degree, self.mesh, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _check_same(self, other)
        return FormDoFs(self.degree, self.mesh, self.coeffs - other.coeffs)

    def __mul__(self, alpha):
        return FormDoFs(self.degree, self.mesh, alpha * self.coeffs)

    __rmul__ = __mul__


def _check_same(a, b):
    if a.degree != b.degree or a.mesh is not b.mesh:
        raise ValueError("forms live in different spaces")


@dataclass(frozen=True)
class AnalyticForm:
    """Smooth r-form given by a vectorized ``func(x, y)``.

    ``func`` returns shape (P,) for r = 0 and r = 2 (density) and (P, 2) for r = 1.
    """

    degree: int
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __call__(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.asarray(self.func(p[:, 0], p[:, 1]), dtype=float)


def barycentric_coords(mesh, facets, points):
    """Barycentric coordinates of ``points`` (P, 2) in ``facets`` (P,)."""
    facets = np.asarray(facets)
    centroid = mesh.node_coords[mesh.facets[facets]].mean(axis=1)
    grads = mesh.barycentric_gradients[facets]
    return 1.0 / 3.0 + np.einsum("pkd,pd->pk", grads, np.asarray(points) - centroid)


def local_basis(mesh, r, facets, bary):
    """Values of the basis forms supported on each facet at given points.

    Returns ``(ids, values)``: ``ids`` (P, k) global dof indices and
    ``values`` (P, k) for r = 0, 2 or (P, k, 2) for r = 1, with k = 3, 3, 1.
    """
    facets = np.asarray(facets)
    if r == 0:
        return mesh.facets[facets], bary
    if r == 1:
        grads = mesh.barycentric_gradients[facets]
        vals = np.empty(bary.shape + (2,))
        for k in range(3):
            i, j = (k + 1) % 3, (k + 2) % 3
            vals[:, k] = bary[:, i, None] * grads[:, j] - bary[:, j, None] * grads[:, i]
        vals *= mesh.facet_signs[facets][:, :, None]
        return mesh.facet_edges[facets], vals
    if r == 2:
        return facets[:, None], (1.0 / mesh.areas[facets])[:, None]
    raise ValueError(f"degree must be 0, 1 or 2, got {r}")


def eval_whitney(mesh, r, facet, point, tol=1e-10):
    """Basis forms supported on ``facet`` evaluated at ``point``."""
    lam = barycentric_coords(mesh, [facet], np.reshape(point, (1, 2)))
    if lam.min() < -tol:
        raise ValueError(f"point {tuple(point)} lies outside facet {facet}")
    ids, vals = local_basis(mesh, r, [facet], lam)
    return ids[0], vals[0]


def eval_form_at(w, facets, points):
    """Vectorized evaluation of a Whitney form at points inside given facets."""
    facets = np.asarray(facets)
    bary = barycentric_coords(w.mesh, facets, points)
    ids, vals = local_basis(w.mesh, w.degree, facets, bary)
    c = w.coeffs[ids]
    if w.degree == 1:
        return np.einsum("pk,pkd->pd", c, vals)
    return np.einsum("pk,pk->p", c, vals)


def eval_form(mesh, w, facet, point, tol=1e-10):
    if w.mesh is not mesh:
        raise ValueError("form does not live on this mesh")
    ids, vals = eval_whitney(mesh, w.degree, facet, point, tol)
    return np.tensordot(w.coeffs[ids], vals, axes=(0, 0))


def de_rham_map(mesh, f):
    """Degrees of freedom of a smooth form: nodal values, circulations, fluxes."""
    x = mesh.node_coords
    if f.degree == 0:
        return FormDoFs(0, mesh, f(x))
    if f.degree == 1:
        s, w = line_rule(5)
        a, b = x[mesh.edges[:, 0]], x[mesh.edges[:, 1]]
        t = b - a
        pts = a[:, None, :] + s[None, :, None] * t[:, None, :]
        vals = f(pts.reshape(-1, 2)).reshape(len(t), len(s), 2)
        return FormDoFs(1, mesh, np.einsum("q,eqd,ed->e", w, vals, t))
    if f.degree == 2:
        bary, w = triangle_rule(4)
        pts = np.einsum("qk,fkd->fqd", bary, x[mesh.facets])
        vals = f(pts.reshape(-1, 2)).reshape(mesh.n_facets, len(w))
        return FormDoFs(2, mesh, mesh.areas * (vals @ w))
    raise ValueError(f"degree must be 0, 1 or 2, got {f.degree}")


def exterior_derivative(w):
    if w.degree not in (0, 1):
        raise ValueError("exterior derivative of a 2-form on a surface is not represented")
    D = w.mesh.incidence(w.degree)
    return FormDoFs(w.degree + 1, w.mesh, D.T @ w.coeffs)


def _sq(values):
    return values**2 if values.ndim == 1 else (values**2).sum(axis=-1)


def norm_L2(mesh, w):
    if w.mesh is not mesh:
        raise ValueError("form does not live on this mesh")
    if w.degree == 2:
        return float(np.sqrt(np.sum(w.coeffs**2 / mesh.areas)))
    bary, qw = triangle_rule(4)
    nq = len(qw)
    facets = np.repeat(np.arange(mesh.n_facets), nq)
    bary = np.tile(bary, (mesh.n_facets, 1))
    ids, vals = local_basis(mesh, w.degree, facets, bary)
    c = w.coeffs[ids]
    v = np.einsum("pk,pkd->pd", c, vals) if w.degree == 1 else np.einsum("pk,pk->p", c, vals)
    per_facet = _sq(v).reshape(mesh.n_facets, nq) @ qw
    return float(np.sqrt(np.sum(per_facet * mesh.areas)))


def diff_norm_L2(meshA, wA, meshB=None, wB=None, exact=None, overlay=None):
    """L2 norm of ``wA - wB`` (possibly on different meshes) or ``wA - exact``."""
    if exact is not None:
        if exact.degree != wA.degree:
            raise ValueError("incompatible degrees")
        bary, qw = triangle_rule(4)
        nq = len(qw)
        facets = np.repeat(np.arange(meshA.n_facets), nq)
        pts = np.einsum("qk,fkd->fqd", bary, meshA.node_coords[meshA.facets]).reshape(-1, 2)
        diff = eval_form_at(wA, facets, pts) - exact(pts)
        per = _sq(diff).reshape(meshA.n_facets, nq) @ qw
        return float(np.sqrt(np.sum(per * meshA.areas)))
    if wA.degree != wB.degree:
        raise ValueError(f"incompatible degrees {wA.degree} and {wB.degree}")
    if meshB is meshA:
        return norm_L2(meshA, wA - wB)
    if overlay is None:
        from .overlay import intersect_meshes
        overlay = intersect_meshes(meshA, meshB)
    pts, qw = overlay.quadrature(4)
    fa = np.repeat(overlay.parent_a, qw.shape[1])
    fb = np.repeat(overlay.parent_b, qw.shape[1])
    pts = pts.reshape(-1, 2)
    diff = eval_form_at(wA, fa, pts) - eval_form_at(wB, fb, pts)
    return float(np.sqrt(np.sum(_sq(diff) * qw.ravel())))


def seminorm_Hd(meshA, wA, meshB, wB, overlay=None):
    if wA.degree not in (0, 1):
        raise ValueError("H(d) seminorm needs degree 0 or 1")
    return diff_norm_L2(meshA, exterior_derivative(wA), meshB, exterior_derivative(wB),
                        overlay=overlay)


def write_dofs(w, path):
    lines = [f"{w.degree} {len(w.coeffs)}"] + [repr(float(c)) for c in w.coeffs]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_dofs(mesh, path):
    with open(path, encoding="ascii") as fh:
        tokens = fh.read().split()
    degree, n = int(tokens[0]), int(tokens[1])
    return FormDoFs(degree, mesh, np.array(tokens[2:2 + n], dtype=float))
