"""Common refinement of two planar triangulations and related geometry."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .quadrature import quad_points

__all__ = [
    "OverlayError",
    "Overlay",
    "intersect_meshes",
    "locate_point",
    "locate_points",
    "clip_segment",
    "clip_segments",
    "quad_points",
    "write_overlay",
]

log = logging.getLogger(__name__)

TOL_REL = 1e-12


class OverlayError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Overlay:
    """Triangles refining both meshes; ``parent_a``/``parent_b`` name the facets containing them."""

    cells: np.ndarray
    parent_a: np.ndarray
    parent_b: np.ndarray
    tolerance: float = TOL_REL
    sliver_area: float = 0.0
    pairs_tested: int = 0

    def __len__(self):
        return len(self.cells)

    @property
    def areas(self):
        c = self.cells
        d1, d2 = c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def total_area(self):
        return float(self.areas.sum())

    def quadrature(self, order=4):
        """Points (K, nq, 2) and weights (K, nq) on every cell."""
        return quad_points(self.cells, order)

    def swapped(self):
        return Overlay(self.cells, self.parent_b, self.parent_a, self.tolerance,
                       self.sliver_area, self.pairs_tested)


class _BucketGrid:
    """Uniform bucket grid over facet bounding boxes."""

    def __init__(self, mesh):
        x, tris = mesh.node_coords, mesh.facets
        lo, hi = x.min(axis=0), x.max(axis=0)
        span = np.maximum(hi - lo, 1e-300)
        n = max(1, int(np.sqrt(mesh.n_facets)))
        self.nx = self.ny = n
        self.origin = lo.astype(float)
        self.inv_h = n / span
        p = x[tris]
        ix0 = np.clip(((p[:, :, 0].min(1) - lo[0]) * self.inv_h[0]).astype(np.int64), 0, n - 1)
        ix1 = np.clip(((p[:, :, 0].max(1) - lo[0]) * self.inv_h[0]).astype(np.int64), 0, n - 1)
        iy0 = np.clip(((p[:, :, 1].min(1) - lo[1]) * self.inv_h[1]).astype(np.int64), 0, n - 1)
        iy1 = np.clip(((p[:, :, 1].max(1) - lo[1]) * self.inv_h[1]).astype(np.int64), 0, n - 1)
        owners, cells = [], []
        for dy in range(int((iy1 - iy0).max()) + 1):
            for dx in range(int((ix1 - ix0).max()) + 1):
                ok = (ix0 + dx <= ix1) & (iy0 + dy <= iy1)
                f = np.flatnonzero(ok)
                owners.append(f)
                cells.append((iy0[f] + dy) * n + ix0[f] + dx)
        owners, cells = np.concatenate(owners), np.concatenate(cells)
        order = np.lexsort((owners, cells))
        self.items = owners[order].astype(np.int64)
        self.start = np.searchsorted(cells[order], np.arange(n * n + 1)).astype(np.int64)
        self.x = np.ascontiguousarray(x)
        self.tris = np.ascontiguousarray(tris)

    def args(self):
        return (self.x, self.tris, self.start, self.items, self.origin, self.inv_h, self.nx, self.ny)


@lru_cache(maxsize=64)
def _grid(mesh):
    return _BucketGrid(mesh)


def locate_points(mesh, points, tol=1e-10):
    """Facet ids and barycentric coordinates for many points.

    Points on shared edges or vertices go to any incident facet.
    """
    pts = np.ascontiguousarray(np.reshape(points, (-1, 2)), dtype=float)
    found, bary = _kernels.locate_points(*_grid(mesh).args(), pts, tol)
    if (found < 0).any():
        bad = pts[np.flatnonzero(found < 0)[0]]
        raise OverlayError(f"point ({bad[0]:.6g}, {bad[1]:.6g}) lies outside the mesh")
    return found, bary


def locate_point(mesh, p, tol=1e-10):
    found, bary = locate_points(mesh, [p], tol)
    return int(found[0]), bary[0]


def clip_segments(mesh, p0, p1, tol=1e-12):
    """Split segments ``p0[s] -> p1[s]`` at facet boundaries.

    Returns arrays ``(segment, facet, t0, t1)`` ordered by segment and
    parameter; the intervals of each segment partition [0, 1].
    """
    p0 = np.ascontiguousarray(np.reshape(p0, (-1, 2)), dtype=float)
    p1 = np.ascontiguousarray(np.reshape(p1, (-1, 2)), dtype=float)
    count, seg, fac, t0, t1 = _kernels.clip_segments(*_grid(mesh).args(), p0, p1, tol)
    if count < 0:
        raise RuntimeError("segment clipping buffer overflow")
    seg, fac, t0, t1 = seg[:count], fac[:count], t0[:count], t1[:count]
    order = np.lexsort((fac, -(t1 - t0), t0, seg))
    seg, fac, t0, t1 = seg[order], fac[order], t0[order], t1[order]

    keep_s, keep_f, keep_0, keep_1 = [], [], [], []
    reach = np.zeros(len(p0))
    for s, f, a, b in zip(seg.tolist(), fac.tolist(), t0.tolist(), t1.tolist()):
        end = reach[s]
        if b <= end + tol:
            continue  # covered already, e.g. the twin facet along a shared edge
        if a > end + 1e-9:
            raise OverlayError(f"segment {s} leaves the mesh near parameter {end:.6g}")
        keep_s.append(s)
        keep_f.append(f)
        keep_0.append(end)
        keep_1.append(b)
        reach[s] = b
    bad = np.flatnonzero(reach < 1.0 - 1e-9)
    if len(bad):
        raise OverlayError(f"segment {bad[0]} leaves the mesh near parameter {reach[bad[0]]:.6g}")
    return (np.array(keep_s, dtype=np.int64), np.array(keep_f, dtype=np.int64),
            np.array(keep_0), np.minimum(np.array(keep_1), 1.0))


def clip_segment(mesh, p0, p1, tol=1e-12):
    """Ordered sub-segments ``[(facet, q0, q1), ...]`` of ``p0 -> p1``."""
    _, fac, t0, t1 = clip_segments(mesh, p0, p1, tol)
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    return [(int(f), p0 + a * (p1 - p0), p0 + b * (p1 - p0)) for f, a, b in zip(fac, t0, t1)]


def _front(meshA, meshB, tol_rel):
    cen = meshA.node_coords[meshA.facets[0]].mean(axis=0)
    seed_b, _ = locate_point(meshB, cen)
    args = (meshA.node_coords, meshA.facets, meshA.facet_neighbors, np.abs(meshA.areas),
            meshB.node_coords, meshB.facets, meshB.facet_neighbors, np.abs(meshB.areas),
            0, seed_b, tol_rel)
    cap = 4 * (meshA.n_facets + meshB.n_facets) + 64
    while True:
        count, cells, pa, pb, sliver, tested = _kernels.advancing_front_jit(*args, cap)
        if count >= 0:
            return cells[:count].copy(), pa[:count].copy(), pb[:count].copy(), sliver, tested
        cap *= 2


def _candidates(meshA, meshB, tol_rel):
    grid = _grid(meshB)
    pa = meshA.node_coords[meshA.facets]
    lo, hi = pa.min(axis=1), pa.max(axis=1)
    ix0 = np.clip(((lo[:, 0] - grid.origin[0]) * grid.inv_h[0]).astype(np.int64), 0, grid.nx - 1)
    ix1 = np.clip(((hi[:, 0] - grid.origin[0]) * grid.inv_h[0]).astype(np.int64), 0, grid.nx - 1)
    iy0 = np.clip(((lo[:, 1] - grid.origin[1]) * grid.inv_h[1]).astype(np.int64), 0, grid.ny - 1)
    iy1 = np.clip(((hi[:, 1] - grid.origin[1]) * grid.inv_h[1]).astype(np.int64), 0, grid.ny - 1)
    A, B = [], []
    for dy in range(int((iy1 - iy0).max()) + 1):
        for dx in range(int((ix1 - ix0).max()) + 1):
            ok = np.flatnonzero((ix0 + dx <= ix1) & (iy0 + dy <= iy1))
            cell = (iy0[ok] + dy) * grid.nx + ix0[ok] + dx
            counts = grid.start[cell + 1] - grid.start[cell]
            owner = np.repeat(ok, counts)
            offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
            A.append(owner)
            B.append(grid.items[np.repeat(grid.start[cell], counts) + offs])
    pairs = np.unique(np.stack([np.concatenate(A), np.concatenate(B)], axis=1), axis=0)
    pbb = meshB.node_coords[meshB.facets]
    blo, bhi = pbb.min(axis=1), pbb.max(axis=1)
    a, b = pairs[:, 0], pairs[:, 1]
    box = ((lo[a] <= bhi[b]) & (blo[b] <= hi[a])).all(axis=1)
    return a[box], b[box]


def _batch(meshA, meshB, tol_rel):
    a, b = _candidates(meshA, meshB, tol_rel)
    PA = meshA.node_coords[meshA.facets[a]]
    PB = meshB.node_coords[meshB.facets[b]]
    edges = np.concatenate([np.roll(PA, -1, axis=1) - PA, np.roll(PB, -1, axis=1) - PB], axis=1)
    tol = tol_rel * np.hypot(edges[..., 0], edges[..., 1]).max(axis=1)
    poly, n = _kernels.clip_tri_tri_numpy(PA, PB, tol)
    area = _kernels.poly_area_numpy(poly, n)
    floor = tol_rel * np.minimum(np.abs(meshA.areas[a]), np.abs(meshB.areas[b]))
    good = area > floor
    sliver = float(area[(~good) & (n >= 3) & (area > 0)].sum())
    cells, owner = _kernels.fan_numpy(poly[good], n[good])
    return cells, a[good][owner], b[good][owner], sliver, len(a)


def intersect_meshes(meshA, meshB, tol_rel=TOL_REL, method=None):
    """Common triangulation of two meshes of the same planar domain.

    ``method`` is ``"front"`` (advancing front, numba) or ``"batch"``
    (bucketed candidate pairs clipped in vectorized numpy); the default
    follows the numba switch.
    """
    method = method or ("front" if _kernels.use_numba() else "batch")
    if method == "front":
        cells, pa, pb, sliver, tested = _front(meshA, meshB, tol_rel)
    elif method == "batch":
        cells, pa, pb, sliver, tested = _batch(meshA, meshB, tol_rel)
    else:
        raise ValueError(f"unknown overlay method {method!r}")
    if len(cells) == 0:
        raise OverlayError("meshes do not overlap")
    ov = Overlay(cells, pa, pb, tol_rel, sliver, tested)
    total = ov.total_area
    for name, m in (("A", meshA), ("B", meshB)):
        if abs(total - m.area) > 1e-10 * m.area:
            raise OverlayError(
                f"domain mismatch: overlay area {total!r} vs mesh {name} area {m.area!r}")
    log.debug("overlay %s x %s: %d cells, %d pairs tested, sliver area %.3e",
              meshA, meshB, len(cells), tested, sliver)
    return ov


def write_overlay(ov, path):
    with open(path, "w", encoding="ascii") as fh:
        for tri, a, b in zip(ov.cells.tolist(), ov.parent_a.tolist(), ov.parent_b.tolist()):
            coords = " ".join(repr(v) for p in tri for v in p)
            fh.write(f"{coords} {a} {b}\n")


def integrate_polynomial(ov, func):
    """Integral of a vectorized ``func(x, y)`` over the overlay (degree-4 rule)."""
    pts, w = ov.quadrature(4)
    return float(np.sum(func(pts[..., 0], pts[..., 1]) * w))
