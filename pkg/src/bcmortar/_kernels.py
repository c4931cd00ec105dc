"""Hot geometric kernels: triangle clipping, advancing-front overlay, point
location and segment clipping.

Each entry point has a numba-compiled version (``*_jit``) and a
vectorized numpy version (``*_numpy``); the public dispatchers pick one
according to :data:`bcmortar._jit.USE_NUMBA`.
"""
import math

import numpy as np

from . import _jit
from ._jit import njit

MAXV = 12


# ---------------------------------------------------------------------------
# numba kernels

@njit
def _tri_area(x0, y0, x1, y1, x2, y2):
    return 0.5 * ((x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0))


@njit
def _clip_tri_tri(pa, pb, tol, buf0, buf1):
    """Sutherland-Hodgman clip of triangle ``pa`` by triangle ``pb`` (both CCW).

    The result is left in ``buf0``; returns its vertex count after
    snapping, deduplication and removal of collinear vertices.
    """
    n = 3
    for i in range(3):
        buf0[i, 0] = pa[i, 0]
        buf0[i, 1] = pa[i, 1]
    for k in range(3):
        if n == 0:
            return 0
        c0x, c0y = pb[k, 0], pb[k, 1]
        ex, ey = pb[(k + 1) % 3, 0] - c0x, pb[(k + 1) % 3, 1] - c0y
        length = math.sqrt(ex * ex + ey * ey)
        px, py = buf0[n - 1, 0], buf0[n - 1, 1]
        sp = (ex * (py - c0y) - ey * (px - c0x)) / length
        m = 0
        for i in range(n):
            cx, cy = buf0[i, 0], buf0[i, 1]
            sc = (ex * (cy - c0y) - ey * (cx - c0x)) / length
            if sc >= -tol:
                if sp < -tol:
                    t = sp / (sp - sc)
                    buf1[m, 0] = px + t * (cx - px)
                    buf1[m, 1] = py + t * (cy - py)
                    m += 1
                buf1[m, 0] = cx
                buf1[m, 1] = cy
                m += 1
            elif sp > tol:
                t = sp / (sp - sc)
                buf1[m, 0] = px + t * (cx - px)
                buf1[m, 1] = py + t * (cy - py)
                m += 1
            px, py, sp = cx, cy, sc
        for i in range(m):
            buf0[i, 0] = buf1[i, 0]
            buf0[i, 1] = buf1[i, 1]
        n = m
    return _tidy_polygon(buf0, n, pa, pb, tol)


@njit
def _tidy_polygon(poly, n, pa, pb, tol):
    # snap onto input vertices
    for i in range(n):
        for j in range(6):
            qx = pa[j, 0] if j < 3 else pb[j - 3, 0]
            qy = pa[j, 1] if j < 3 else pb[j - 3, 1]
            if abs(poly[i, 0] - qx) <= tol and abs(poly[i, 1] - qy) <= tol:
                poly[i, 0] = qx
                poly[i, 1] = qy
                break
    # drop repeated points
    m = 0
    for i in range(n):
        if m > 0 and abs(poly[i, 0] - poly[m - 1, 0]) <= tol and abs(poly[i, 1] - poly[m - 1, 1]) <= tol:
            continue
        poly[m, 0] = poly[i, 0]
        poly[m, 1] = poly[i, 1]
        m += 1
    while m > 1 and abs(poly[m - 1, 0] - poly[0, 0]) <= tol and abs(poly[m - 1, 1] - poly[0, 1]) <= tol:
        m -= 1
    # drop vertices lying on the segment joining their neighbours
    changed = True
    while changed and m >= 3:
        changed = False
        for i in range(m):
            a = (i - 1) % m
            b = (i + 1) % m
            dx, dy = poly[b, 0] - poly[a, 0], poly[b, 1] - poly[a, 1]
            length = math.sqrt(dx * dx + dy * dy)
            if length == 0.0:
                dist = 0.0
            else:
                dist = abs(dx * (poly[i, 1] - poly[a, 1]) - dy * (poly[i, 0] - poly[a, 0])) / length
            if dist <= tol:
                for j in range(i, m - 1):
                    poly[j, 0] = poly[j + 1, 0]
                    poly[j, 1] = poly[j + 1, 1]
                m -= 1
                changed = True
                break
    if m < 3:
        return 0
    return m


@njit
def _poly_area(poly, n):
    s = 0.0
    for i in range(n):
        j = (i + 1) % n
        s += poly[i, 0] * poly[j, 1] - poly[j, 0] * poly[i, 1]
    return 0.5 * s


@njit
def _pair_tol(pa, pb, tol_rel):
    h = 0.0
    for k in range(3):
        for p in (pa, pb):
            dx = p[(k + 1) % 3, 0] - p[k, 0]
            dy = p[(k + 1) % 3, 1] - p[k, 1]
            h = max(h, math.sqrt(dx * dx + dy * dy))
    return tol_rel * h


@njit
def _load(x, tris, f, out):
    for k in range(3):
        out[k, 0] = x[tris[f, k], 0]
        out[k, 1] = x[tris[f, k], 1]


@njit
def _overlap(xa, ta, a, xb, tb, b, tol_rel, pa, pb, buf0, buf1):
    _load(xa, ta, a, pa)
    _load(xb, tb, b, pb)
    tol = _pair_tol(pa, pb, tol_rel)
    n = _clip_tri_tri(pa, pb, tol, buf0, buf1)
    if n < 3:
        return 0, 0.0, tol
    return n, _poly_area(buf0, n), tol


@njit
def advancing_front_jit(xa, ta, na, areas_a, xb, tb, nb, areas_b, seed_a, seed_b, tol_rel, cap):
    """Overlay of two triangulations by advancing fronts over facet adjacency.

    Returns ``(count, cells, parent_a, parent_b, sliver_area, pairs_tested)``;
    ``count == -1`` signals that ``cap`` was too small.
    """
    nA, nB = ta.shape[0], tb.shape[0]
    cells = np.empty((cap, 3, 2))
    par_a = np.empty(cap, np.int64)
    par_b = np.empty(cap, np.int64)
    count = 0
    sliver = 0.0
    tested = 0

    seed = np.full(nA, -1, np.int64)
    state = np.zeros(nA, np.int8)
    queue_a = np.empty(nA, np.int64)
    head, tail = 0, 0
    seed[seed_a] = seed_b
    state[seed_a] = 1
    queue_a[tail] = seed_a
    tail += 1

    stamp = np.full(nB, -1, np.int64)
    queue_b = np.empty(nB, np.int64)
    hits = np.empty(nB, np.int64)
    pa = np.empty((3, 2))
    pb = np.empty((3, 2))
    buf0 = np.empty((MAXV, 2))
    buf1 = np.empty((MAXV, 2))

    next_unseen = 0
    while True:
        while head < tail:
            a = queue_a[head]
            head += 1
            state[a] = 2
            nh = 0
            qh, qt = 0, 0
            stamp[seed[a]] = a
            queue_b[qt] = seed[a]
            qt += 1
            while qh < qt:
                b = queue_b[qh]
                qh += 1
                n, area, tol = _overlap(xa, ta, a, xb, tb, b, tol_rel, pa, pb, buf0, buf1)
                tested += 1
                if area <= tol_rel * min(areas_a[a], areas_b[b]):
                    if n >= 3 and area > 0.0:
                        sliver += area
                    continue
                hits[nh] = b
                nh += 1
                for i in range(1, n - 1):
                    if _tri_area(buf0[0, 0], buf0[0, 1], buf0[i, 0], buf0[i, 1],
                                 buf0[i + 1, 0], buf0[i + 1, 1]) <= 0.0:
                        continue
                    if count >= cap:
                        return -1, cells, par_a, par_b, sliver, tested
                    cells[count, 0, 0] = buf0[0, 0]
                    cells[count, 0, 1] = buf0[0, 1]
                    cells[count, 1, 0] = buf0[i, 0]
                    cells[count, 1, 1] = buf0[i, 1]
                    cells[count, 2, 0] = buf0[i + 1, 0]
                    cells[count, 2, 1] = buf0[i + 1, 1]
                    par_a[count] = a
                    par_b[count] = b
                    count += 1
                for k in range(3):
                    c = nb[b, k]
                    if c >= 0 and stamp[c] != a:
                        stamp[c] = a
                        queue_b[qt] = c
                        qt += 1
            # hand a starting facet of B to each unvisited neighbour of a
            for k in range(3):
                an = na[a, k]
                if an < 0 or state[an] != 0:
                    continue
                found = -1
                for i in range(nh):
                    b = hits[i]
                    for j in range(4):
                        c = b if j == 0 else nb[b, j - 1]
                        if c < 0:
                            continue
                        n, area, tol = _overlap(xa, ta, an, xb, tb, c, tol_rel, pa, pb, buf0, buf1)
                        tested += 1
                        if area > tol_rel * min(areas_a[an], areas_b[c]):
                            found = c
                            break
                    if found >= 0:
                        break
                if found >= 0:
                    seed[an] = found
                    state[an] = 1
                    queue_a[tail] = an
                    tail += 1
        # front exhausted: restart from any facet of A not reached yet
        restarted = False
        while next_unseen < nA and not restarted:
            a = next_unseen
            next_unseen += 1
            if state[a] != 0:
                continue
            for c in range(nB):
                n, area, tol = _overlap(xa, ta, a, xb, tb, c, tol_rel, pa, pb, buf0, buf1)
                tested += 1
                if area > tol_rel * min(areas_a[a], areas_b[c]):
                    seed[a] = c
                    state[a] = 1
                    queue_a[tail] = a
                    tail += 1
                    restarted = True
                    break
            if not restarted:
                state[a] = 2
        if not restarted:
            break
    return count, cells, par_a, par_b, sliver, tested


@njit
def locate_points_jit(x, tris, cell_start, cell_items, origin, inv_h, nx, ny, pts, tol):
    npts = pts.shape[0]
    found = np.full(npts, -1, np.int64)
    bary = np.zeros((npts, 3))
    for p in range(npts):
        px, py = pts[p, 0], pts[p, 1]
        ix = min(max(int((px - origin[0]) * inv_h[0]), 0), nx - 1)
        iy = min(max(int((py - origin[1]) * inv_h[1]), 0), ny - 1)
        cell = iy * nx + ix
        best = -np.inf
        for s in range(cell_start[cell], cell_start[cell + 1]):
            f = cell_items[s]
            x0, y0 = x[tris[f, 0], 0], x[tris[f, 0], 1]
            x1, y1 = x[tris[f, 1], 0], x[tris[f, 1], 1]
            x2, y2 = x[tris[f, 2], 0], x[tris[f, 2], 1]
            area = _tri_area(x0, y0, x1, y1, x2, y2)
            l0 = _tri_area(px, py, x1, y1, x2, y2) / area
            l1 = _tri_area(x0, y0, px, py, x2, y2) / area
            l2 = 1.0 - l0 - l1
            worst = min(l0, min(l1, l2))
            if worst > best:
                best = worst
                found[p] = f
                bary[p, 0], bary[p, 1], bary[p, 2] = l0, l1, l2
            if worst >= 0.0:
                break
        if best < -tol:
            found[p] = -1
    return found, bary


@njit
def clip_segments_jit(x, tris, cell_start, cell_items, origin, inv_h, nx, ny, p0, p1, tol):
    nseg = p0.shape[0]
    cap = 16 * nseg + 16
    seg = np.empty(cap, np.int64)
    fac = np.empty(cap, np.int64)
    t0s = np.empty(cap)
    t1s = np.empty(cap)
    count = 0
    stamp = np.full(tris.shape[0], -1, np.int64)
    for s in range(nseg):
        ax, ay, bx, by = p0[s, 0], p0[s, 1], p1[s, 0], p1[s, 1]
        ix0 = min(max(int((min(ax, bx) - origin[0]) * inv_h[0]), 0), nx - 1)
        ix1 = min(max(int((max(ax, bx) - origin[0]) * inv_h[0]), 0), nx - 1)
        iy0 = min(max(int((min(ay, by) - origin[1]) * inv_h[1]), 0), ny - 1)
        iy1 = min(max(int((max(ay, by) - origin[1]) * inv_h[1]), 0), ny - 1)
        for iy in range(iy0, iy1 + 1):
            for ix in range(ix0, ix1 + 1):
                cell = iy * nx + ix
                for q in range(cell_start[cell], cell_start[cell + 1]):
                    f = cell_items[q]
                    if stamp[f] == s:
                        continue
                    stamp[f] = s
                    lo, hi = 0.0, 1.0
                    for k in range(3):
                        cx, cy = x[tris[f, k], 0], x[tris[f, k], 1]
                        ex = x[tris[f, (k + 1) % 3], 0] - cx
                        ey = x[tris[f, (k + 1) % 3], 1] - cy
                        length = math.sqrt(ex * ex + ey * ey)
                        g0 = (ex * (ay - cy) - ey * (ax - cx)) / length + tol * length
                        g1 = (ex * (by - cy) - ey * (bx - cx)) / length + tol * length
                        if g0 < 0.0 and g1 < 0.0:
                            lo, hi = 1.0, 0.0
                            break
                        if g0 < 0.0:
                            lo = max(lo, g0 / (g0 - g1))
                        elif g1 < 0.0:
                            hi = min(hi, g0 / (g0 - g1))
                    if hi - lo > tol:
                        if count >= cap:
                            return -1, seg, fac, t0s, t1s
                        seg[count] = s
                        fac[count] = f
                        t0s[count] = lo
                        t1s[count] = hi
                        count += 1
    return count, seg, fac, t0s, t1s


# ---------------------------------------------------------------------------
# vectorized numpy versions

def clip_tri_tri_numpy(PA, PB, tol):
    """Batch Sutherland-Hodgman clip; returns ``(poly (K, MAXV, 2), n (K,))``."""
    K = len(PA)
    rows = np.arange(K)
    poly = np.zeros((K, MAXV, 2))
    poly[:, :3] = PA
    n = np.full(K, 3)
    for k in range(3):
        c0 = PB[:, k]
        e = PB[:, (k + 1) % 3] - c0
        length = np.hypot(e[:, 0], e[:, 1])
        s = (e[:, None, 0] * (poly[..., 1] - c0[:, None, 1])
             - e[:, None, 1] * (poly[..., 0] - c0[:, None, 0])) / length[:, None]
        out = np.zeros_like(poly)
        m = np.zeros(K, dtype=np.int64)
        for i in range(MAXV // 2):
            active = i < n
            prev = np.where(i == 0, n - 1, i - 1).clip(0)
            p, sp = poly[rows, prev], s[rows, prev]
            c, sc = poly[:, i], s[:, i]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = sp / (sp - sc)
                cross_pt = p + t[:, None] * (c - p)
            for mask, value in (
                (active & (sc >= -tol) & (sp < -tol), cross_pt),
                (active & (sc >= -tol), c),
                (active & (sc < -tol) & (sp > tol), cross_pt),
            ):
                out[rows[mask], m[mask]] = value[mask]
                m += mask
        poly, n = out, m
    return _tidy_numpy(poly, n, PA, PB, tol)


def _compact(poly, keep):
    idx = np.cumsum(keep, axis=1) - 1
    out = np.zeros_like(poly)
    r, c = np.nonzero(keep)
    out[r, idx[r, c]] = poly[r, c]
    return out, keep.sum(axis=1)


def _tidy_numpy(poly, n, PA, PB, tol):
    K = len(poly)
    slots = np.arange(MAXV)[None, :]
    valid = slots < n[:, None]
    tol2 = tol[:, None]
    for q in np.concatenate([PA, PB], axis=1).transpose(1, 0, 2):
        close = (np.abs(poly - q[:, None, :]) <= tol2[..., None]).all(axis=2) & valid
        poly[close] = np.repeat(q[:, None, :], MAXV, axis=1)[close]
    # repeated points, cyclically
    prev = np.roll(poly, 1, axis=1)
    last = poly[np.arange(K), (n - 1).clip(0)]
    prev[:, 0] = last
    dup = (np.abs(poly - prev) <= tol2[..., None]).all(axis=2) & valid & (n[:, None] > 1)
    poly, n = _compact(poly, valid & ~dup)
    for _ in range(MAXV):
        valid = slots < n[:, None]
        nn = n.clip(1)[:, None]
        a = poly[np.arange(K)[:, None], (slots - 1) % nn]
        b = poly[np.arange(K)[:, None], (slots + 1) % nn]
        d = b - a
        length = np.hypot(d[..., 0], d[..., 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            dist = np.abs(d[..., 0] * (poly[..., 1] - a[..., 1])
                          - d[..., 1] * (poly[..., 0] - a[..., 0])) / length
        dist[length == 0] = 0.0
        flat = valid & (dist <= tol2) & (n[:, None] >= 3)
        if not flat.any():
            break
        # remove only the first flat vertex per polygon, as the sequential kernel does
        first = flat & (np.cumsum(flat, axis=1) == 1)
        poly, n = _compact(poly, valid & ~first)
    n = np.where(n < 3, 0, n)
    return poly, n


def poly_area_numpy(poly, n):
    valid = np.arange(MAXV)[None, :] < n[:, None]
    nxt = np.arange(MAXV)[None, :] + 1
    nxt = np.where(nxt >= n[:, None], 0, nxt)
    q = poly[np.arange(len(poly))[:, None], nxt]
    s = poly[..., 0] * q[..., 1] - q[..., 0] * poly[..., 1]
    return 0.5 * (s * valid).sum(axis=1)


def fan_numpy(poly, n):
    cells, owner = [], []
    for i in range(1, MAXV - 1):
        mask = i < n - 1
        tri = np.stack([poly[mask, 0], poly[mask, i], poly[mask, i + 1]], axis=1)
        area = 0.5 * ((tri[:, 1, 0] - tri[:, 0, 0]) * (tri[:, 2, 1] - tri[:, 0, 1])
                      - (tri[:, 1, 1] - tri[:, 0, 1]) * (tri[:, 2, 0] - tri[:, 0, 0]))
        keep = area > 0
        cells.append(tri[keep])
        owner.append(np.flatnonzero(mask)[keep])
    owner = np.concatenate(owner)
    order = np.argsort(owner, kind="stable")
    return np.concatenate(cells)[order], owner[order]


def locate_points_numpy(x, tris, cell_start, cell_items, origin, inv_h, nx, ny, pts, tol):
    ix = np.clip(((pts[:, 0] - origin[0]) * inv_h[0]).astype(np.int64), 0, nx - 1)
    iy = np.clip(((pts[:, 1] - origin[1]) * inv_h[1]).astype(np.int64), 0, ny - 1)
    cell = iy * nx + ix
    counts = cell_start[cell + 1] - cell_start[cell]
    owner = np.repeat(np.arange(len(pts)), counts)
    offsets = np.arange(len(owner)) - np.repeat(np.cumsum(counts) - counts, counts)
    cand = cell_items[cell_start[cell[owner]] + offsets]
    p = x[tris[cand]]
    q = pts[owner]
    area = _area_np(p[:, 0], p[:, 1], p[:, 2])
    l0 = _area_np(q, p[:, 1], p[:, 2]) / area
    l1 = _area_np(p[:, 0], q, p[:, 2]) / area
    lam = np.stack([l0, l1, 1.0 - l0 - l1], axis=1)
    worst = lam.min(axis=1)
    # best candidate per point: first one attaining the maximal containment
    order = np.lexsort((np.arange(len(owner)), -worst, owner))
    first = np.ones(len(order), dtype=bool)
    first[1:] = owner[order][1:] != owner[order][:-1]
    pick = order[first]
    found = np.full(len(pts), -1, dtype=np.int64)
    bary = np.zeros((len(pts), 3))
    found[owner[pick]] = cand[pick]
    bary[owner[pick]] = lam[pick]
    best = np.full(len(pts), -np.inf)
    best[owner[pick]] = worst[pick]
    found[best < -tol] = -1
    return found, bary


def _area_np(a, b, c):
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def clip_segments_numpy(x, tris, cell_start, cell_items, origin, inv_h, nx, ny, p0, p1, tol):
    seg, fac = [], []
    for s in range(len(p0)):
        lo = np.minimum(p0[s], p1[s])
        hi = np.maximum(p0[s], p1[s])
        ix = np.clip(((np.array([lo[0], hi[0]]) - origin[0]) * inv_h[0]).astype(int), 0, nx - 1)
        iy = np.clip(((np.array([lo[1], hi[1]]) - origin[1]) * inv_h[1]).astype(int), 0, ny - 1)
        cells = (np.arange(iy[0], iy[1] + 1)[:, None] * nx + np.arange(ix[0], ix[1] + 1)[None, :]).ravel()
        cand = np.unique(np.concatenate([cell_items[cell_start[c]:cell_start[c + 1]] for c in cells]))
        seg.append(np.full(len(cand), s))
        fac.append(cand)
    seg, fac = np.concatenate(seg), np.concatenate(fac)
    a, b = p0[seg], p1[seg]
    lo = np.zeros(len(seg))
    hi = np.ones(len(seg))
    empty = np.zeros(len(seg), dtype=bool)
    for k in range(3):
        c = x[tris[fac, k]]
        e = x[tris[fac, (k + 1) % 3]] - c
        length = np.hypot(e[:, 0], e[:, 1])
        g0 = (e[:, 0] * (a[:, 1] - c[:, 1]) - e[:, 1] * (a[:, 0] - c[:, 0])) / length + tol * length
        g1 = (e[:, 0] * (b[:, 1] - c[:, 1]) - e[:, 1] * (b[:, 0] - c[:, 0])) / length + tol * length
        empty |= (g0 < 0) & (g1 < 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = g0 / (g0 - g1)
        lo = np.where((g0 < 0) & ~empty, np.maximum(lo, t), lo)
        hi = np.where((g0 >= 0) & (g1 < 0) & ~empty, np.minimum(hi, t), hi)
    keep = ~empty & (hi - lo > tol)
    return int(keep.sum()), seg[keep], fac[keep], lo[keep], hi[keep]


# ---------------------------------------------------------------------------
# dispatch

def use_numba():
    return _jit.USE_NUMBA


def locate_points(*args):
    fn = locate_points_jit if use_numba() else locate_points_numpy
    return fn(*args)


def clip_segments(*args):
    fn = clip_segments_jit if use_numba() else clip_segments_numpy
    return fn(*args)
