"""Symmetric triangle rules and Gauss-Legendre line rules."""
import numpy as np

__all__ = ["triangle_rule", "line_rule", "quad_points"]

_A1, _W1 = 0.44594849091596488631832925388305, 0.22338158967801146569500700843312
_A2, _W2 = 0.091576213509770743459571463402202, 0.10995174365532186763832632490021


def _orbit(a):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


_RULES = {
    2: (np.array(_orbit(1.0 / 6.0)), np.full(3, 1.0 / 3.0)),
    4: (np.array(_orbit(_A1) + _orbit(_A2)), np.array([_W1] * 3 + [_W2] * 3)),
}


def triangle_rule(order):
    """Barycentric points and weights (summing to 1) exact to ``order``."""
    try:
        bary, w = _RULES[order]
    except KeyError:
        raise ValueError(f"unsupported triangle quadrature order {order}; use 2 or 4") from None
    return bary.copy(), w.copy()


def line_rule(npts):
    """Gauss-Legendre nodes on [0, 1] with weights summing to 1."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def quad_points(vertices, order=4):
    """Physical points and weights for one triangle or a stack of them.

    ``vertices`` has shape (3, 2) or (K, 3, 2). Weights sum to the
    (unsigned) cell area.
    """
    v = np.asarray(vertices, dtype=float)
    single = v.ndim == 2
    v = v.reshape(-1, 3, 2)
    bary, w = triangle_rule(order)
    pts = np.einsum("qk,ckd->cqd", bary, v)
    d1, d2 = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]
    area = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    wts = area[:, None] * w[None, :]
    if single:
        return pts[0], wts[0]
    return pts, wts
