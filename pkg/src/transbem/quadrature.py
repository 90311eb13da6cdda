"""Quadrature on triangles and on singular triangle pairs.

Triangle rules are expressed on the barycentric simplex. Singular pair rules
use the reference triangle ``{(x1, x2): 0 <= x2 <= x1 <= 1}`` mapped to a
physical triangle ``P0, P1, P2`` by ``P0 + x1 (P1 - P0) + x2 (P2 - P1)``,
i.e. barycentric coordinates ``(1 - x1, x1 - x2, x2)``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureConfig:
    """Orders used during boundary operator assembly.

    ``regular_order`` is the number of points per triangle for well separated
    pairs; pairs closer than ``near_threshold`` times the local mesh width use
    ``near_order`` points. ``singular_order`` is the 1D Gauss order of the
    tensor rules on the four-dimensional cube.
    """

    regular_order: int = 6
    singular_order: int = 4
    near_threshold: float = 2.0
    near_order: int = 12

    def __post_init__(self):
        if min(self.regular_order, self.singular_order, self.near_order) < 1:
            raise ValueError("quadrature orders must be >= 1")


def _perm3(a, b):
    return [(a, a, b), (a, b, a), (b, a, a)]


def _perm6(a, b, c):
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


# Symmetric rules: (barycentric points, weights summing to one)
def _symmetric_rule(n):
    if n == 1:
        pts, w = [(1 / 3, 1 / 3, 1 / 3)], [1.0]
    elif n == 3:
        pts, w = _perm3(1 / 6, 2 / 3), [1 / 3] * 3
    elif n == 6:
        a1, w1 = 0.445948490915965, 0.223381589678011
        a2, w2 = 0.091576213509771, 0.109951743655322
        pts = _perm3(a1, 1 - 2 * a1) + _perm3(a2, 1 - 2 * a2)
        w = [w1] * 3 + [w2] * 3
    elif n == 7:
        a1, w1 = 0.470142064105115, 0.132394152788506
        a2, w2 = 0.101286507323456, 0.125939180544827
        pts = [(1 / 3, 1 / 3, 1 / 3)] + _perm3(a1, 1 - 2 * a1) + _perm3(a2, 1 - 2 * a2)
        w = [0.225] + [w1] * 3 + [w2] * 3
    elif n == 12:
        a1, w1 = 0.249286745170910, 0.116786275726379
        a2, w2 = 0.063089014491502, 0.050844906370207
        b, c, w3 = 0.053145049844817, 0.310352451033784, 0.082851075618374
        pts = _perm3(a1, 1 - 2 * a1) + _perm3(a2, 1 - 2 * a2) + _perm6(b, c, 1 - b - c)
        w = [w1] * 3 + [w2] * 3 + [w3] * 6
    else:
        return None
    return np.array(pts, dtype=np.float64), np.array(w, dtype=np.float64)


def _collapsed_gauss_rule(n_1d):
    x, w = np.polynomial.legendre.leggauss(n_1d)
    x = 0.5 * (x + 1)
    w = 0.5 * w
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    # Duffy collapse of the square onto the simplex.
    l1 = u.ravel()
    l2 = (v * (1 - u)).ravel()
    weights = 2.0 * (wu * wv * (1 - u)).ravel()
    return np.stack([1 - l1 - l2, l1, l2], axis=1), weights


@lru_cache(maxsize=None)
def triangle_rule(n_points: int):
    """Barycentric points ``(n, 3)`` and weights ``(n,)`` summing to one.

    Exact symmetric rules exist for 1, 3, 6, 7 and 12 points (degrees 1, 2,
    4, 5 and 6). Square numbers beyond that fall back to a collapsed Gauss
    product rule.
    """
    rule = _symmetric_rule(n_points)
    if rule is None:
        root = int(round(np.sqrt(n_points)))
        if root * root != n_points:
            raise ValueError(f"no {n_points}-point triangle rule available")
        rule = _collapsed_gauss_rule(root)
    pts, w = rule
    pts.setflags(write=False)
    w.setflags(write=False)
    return pts, w


def gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


COINCIDENT, EDGE, VERTEX = 3, 2, 1


@lru_cache(maxsize=None)
def singular_rule(n_shared: int, order: int):
    """Sauter-Schwab rule for a pair sharing ``n_shared`` vertices.

    Returns ``(x, y, w)``: reference points ``(m, 2)`` on the test and trial
    triangle and weights ``(m,)``. The shared vertices must be listed first
    and in the same order in both triangles. Weights integrate over the
    reference pair, whose measure is 1/4.
    """
    g, gw = gauss01(order)
    xi, e1, e2, e3 = (a.ravel() for a in np.meshgrid(g, g, g, g, indexing="ij"))
    w4 = np.prod(np.stack(np.meshgrid(gw, gw, gw, gw, indexing="ij")), axis=0).ravel()

    xs, ys, ws = [], [], []

    def add(x1, x2, y1, y2, jac):
        xs.append(np.stack([x1, x2], axis=1))
        ys.append(np.stack([y1, y2], axis=1))
        ws.append(w4 * jac)

    if n_shared == COINCIDENT:
        jac = xi**3 * e1**2 * e2
        a = xi
        add(a, a * (1 - e1 + e1 * e2), a * (1 - e1 * e2 * e3), a * (1 - e1), jac)
        add(a * (1 - e1 * e2 * e3), a * (1 - e1), a, a * (1 - e1 + e1 * e2), jac)
        add(a, a * e1 * (1 - e2 + e2 * e3), a * (1 - e1 * e2), a * e1 * (1 - e2), jac)
        add(a * (1 - e1 * e2), a * e1 * (1 - e2), a, a * e1 * (1 - e2 + e2 * e3), jac)
        add(a * (1 - e1 * e2 * e3), a * e1 * (1 - e2 * e3), a, a * e1 * (1 - e2), jac)
        add(a, a * e1 * (1 - e2), a * (1 - e1 * e2 * e3), a * e1 * (1 - e2 * e3), jac)
    elif n_shared == EDGE:
        a = xi
        add(a, a * e1 * e3, a * (1 - e1 * e2), a * e1 * (1 - e2), xi**3 * e1**2)
        jac = xi**3 * e1**2 * e2
        add(a, a * e1, a * (1 - e1 * e2 * e3), a * e1 * e2 * (1 - e3), jac)
        add(a * (1 - e1 * e2), a * e1 * (1 - e2), a, a * e1 * e2 * e3, jac)
        add(a * (1 - e1 * e2 * e3), a * e1 * e2 * (1 - e3), a, a * e1, jac)
        add(a * (1 - e1 * e2 * e3), a * e1 * (1 - e2 * e3), a, a * e1 * e2, jac)
    elif n_shared == VERTEX:
        jac = xi**3 * e2
        add(xi, xi * e1, xi * e2, xi * e2 * e3, jac)
        add(xi * e2, xi * e2 * e1, xi, xi * e3, jac)
    else:
        raise ValueError("n_shared must be 1, 2 or 3")

    x = np.concatenate(xs)
    y = np.concatenate(ys)
    w = np.concatenate(ws)
    for arr in (x, y, w):
        arr.setflags(write=False)
    return x, y, w


def reference_to_barycentric(p):
    """Map reference points ``(m, 2)`` to barycentric coordinates ``(m, 3)``."""
    return np.stack([1 - p[:, 0], p[:, 0] - p[:, 1], p[:, 1]], axis=1)
