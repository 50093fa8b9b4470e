"""Quadrature rules and explicit shape functions.

Lagrange P1/P2 on triangles, and the generalised barycentric coordinates
of Wachspress (convex cells) and Floater's mean value coordinates (any
simple cell), with analytic gradients. Batched evaluators work on groups of
cells with the same vertex count: ``xy`` is ``(m, k, 2)``, points ``(m, q, 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from polypde.mesh import InvalidPolygonError, polygon_area, polygon_centroid


class BoundaryEvaluationError(ValueError):
    pass


class NonConvexCellError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (q, 2)
    weights: np.ndarray  # (q,)

    @property
    def area(self) -> float:
        return float(self.weights.sum())

    def integrate(self, f) -> float:
        return float(self.weights @ np.asarray(f(self.points), dtype=float))


@dataclass(frozen=True)
class BasisEval:
    values: np.ndarray  # (n,)
    gradients: np.ndarray  # (n, 2)


# ---------------------------------------------------------------------------
# triangle rules (symmetric Gauss; barycentric rows, area-fraction weights)
# ---------------------------------------------------------------------------


def _orbit3(a, w):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)], [w] * 3


def _orbit6(a, b, w):
    c = 1.0 - a - b
    return [(a, b, c), (b, a, c), (a, c, b), (c, a, b), (b, c, a), (c, b, a)], [w] * 6


def _rule(*orbits):
    pts, wts = [], []
    for p, w in orbits:
        pts += p
        wts += w
    return np.array(pts), np.array(wts)


_CENTROID = ([(1 / 3, 1 / 3, 1 / 3)], [1.0])

_DEG4 = _rule(
    _orbit3(0.44594849091596488632, 0.22338158967801146570),
    _orbit3(0.09157621350977074346, 0.10995174365532186764),
)

_TRIANGLE_RULES = {
    1: _rule(_CENTROID),
    2: _rule(_orbit3(1 / 6, 1 / 3)),
    3: _DEG4,
    4: _DEG4,
    5: _rule(
        ([(1 / 3, 1 / 3, 1 / 3)], [0.225]),
        _orbit3(0.47014206410511508977, 0.13239415278850618074),
        _orbit3(0.10128650732345633880, 0.12593918054482715260),
    ),
    6: _rule(
        _orbit3(0.24928674517091042129, 0.11678627572637936603),
        _orbit3(0.06308901449150222834, 0.050844906370206816921),
        _orbit6(0.053145049844816947353, 0.31035245103378440542, 0.082851075618373575194),
    ),
}

MAX_DEGREE = 6


@lru_cache(maxsize=None)
def _bary_rule(degree: int):
    if degree < 0 or degree > MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree} (0..{MAX_DEGREE})")
    bary, w = _TRIANGLE_RULES[max(degree, 1)]
    return bary, w


def triangle_quadrature(degree: int) -> QuadratureRule:
    """Rule on the reference triangle (0,0),(1,0),(0,1); weights sum to 1/2."""
    bary, w = _bary_rule(int(degree))
    return QuadratureRule(np.ascontiguousarray(bary[:, 1:]), 0.5 * w)


def map_triangle_rule(tri: np.ndarray, degree: int):
    """Physical points ``(..., q, 2)`` and weights ``(..., q)`` for triangles ``(..., 3, 2)``."""
    bary, w = _bary_rule(int(degree))
    pts = np.einsum("qi,...id->...qd", bary, tri)
    e1 = tri[..., 1, :] - tri[..., 0, :]
    e2 = tri[..., 2, :] - tri[..., 0, :]
    area = 0.5 * (e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0])
    return pts, area[..., None] * w


# ---------------------------------------------------------------------------
# polygon sub-triangulations and rules
# ---------------------------------------------------------------------------


def _fan_ok(xy: np.ndarray, c: np.ndarray) -> np.ndarray:
    a = xy - c[..., None, :]
    b = np.roll(xy, -1, axis=-2) - c[..., None, :]
    cr = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    scale = (a**2).sum(-1).max(-1)
    return (cr > 1e-10 * scale[..., None]).all(-1)


def cell_subtriangles(xy: np.ndarray) -> np.ndarray:
    """Sub-triangles ``(t, 3, 2)`` of one cell: centroid fan when valid, else a CDT."""
    xy = np.asarray(xy, dtype=float)
    c = polygon_centroid(xy)
    if _fan_ok(xy, c):
        return np.stack([np.broadcast_to(c, xy.shape), xy, np.roll(xy, -1, axis=0)], axis=1)
    from polypde.triangulate import earclip_cell

    return xy[earclip_cell(xy)]


def polygon_quadrature(cell, degree: int) -> QuadratureRule:
    xy = np.asarray(cell, dtype=float)
    if len(xy) < 3 or polygon_area(xy) <= 0:
        raise InvalidPolygonError("degenerate polygon")
    pts, w = map_triangle_rule(cell_subtriangles(xy), degree)
    return QuadratureRule(pts.reshape(-1, 2), w.ravel())


@dataclass
class CellBatch:
    """Cells sharing one sub-triangulation layout."""

    ids: np.ndarray  # (m,) cell indices
    loops: np.ndarray  # (m, k) vertex indices
    xy: np.ndarray  # (m, k, 2)
    points: np.ndarray  # (m, q, 2)
    weights: np.ndarray  # (m, q)


def split4(tri: np.ndarray) -> np.ndarray:
    """Midpoint subdivision of ``(t, 3, 2)`` triangles into ``(4t, 3, 2)``."""
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    parts = [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    return np.stack([np.stack(p, axis=1) for p in parts], axis=1).reshape(-1, 3, 2)


def cell_batches(mesh, degree: int, refine=None) -> list[CellBatch]:
    """Quadrature for every cell, grouped for vectorised evaluation.

    Within each vertex-count group, star-shaped cells (w.r.t. the centroid)
    share a centroid fan; the rest are triangulated individually. Cells listed
    in ``refine`` get every sub-triangle split into four.
    """
    out = []
    v = mesh.vertices
    cen = mesh.cell_centroids
    marked = np.zeros(mesh.n_cells, dtype=bool)
    if refine is not None:
        marked[np.asarray(refine, dtype=np.int64)] = True
    for k, (ids, loops) in mesh.groups.items():
        xy = v[loops]
        c = cen[ids]
        ok = np.ones(len(ids), dtype=bool) if k == 3 else _fan_ok(xy, c)
        fast = ok & ~marked[ids]
        if fast.any():
            sub = xy[fast]
            if k == 3:
                tri = sub[:, None]
            else:
                cc = np.broadcast_to(c[fast][:, None, :], sub.shape)
                tri = np.stack([cc, sub, np.roll(sub, -1, axis=1)], axis=2)  # (m, k, 3, 2)
            pts, w = map_triangle_rule(tri, degree)
            m = len(sub)
            out.append(CellBatch(ids[fast], loops[fast], sub, pts.reshape(m, -1, 2), w.reshape(m, -1)))
        for j in np.flatnonzero(~fast):
            tri = xy[j][None] if k == 3 else cell_subtriangles(xy[j])
            if marked[ids[j]]:
                tri = split4(tri)
            pts, w = map_triangle_rule(tri, degree)
            out.append(CellBatch(ids[j : j + 1], loops[j : j + 1], xy[j : j + 1], pts.reshape(1, -1, 2), w.reshape(1, -1)))
    return out


# ---------------------------------------------------------------------------
# Lagrange
# ---------------------------------------------------------------------------


def p1_gradients(tri: np.ndarray):
    """Constant gradients ``(..., 3, 2)`` of the areal coordinates and the areas."""
    x, y = tri[..., 0], tri[..., 1]
    b = np.stack([y[..., 1] - y[..., 2], y[..., 2] - y[..., 0], y[..., 0] - y[..., 1]], axis=-1)
    c = np.stack([x[..., 2] - x[..., 1], x[..., 0] - x[..., 2], x[..., 1] - x[..., 0]], axis=-1)
    two_a = x[..., 0] * b[..., 0] + x[..., 1] * b[..., 1] + x[..., 2] * b[..., 2]
    g = np.stack([b, c], axis=-1) / two_a[..., None, None]
    return g, 0.5 * two_a


def areal_coordinates(tri: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Areal coordinates ``(..., q, 3)`` of points ``(..., q, 2)`` in triangles ``(..., 3, 2)``."""
    g, _ = p1_gradients(tri)
    lam = np.einsum("...qd,...id->...qi", x - tri[..., None, 0, :], g)
    lam[..., 0] = 1.0 - lam[..., 1] - lam[..., 2]
    return lam


def p2_values_gradients(lam: np.ndarray, g: np.ndarray):
    """P2 shape functions from areal coordinates ``(..., q, 3)`` and their gradients ``(..., 3, 2)``.

    Node order: three vertices, then midpoints of edges (0,1), (1,2), (2,0).
    """
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    val = np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0], -1)
    G = g[..., None, :, :]  # (..., 1, 3, 2)
    gl = [G[..., i, :] for i in range(3)]
    L = [lam[..., i, None] for i in range(3)]
    grad = np.stack(
        [
            (4 * L[0] - 1) * gl[0],
            (4 * L[1] - 1) * gl[1],
            (4 * L[2] - 1) * gl[2],
            4 * (L[0] * gl[1] + L[1] * gl[0]),
            4 * (L[1] * gl[2] + L[2] * gl[1]),
            4 * (L[2] * gl[0] + L[0] * gl[2]),
        ],
        axis=-2,
    )
    return val, grad


def lagrange_eval(order: int, triangle, x) -> BasisEval:
    tri = np.asarray(triangle, dtype=float).reshape(3, 2)
    if polygon_area(tri) <= 0:
        raise InvalidPolygonError("degenerate triangle")
    g, _ = p1_gradients(tri)
    lam = areal_coordinates(tri, np.asarray(x, dtype=float).reshape(1, 2))[0]
    if order == 1:
        return BasisEval(lam, g)
    if order == 2:
        val, grad = p2_values_gradients(lam[None, :], g)
        return BasisEval(val[0], grad[0])
    raise ValueError("Lagrange order must be 1 or 2")


# ---------------------------------------------------------------------------
# generalised barycentric coordinates (batched)
# ---------------------------------------------------------------------------


def _sides(xy: np.ndarray, x: np.ndarray):
    """``s_i = v_i - x`` and ``s_{i+1}`` for cells ``(m, k, 2)``, points ``(m, q, 2)``."""
    s = xy[:, None, :, :] - x[:, :, None, :]  # (m, q, k, 2)
    return s, np.roll(s, -1, axis=2)


def wachspress_batch(xy: np.ndarray, x: np.ndarray):
    """Values ``(m, q, k)`` and gradients ``(m, q, k, 2)`` of Wachspress coordinates."""
    s, sn = _sides(xy, x)
    A = 0.5 * (s[..., 0] * sn[..., 1] - s[..., 1] * sn[..., 0])  # A(x, v_i, v_{i+1})
    scale = (s**2).sum(-1).max(-1, keepdims=True)
    if (np.abs(A) <= 1e-14 * scale).any():
        raise BoundaryEvaluationError("Wachspress coordinates evaluated on a cell edge")
    vp, v0, vn = np.roll(xy, 1, axis=1), xy, np.roll(xy, -1, axis=1)
    C = 0.5 * ((v0[..., 0] - vp[..., 0]) * (vn[..., 1] - vp[..., 1]) - (v0[..., 1] - vp[..., 1]) * (vn[..., 0] - vp[..., 0]))
    # grad A_i with respect to x: 0.5 * (s_i,y - s_{i+1},y, s_{i+1},x - s_i,x), constant in x
    gA = 0.5 * np.stack([xy[..., 1] - vn[..., 1], vn[..., 0] - xy[..., 0]], axis=-1)  # (m, k, 2)
    Ap = np.roll(A, 1, axis=2)
    gAp = np.roll(gA, 1, axis=1)
    w = C[:, None, :] / (Ap * A)
    R = -(gAp[:, None] / Ap[..., None] + gA[:, None] / A[..., None])
    W = w.sum(-1, keepdims=True)
    lam = w / W
    grad = lam[..., None] * (R - (lam[..., None] * R).sum(-2, keepdims=True))
    return lam, grad


def mean_value_batch(xy: np.ndarray, x: np.ndarray):
    """Values ``(m, q, k)`` and gradients ``(m, q, k, 2)`` of mean value coordinates."""
    s, sn = _sides(xy, x)
    r = np.sqrt((s**2).sum(-1))
    if (r <= 1e-14 * r.max(-1, keepdims=True)).any():
        raise BoundaryEvaluationError("mean value coordinates evaluated at a vertex")
    rn = np.roll(r, -1, axis=2)
    A = 0.5 * (s[..., 0] * sn[..., 1] - s[..., 1] * sn[..., 0])
    D = (s * sn).sum(-1)
    Q = r * rn + D
    # x lies inside an edge when the angle it subtends is pi: sin = 0 with cos < 0
    if ((np.abs(2.0 * A) <= 1e-14 * (r * rn)) & (D < 0)).any():
        raise BoundaryEvaluationError("mean value coordinates evaluated on a cell edge")
    N = r * rn - D
    # tan(a/2) = sin/(1 + cos) = (1 - cos)/sin; take the form without cancellation
    wide = D < 0
    t = np.where(wide, N / np.where(wide, 2.0 * A, 1.0), 2.0 * A / np.where(wide, 1.0, Q))
    # gradients with respect to x (s depends on x with ds/dx = -I)
    gr = -s / r[..., None]
    grn = np.roll(gr, -1, axis=2)
    gA = 0.5 * np.stack([s[..., 1] - sn[..., 1], sn[..., 0] - s[..., 0]], axis=-1)
    gD = -(s + sn)
    grr = rn[..., None] * gr + r[..., None] * grn
    gQ = grr + gD
    gN = grr - gD
    A2 = np.where(wide, 2.0 * A, 1.0)[..., None]
    Qs = np.where(wide, 1.0, Q)[..., None]
    gt = np.where(
        wide[..., None],
        (gN * A2 - 2.0 * N[..., None] * gA) / A2**2,
        (2.0 * gA * Qs - 2.0 * A[..., None] * gQ) / Qs**2,
    )
    tp = np.roll(t, 1, axis=2)
    gtp = np.roll(gt, 1, axis=2)
    w = (tp + t) / r
    gw = (gtp + gt) / r[..., None] - ((tp + t) / r**2)[..., None] * gr
    W = w.sum(-1, keepdims=True)
    lam = w / W
    grad = (gw - lam[..., None] * gw.sum(-2, keepdims=True)) / W[..., None]
    return lam, grad


def _single(fn, cell, x):
    xy = np.asarray(cell, dtype=float)[None]
    lam, grad = fn(xy, np.asarray(x, dtype=float).reshape(1, 1, 2))
    return BasisEval(lam[0, 0], grad[0, 0])


def is_strictly_convex_loop(xy: np.ndarray, slack: float = 1e-12) -> bool:
    e1 = xy - np.roll(xy, 1, axis=0)
    e2 = np.roll(xy, -1, axis=0) - xy
    cr = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    return bool((cr > slack * np.sqrt((e1**2).sum(1) * (e2**2).sum(1))).all())


def wachspress(cell, x) -> BasisEval:
    xy = np.asarray(cell, dtype=float)
    if not is_strictly_convex_loop(xy):
        raise NonConvexCellError("Wachspress coordinates need a strictly convex cell")
    return _single(wachspress_batch, xy, x)


def mean_value(cell, x) -> BasisEval:
    return _single(mean_value_batch, cell, x)


GBC = {"MV": mean_value_batch, "WACHSPRESS": wachspress_batch}
