"""Structured grids on a bounding box and their clipping against a domain SDF."""

from __future__ import annotations

import numpy as np
import shapely
from scipy.optimize import brentq

from polypde.domains import Domain, MirrorCircle
from polypde.mesh import merge_close_vertices, polygon_area

# curved walls are sampled at this fraction of the cell size
ARC_SPACING = 0.25


def grid_vertices(domain: Domain, nx: int, ny: int) -> tuple[np.ndarray, np.ndarray]:
    """Vertices of the ``nx x ny`` grid on the bbox and their ``(u, v)`` in [0,1]^2."""
    u, v = np.meshgrid(np.arange(nx + 1) / nx, np.arange(ny + 1) / ny, indexing="xy")
    uv = np.stack([u.ravel(), v.ravel()], axis=1)
    return uv_to_xy(domain, uv), uv


def uv_to_xy(domain: Domain, uv: np.ndarray) -> np.ndarray:
    x0, y0, x1, y1 = domain.bbox
    return np.stack([x0 + (x1 - x0) * uv[:, 0], y0 + (y1 - y0) * uv[:, 1]], axis=1)


def grid_quads(nx: int, ny: int) -> np.ndarray:
    """Row-major CCW quads ``(nx*ny, 4)`` over the ``(nx+1)*(ny+1)`` grid vertices."""
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    a = (j * (nx + 1) + i).ravel()
    return np.stack([a, a + 1, a + nx + 2, a + nx + 1], axis=1)


def hole_circles(domain: Domain):
    return [(np.asarray(m.center, float), m.radius) for m in domain.mirrors if isinstance(m, MirrorCircle) and m.hole]


def rect_meets_circle(lo, hi, center, radius) -> bool:
    q = np.clip(center, lo, hi)
    return float(np.hypot(*(q - center))) < radius


def _edge_roots(domain: Domain, a: np.ndarray, b: np.ndarray, tol: float, m: int = 8) -> list:
    """All SDF sign changes on the open segment ``a -> b``, ordered from ``a``.

    Samples are taken in a canonical direction so both cells sharing the edge
    find the same points; this also catches arcs bulging past an edge whose
    two ends lie on the same side.
    """
    flip = (a[0], a[1]) > (b[0], b[1])
    p, q = (b, a) if flip else (a, b)
    d = q - p
    t = np.linspace(0.0, 1.0, m + 1)
    f = domain.sdf(p + t[:, None] * d)
    out_ = f > tol
    out = []
    for k in np.flatnonzero(out_[1:] != out_[:-1]):
        # exact root when both sides are clear of the wall, else the edge of the tolerance band
        lvl = 0.0 if min(f[k], f[k + 1]) < -tol else 0.5 * tol
        g = lambda u: domain.sdf(p + u * d) - lvl
        u = brentq(g, t[k], t[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        if 0.0 < u < 1.0:
            out.append(u)
    pts = [p + u * d for u in out]
    return pts[::-1] if flip else pts


def clip_loop(domain: Domain, xy: np.ndarray, s: np.ndarray, tol: float) -> np.ndarray:
    """Part of polygon ``xy`` with ``sdf <= tol`` by marching along its edges.

    ``s`` holds the SDF at the vertices. Crossing points are exact roots of the
    SDF on each edge; the cut between two crossings is the straight chord.
    """
    out = []
    k = len(xy)
    for i in range(k):
        j = (i + 1) % k
        if s[i] <= tol:
            out.append(xy[i])
        out.extend(_edge_roots(domain, xy[i], xy[j], tol))
    return np.array(out).reshape(-1, 2)


def _exact_cut(xy: np.ndarray, outline) -> list:
    g = shapely.Polygon(xy).intersection(outline)
    parts = [g] if g.geom_type == "Polygon" else [p for p in getattr(g, "geoms", []) if p.geom_type == "Polygon"]
    out = []
    for p in parts:
        if p.is_empty or p.area <= 0:
            continue
        p = shapely.geometry.polygon.orient(p, 1.0)
        out.append(np.asarray(p.exterior.coords)[:-1])
    return out


def _union_loops(a: np.ndarray, b: np.ndarray):
    """Union of two cells given as vertex-index loops sharing a connected edge chain."""
    succ = {}
    pairs = set()
    for loop in (a, b):
        for i in range(len(loop)):
            pairs.add((int(loop[i]), int(loop[(i + 1) % len(loop)])))
    for u, v in pairs:
        if (v, u) in pairs:
            continue
        if u in succ:
            return None
        succ[u] = v
    if not succ:
        return None
    start = int(a[0]) if int(a[0]) in succ else next(iter(succ))
    out = [start]
    cur = succ[start]
    while cur != start:
        out.append(cur)
        if cur not in succ or len(out) > len(succ):
            return None
        cur = succ[cur]
    if len(out) != len(succ):
        return None
    return np.array(out, dtype=np.int64)


def merge_slivers(vertices: np.ndarray, cells: list, min_area: float):
    """Merge cells smaller than ``min_area`` into the neighbour sharing their longest edge."""
    cells = [np.asarray(c, dtype=np.int64) for c in cells]
    alive = [True] * len(cells)
    areas = [polygon_area(vertices[c]) for c in cells]
    edge_owner: dict = {}
    for ci, c in enumerate(cells):
        for i in range(len(c)):
            edge_owner.setdefault(frozenset((int(c[i]), int(c[(i + 1) % len(c)]))), set()).add(ci)
    for ci in np.argsort(areas, kind="stable"):
        if areas[ci] >= min_area or not alive[ci]:
            continue
        c = cells[ci]
        shared: dict = {}
        for i in range(len(c)):
            u, v = int(c[i]), int(c[(i + 1) % len(c)])
            for nb in edge_owner.get(frozenset((u, v)), ()):
                if nb != ci and alive[nb]:
                    shared[nb] = shared.get(nb, 0.0) + float(np.linalg.norm(vertices[u] - vertices[v]))
        for nb in sorted(shared, key=lambda k: (-shared[k], k)):
            u = _union_loops(cells[nb], c)
            if u is None:
                continue
            for loop in (cells[nb], c):
                for i in range(len(loop)):
                    edge_owner[frozenset((int(loop[i]), int(loop[(i + 1) % len(loop)])))].discard(
                        ci if loop is c else nb
                    )
            cells[nb] = u
            areas[nb] = polygon_area(vertices[u])
            for i in range(len(u)):
                edge_owner.setdefault(frozenset((int(u[i]), int(u[(i + 1) % len(u)]))), set()).add(nb)
            alive[ci] = False
            break
    return [c for c, ok in zip(cells, alive) if ok]


def _remove_collinear_spurs(vertices: np.ndarray, cells: list) -> list:
    """Drop back-and-forth spikes left by merging (vertex whose neighbours coincide)."""
    out = []
    for c in cells:
        c = list(c)
        changed = True
        while changed and len(c) >= 3:
            changed = False
            for i in range(len(c)):
                if c[i - 1] == c[(i + 1) % len(c)]:
                    j = (i + 1) % len(c)
                    for idx in sorted({i, j}, reverse=True):
                        del c[idx]
                    changed = True
                    break
        out.append(np.array(c, dtype=np.int64))
    return out


def arc_count(radius: float, span: float, spacing: float) -> int:
    """Lattice intervals on an arc; full circles use a multiple of 4 so quarter points are hit."""
    if span >= 2 * np.pi - 1e-12:
        return 4 * max(1, int(np.ceil(radius * span / (4 * spacing))))
    return max(1, int(np.ceil(radius * span / spacing)))


def lattice_region(domain: Domain, spacing: float):
    """The domain as a shapely polygon with circles sampled on the arc lattice."""
    if domain.outline is not None:
        return shapely.Polygon(domain.outline)
    x0, y0, x1, y1 = domain.bbox
    g = shapely.box(x0, y0, x1, y1)
    for m in domain.mirrors:
        if not isinstance(m, MirrorCircle):
            continue
        n = arc_count(m.radius, 2 * np.pi, spacing)
        t = 2 * np.pi * np.arange(n) / n
        circ = shapely.Polygon(np.asarray(m.center, float) + m.radius * np.c_[np.cos(t), np.sin(t)])
        g = g.difference(circ) if m.hole else g.intersection(circ)
    return g


def _edges_inside(domain: Domain, vertices: np.ndarray, cells: list, s_all: np.ndarray, tol: float, m: int = 8):
    """Cells whose edge samples (as used by the clipper) all lie strictly inside."""
    ok = np.array([(s_all[c] <= -tol).all() for c in cells])
    ids = np.flatnonzero(ok)
    if len(ids) == 0:
        return ok
    a = np.concatenate([vertices[cells[i]] for i in ids])
    b = np.concatenate([np.roll(vertices[cells[i]], -1, 0) for i in ids])
    owner = np.repeat(ids, [len(cells[i]) for i in ids])
    t = np.linspace(0.0, 1.0, m + 1)[1:-1]
    f = domain.sdf((a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]).reshape(-1, 2)).reshape(len(a), -1)
    bad = np.unique(owner[(f > tol).any(axis=1)])
    ok[bad] = False
    return ok


def clip_cells(domain: Domain, vertices: np.ndarray, cells: list, keep_mask=None, min_area: float = 0.0, spacing=None):
    """Clip cells (index loops over ``vertices``) to the domain.

    Cells flagged in ``keep_mask`` are known to lie inside and are passed
    through. With ``spacing`` curved walls are cut exactly against the arc
    lattice polygon (see ``lattice_region``), which also splits cells that a
    wall cuts in two; otherwise they are marched on the SDF. Returns merged
    ``(vertices, cells)``; slivers below ``min_area`` join a neighbour.
    """
    tol = domain.boundary_tol
    mtol = 1e-9 * domain.diagonal
    s_all = domain.sdf(vertices)
    loops = []
    outline = None
    if domain.outline is not None or spacing is not None:
        outline = lattice_region(domain, spacing)
    inside = _edges_inside(domain, vertices, cells, s_all, tol) if outline is None else None
    for ci, c in enumerate(cells):
        xy = vertices[c]
        if (keep_mask is not None and keep_mask[ci]) or outline is None and inside[ci]:
            loops.append(xy)
        elif outline is not None:
            loops.extend(_exact_cut(xy, outline))
        else:
            loops.append(clip_loop(domain, xy, s_all[c], tol))
    loops = [xy for xy in loops if len(xy) >= 3 and polygon_area(xy) > 0]
    sizes = [len(x) for x in loops]
    flat = np.concatenate(loops)
    offs = np.concatenate([[0], np.cumsum(sizes)])
    idx = [np.arange(offs[i], offs[i + 1]) for i in range(len(loops))]
    verts, idx = merge_close_vertices(flat, idx, mtol)
    if min_area > 0:
        idx = merge_slivers(verts, idx, min_area)
        idx = _remove_collinear_spurs(verts, idx)
        idx = [c for c in idx if len(c) >= 3]
        verts, idx = merge_close_vertices(verts, idx, 0.0)
    return verts, idx


def _min_angle(xy: np.ndarray, tris: np.ndarray) -> float:
    t = xy[tris]
    e = np.roll(t, -1, axis=1) - t
    u, w = e, -np.roll(e, 1, axis=1)
    cr = np.abs(u[..., 0] * w[..., 1] - u[..., 1] * w[..., 0])
    return float(np.arctan2(cr, (u * w).sum(-1)).min())


def _rotate_for_earclip(loop: list, verts: np.ndarray) -> list:
    """Start the loop where index-order ear clipping gives the widest minimum angle."""
    from polypde.triangulate import TriangulationError, earclip_cell

    best, score = loop, -1.0
    for r in range(len(loop)):
        cand = loop[r:] + loop[:r]
        try:
            q = _min_angle(verts[cand], earclip_cell(verts[cand]))
        except TriangulationError:
            continue
        if q > score + 1e-12:
            best, score = cand, q
    return best


def refine_arcs(mesh, domain: Domain, spacing: float):
    """Insert vertices on curved walls at a fixed angular lattice of about ``spacing``.

    Each boundary chord whose ends lie on the same arc gains the lattice points
    strictly between them (points within ``0.3 * spacing`` of an end are
    skipped). Triangles are re-split by ear clipping so they stay triangles; other
    cells take the extra vertices, with the loop start chosen so a later ear clip
    avoids slivers between neighbouring lattice points.
    """
    from polypde.domains import Arc
    from polypde.mesh import build_mesh, is_simple
    from polypde.triangulate import earclip_cell

    arcs = [a for a in domain.pieces if isinstance(a, Arc)]
    if not arcs or spacing <= 0:
        return mesh
    v = mesh.vertices
    tol = 1e-6 * domain.diagonal
    extra = []
    new_pts: dict = {}
    for u, w in np.asarray(mesh.boundary_edges, dtype=np.int64):
        for arc in arcs:
            c = np.asarray(arc.center, float)
            ru, rw = np.hypot(*(v[u] - c)), np.hypot(*(v[w] - c))
            if abs(ru - arc.radius) > tol or abs(rw - arc.radius) > tol:
                continue
            span = arc.t1 - arc.t0
            n = arc_count(arc.radius, span, spacing)
            step = span / n
            tu = np.mod(np.arctan2(*(v[u] - c)[::-1]) - arc.t0, 2 * np.pi)
            tw = np.mod(np.arctan2(*(v[w] - c)[::-1]) - arc.t0, 2 * np.pi)
            d = np.mod(tw - tu, 2 * np.pi)
            if d > np.pi:
                d -= 2 * np.pi
            lo, hi = sorted((tu, tu + d))
            k = np.arange(np.floor(lo / step) + 1, np.ceil(hi / step))
            th = k * step
            th = th[(th - lo > 0.3 * step) & (hi - th > 0.3 * step)]
            if len(th) == 0:
                break
            if d < 0:
                th = th[::-1]
            th = th + arc.t0
            ids = len(v) + len(extra) + np.arange(len(th))
            extra.extend(c + arc.radius * np.c_[np.cos(th), np.sin(th)])
            new_pts[(int(u), int(w))] = ids
            new_pts[(int(w), int(u))] = ids[::-1]
            break
    if not new_pts:
        return mesh
    verts = np.vstack([v, np.asarray(extra)])
    cells = []
    for cl in mesh.cells:
        cl = [int(i) for i in cl]
        k = len(cl)
        hit = {i: new_pts[(cl[i], cl[(i + 1) % k])] for i in range(k) if (cl[i], cl[(i + 1) % k]) in new_pts}
        loop = cl
        if hit:
            loop = []
            for i in range(k):
                loop.append(cl[i])
                loop.extend(int(j) for j in hit.get(i, ()))
            # a concave wall can cut through a thin cell; keep the chord there
            if not is_simple(verts[loop]) or polygon_area(verts[loop]) <= 0:
                loop = cl
            else:
                loop = _rotate_for_earclip(loop, verts)
        if k == 3 and len(loop) > 3:
            loc = earclip_cell(verts[loop])
            cells.extend(np.asarray(loop)[t] for t in loc)
        else:
            cells.append(np.array(loop))
    return build_mesh(verts, cells, domain, mesh.provenance)
