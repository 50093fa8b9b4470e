"""Polygonal to simplicial conversions.

* DT   Delaunay of the Voronoi seeds, constrained by the Voronoi mesh boundary
* PT1  ear clipping of every cell
* PT2  one random interior point per cell, fanned to the cell's vertices
* PT3  constrained Delaunay of every cell on its own vertices
* PT4  conforming Delaunay refinement to a minimum angle (default 20 deg)

Cocircular ties are broken deterministically: of the two diagonals of a
cocircular quadrilateral, the one whose lexicographically smaller endpoint
is smaller wins.
"""

from __future__ import annotations

import numpy as np
import triangle as tr

from polypde.domains import Domain, make_domain
from polypde.mesh import Mesh2D, Provenance, build_mesh, compact, polygon_area

PT_VARIANTS = ("PT1", "PT2", "PT3", "PT4")


class TriangulationError(RuntimeError):
    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


def _cross(o, a, b):
    return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (a[..., 1] - o[..., 1]) * (b[..., 0] - o[..., 0])


def incircle(a, b, c, d):
    """Positive when ``d`` is strictly inside the circumcircle of CCW ``abc``; scaled to be dimensionless."""
    ad, bd, cd = a - d, b - d, c - d
    det = (
        (ad[..., 0] ** 2 + ad[..., 1] ** 2) * _cross0(bd, cd)
        - (bd[..., 0] ** 2 + bd[..., 1] ** 2) * _cross0(ad, cd)
        + (cd[..., 0] ** 2 + cd[..., 1] ** 2) * _cross0(ad, bd)
    )
    scale = np.maximum.reduce([(ad**2).sum(-1), (bd**2).sum(-1), (cd**2).sum(-1)]) ** 2
    return det / np.where(scale > 0, scale, 1.0)


def _cross0(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def tie_break(points: np.ndarray, tris: np.ndarray, constrained=None, eps: float = 1e-12) -> np.ndarray:
    """Flip cocircular diagonals to the declared preferred one.

    ``constrained`` is an ``(m, 2)`` array (or set) of vertex pairs that must
    not flip. Independent flips are applied in batches until none is left.
    """
    points = np.asarray(points, dtype=float)
    tris = np.array(tris, dtype=np.int64, copy=True).reshape(-1, 3)
    rank = np.empty(len(points), dtype=np.int64)
    rank[np.lexsort((points[:, 1], points[:, 0]))] = np.arange(len(points))
    n = len(points)
    if constrained is not None and len(constrained):
        c = np.array(sorted(constrained) if isinstance(constrained, set) else constrained, dtype=np.int64).reshape(-1, 2)
        ckeys = np.unique(np.minimum(c[:, 0], c[:, 1]) * n + np.maximum(c[:, 0], c[:, 1]))
    else:
        ckeys = np.zeros(0, dtype=np.int64)
    for _ in range(100):
        u = tris.ravel()
        v = np.roll(tris, -1, axis=1).ravel()
        w = np.roll(tris, -2, axis=1).ravel()
        key = np.minimum(u, v) * n + np.maximum(u, v)
        order = np.argsort(key, kind="stable")
        ks = key[order]
        pair = np.flatnonzero(ks[1:] == ks[:-1])
        if len(pair) == 0:
            return tris
        h1, h2 = order[pair], order[pair + 1]
        ok = ~np.isin(key[h1], ckeys)
        h1, h2 = h1[ok], h2[ok]
        t1, t2 = h1 // 3, h2 // 3
        a, b, c0 = points[tris[t1, 0]], points[tris[t1, 1]], points[tris[t1, 2]]
        ic = incircle(a, b, c0, points[w[h2]])
        cur = np.minimum(rank[u[h1]], rank[v[h1]])
        alt = np.minimum(rank[w[h1]], rank[w[h2]])
        # half-edge h1 runs u->v in t1 with apex w1; the new triangles are (w1, w2, v) and (w2, w1, u)
        w1, w2, uu, vv = w[h1], w[h2], u[h1], v[h1]
        pos1 = _cross(points[w1], points[w2], points[vv]) > 0
        pos2 = _cross(points[w2], points[w1], points[uu]) > 0
        cand = np.flatnonzero((np.abs(ic) <= eps) & (alt < cur) & pos1 & pos2)
        if len(cand) == 0:
            return tris
        used = np.zeros(len(tris), dtype=bool)
        done = 0
        for k in cand:
            i, j = t1[k], t2[k]
            if used[i] or used[j]:
                continue
            used[i] = used[j] = True
            tris[i] = (w1[k], w2[k], vv[k])
            tris[j] = (w2[k], w1[k], uu[k])
            done += 1
        if done == 0:
            return tris
    raise TriangulationError("cocircular tie-break did not settle")


def _ccw_tris(points, tris):
    tris = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
    neg = _cross(points[tris[:, 0]], points[tris[:, 1]], points[tris[:, 2]]) < 0
    tris[neg] = tris[neg][:, [0, 2, 1]]
    return tris


def delaunay(points) -> np.ndarray:
    """Delaunay triangles of a point set (CCW, tie-broken)."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(p) < 3:
        raise TriangulationError("need at least three points")
    t = tr.triangulate({"vertices": p}, "Q")
    if len(t.get("triangles", [])) == 0:
        raise TriangulationError("points are collinear")
    return tie_break(p, _ccw_tris(p, t["triangles"]))


# ---------------------------------------------------------------------------
# DT
# ---------------------------------------------------------------------------


def dual_delaunay(seeds, domain, vp_mesh: Mesh2D | None = None, variant: str = "DT") -> Mesh2D:
    """Delaunay mesh of the seeds filling the domain.

    The boundary vertices and edges of the Voronoi mesh of the same seeds
    are added as constraints so the triangulation covers the domain and its
    added vertices lie on the boundary.
    """
    from polypde.voronoi import SeedSet, voronoi_cells

    domain = domain if isinstance(domain, Domain) else make_domain(domain)
    p = seeds.points if isinstance(seeds, SeedSet) else np.asarray(seeds, dtype=float).reshape(-1, 2)
    if vp_mesh is None:
        vp_mesh = voronoi_cells(seeds, domain)
    bv = vp_mesh.boundary_vertex_ids
    remap = np.full(vp_mesh.n_vertices, -1, dtype=np.int64)
    remap[bv] = len(p) + np.arange(len(bv))
    pts = np.vstack([p, vp_mesh.vertices[bv]])
    seg = remap[vp_mesh.boundary_edges]
    data = {"vertices": pts, "segments": seg}
    holes = np.asarray(domain.holes, dtype=float).reshape(-1, 2)
    if len(holes):
        data["holes"] = holes
    t = tr.triangulate(data, "pQ")
    if len(t["vertices"]) != len(pts):
        raise TriangulationError("boundary constraints intersect (Steiner points required)")
    tris = _ccw_tris(pts, t["triangles"])
    tris = tie_break(pts, tris, seg)
    rng_seed = getattr(seeds, "rng_seed", None)
    verts, cells = compact(pts, list(tris))
    return build_mesh(verts, cells, domain, Provenance("DT", variant, len(p), rng_seed, domain.id))


# ---------------------------------------------------------------------------
# PT1 ear clipping
# ---------------------------------------------------------------------------


def _earclip_loop(xy: np.ndarray, eps: float = 1e-14) -> list:
    idx = list(range(len(xy)))
    out = []
    scale = max(float(np.ptp(xy, axis=0).max()), 1e-300) ** 2
    while len(idx) > 3:
        m = len(idx)
        best = None
        for k in range(m):
            a, b, c = idx[k - 1], idx[k], idx[(k + 1) % m]
            cr = _cross(xy[a], xy[b], xy[c])
            if cr <= eps * scale:
                continue
            others = [idx[j] for j in range(m) if idx[j] not in (a, b, c)]
            if others:
                q = xy[others]
                tol = eps * scale
                # points on the sides ab, bc are harmless; on the new diagonal ca they block
                inside = (_cross(xy[a], xy[b], q) > tol) & (_cross(xy[b], xy[c], q) > tol) & (_cross(xy[c], xy[a], q) >= -tol)
                if inside.any():
                    continue
            best = k
            break
        if best is None:
            raise TriangulationError("no ear found (polygon not simple)")
        k = best
        out.append((idx[k - 1], idx[k], idx[(k + 1) % m]))
        del idx[k]
    out.append(tuple(idx))
    return out


def earclip_cell(xy: np.ndarray) -> np.ndarray:
    """Ear clipping of one CCW loop; local triangles ``(k-2, 3)``."""
    return np.array(_earclip_loop(np.asarray(xy, dtype=float)), dtype=np.int64).reshape(-1, 3)


def _with_provenance(mesh: Mesh2D, verts, cells, domain, tag: str):
    p = mesh.provenance
    prov = Provenance(p.mesher, f"{p.variant}-{tag}" if p.variant else tag, p.resolution, p.seed, p.domain)
    if domain is None and p.domain:
        domain = make_domain(p.domain)
    return build_mesh(verts, cells, domain, prov)


def earclip(mesh: Mesh2D, domain=None) -> Mesh2D:
    """Ear clipping of every cell, scanning vertices in index order."""
    tris = []
    convex = mesh.is_strictly_convex
    for ci, c in enumerate(mesh.cells):
        k = len(c)
        if convex[ci]:
            # the index-order scan clips vertex 0, 1, ... : a fan from the last vertex
            j = np.arange(k - 2)
            tris.extend(np.stack([np.full(k - 2, c[-1]), c[j], c[j + 1]], axis=1))
            continue
        try:
            loc = earclip_cell(mesh.vertices[c])
        except TriangulationError as e:
            raise TriangulationError(f"cell {ci}: {e}", ci) from None
        tris.extend(c[loc])
    return _with_provenance(mesh, mesh.vertices, tris, domain, "PT1")


# ---------------------------------------------------------------------------
# PT2 random fan
# ---------------------------------------------------------------------------


def _uniform_in_polygon(xy: np.ndarray, rng: np.random.Generator, n_try: int = 1000) -> np.ndarray:
    loc = earclip_cell(xy)
    tri = xy[loc]
    w = np.abs(_cross(tri[:, 0], tri[:, 1], tri[:, 2]))
    w = w / w.sum()
    for _ in range(n_try):
        t = tri[rng.choice(len(tri), p=w)]
        r1, r2 = rng.random(2)
        s = np.sqrt(r1)
        p = (1 - s) * t[0] + s * (1 - r2) * t[1] + s * r2 * t[2]
        # every fan triangle must be positive, i.e. p sees the whole cell
        if (_cross(p, xy, np.roll(xy, -1, axis=0)) > 0).all():
            return p
    raise TriangulationError("no interior point sees every vertex")


def fan_random(mesh: Mesh2D, rng_seed: int = 0, domain=None) -> Mesh2D:
    """One uniform random interior point per cell, connected to all its vertices."""
    rng = np.random.default_rng(rng_seed)
    nv = mesh.n_vertices
    new_pts = np.empty((mesh.n_cells, 2))
    tris = []
    for ci, c in enumerate(mesh.cells):
        xy = mesh.vertices[c]
        try:
            new_pts[ci] = _uniform_in_polygon(xy, rng)
        except TriangulationError as e:
            raise TriangulationError(f"cell {ci}: {e}", ci) from None
        k = len(c)
        centre = np.full(k, nv + ci)
        tris.extend(np.stack([c, np.roll(c, -1), centre], axis=1))
    verts = np.vstack([mesh.vertices, new_pts])
    return _with_provenance(mesh, verts, tris, domain, "PT2")


# ---------------------------------------------------------------------------
# PT3 / PT4 constrained and conforming Delaunay
# ---------------------------------------------------------------------------


def _cell_interior_points(mesh: Mesh2D) -> np.ndarray:
    """A point strictly inside each cell: centroid of its largest ear triangle."""
    v = mesh.vertices
    out = np.empty((mesh.n_cells, 2))
    convex = mesh.is_strictly_convex
    out[convex] = mesh.cell_centroids[convex]
    for ci in np.flatnonzero(~convex):
        xy = v[mesh.cells[ci]]
        tri = xy[earclip_cell(xy)]
        a = _cross(tri[:, 0], tri[:, 1], tri[:, 2])
        out[ci] = tri[int(np.argmax(a))].mean(axis=0)
    return out


def _region_cdt(mesh: Mesh2D, opts: str):
    v = np.array(mesh.vertices)
    seg = np.array(mesh.edges)
    regions = np.hstack([_cell_interior_points(mesh), (np.arange(mesh.n_cells) + 1.0)[:, None], np.zeros((mesh.n_cells, 1))])
    t = tr.triangulate({"vertices": v, "segments": seg, "regions": regions}, "pAQ" + opts)
    attr = np.rint(np.asarray(t["triangle_attributes"]).ravel()).astype(np.int64) - 1
    keep = attr >= 0
    tris = _ccw_tris(t["vertices"], np.asarray(t["triangles"])[keep])
    return np.asarray(t["vertices"], dtype=float), tris, attr[keep], t


def _check_areas(mesh: Mesh2D, tri_cell, pts, tris):
    a = 0.5 * _cross(pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]])
    per_cell = np.bincount(tri_cell, a, mesh.n_cells)
    ref = mesh.cell_areas
    bad = np.flatnonzero(np.abs(per_cell - ref) > 1e-10 * np.maximum(ref, ref.max() * 1e-6))
    if len(bad):
        raise TriangulationError(f"cell {bad[0]} is not covered by its triangles", int(bad[0]))


def cdt_cells(mesh: Mesh2D, domain=None) -> Mesh2D:
    """Constrained Delaunay triangulation of every cell on its own vertices."""
    pts, tris, cell, _ = _region_cdt(mesh, "")
    if len(pts) != mesh.n_vertices:
        raise TriangulationError("cell edges intersect (Steiner points required)")
    _check_areas(mesh, cell, pts, tris)
    tris = tie_break(pts, tris, mesh.edges)
    return _with_provenance(mesh, pts, tris, domain, "PT3")


def conforming_dt(mesh: Mesh2D, quality_angle: float = 20.0, domain=None, max_steiner_per_cell: int = 100_000) -> Mesh2D:
    """Conforming Delaunay refinement of every cell to ``quality_angle``.

    Steiner points on shared edges come from one global refinement and are
    therefore shared. Points added on curved boundary chords are projected
    onto the true boundary when that keeps every incident triangle positive.
    """
    if domain is None and mesh.provenance.domain:
        domain = make_domain(mesh.provenance.domain)
    limit = max_steiner_per_cell * max(1, mesh.n_cells)
    pts, tris, cell, t = _region_cdt(mesh, f"q{quality_angle:g}S{limit}")
    if len(pts) - mesh.n_vertices >= limit:
        raise TriangulationError("refinement did not terminate within the insertion limit")
    verts, cells = compact(pts, list(tris))
    tris = np.array(cells, dtype=np.int64)
    if domain is not None and not domain.polygonal:
        verts = _project_new_boundary(mesh, verts, tris, domain)
    return _with_provenance(mesh, verts, list(tris), domain, "PT4")


def _project_new_boundary(mesh: Mesh2D, verts: np.ndarray, tris: np.ndarray, domain: Domain) -> np.ndarray:
    from polypde.mesh import topological_boundary_edges

    be = topological_boundary_edges(list(tris))
    bv = np.unique(be.ravel())
    s = np.abs(domain.sdf(verts[bv]))
    off = bv[s > domain.boundary_tol]
    out = verts.copy()
    if len(off) == 0:
        return out
    proj, _, _ = domain.project(verts[off])
    for vi, q in zip(off, proj):
        t = tris[(tris == vi).any(axis=1)]
        nb = np.unique(t[t != vi])
        # only small moves relative to the local edge length
        if np.linalg.norm(q - out[vi]) > 0.25 * np.linalg.norm(out[nb] - out[vi], axis=1).min():
            continue
        old = out[vi].copy()
        out[vi] = q
        if not (_cross(out[t[:, 0]], out[t[:, 1]], out[t[:, 2]]) > 0).all():
            out[vi] = old
    return out


def triangulate_mesh(mesh: Mesh2D, variant: str, rng_seed: int = 0, domain=None) -> Mesh2D:
    variant = str(variant).upper()
    if variant == "PT1":
        return earclip(mesh, domain)
    if variant == "PT2":
        return fan_random(mesh, rng_seed, domain)
    if variant == "PT3":
        return cdt_cells(mesh, domain)
    if variant == "PT4":
        return conforming_dt(mesh, domain=domain)
    raise ValueError(f"unknown triangulation variant {variant!r}")
