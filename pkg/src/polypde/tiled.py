"""Tiled concave-polygon meshes, variants TP1-TP5.

Each interior grid cell holds one scaled tile; the gap between tile and
cell is filled by a constrained Delaunay triangulation on the existing
vertices only. Grid cells cut by a curved or re-entrant boundary become
plain clipped polygons.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import shapely
import triangle as tr

from polypde._clip import (
    ARC_SPACING,
    clip_cells,
    grid_quads,
    grid_vertices,
    hole_circles,
    lattice_region,
    rect_meets_circle,
)
from polypde.domains import Domain, make_domain
from polypde.mesh import Mesh2D, Provenance, build_mesh, is_simple, polygon_area


class TilingError(RuntimeError):
    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


def _star(n=5, r_out=0.45, r_in=0.18):
    t = np.pi / 2 + np.arange(2 * n) * np.pi / n
    r = np.where(np.arange(2 * n) % 2 == 0, r_out, r_in)
    return np.stack([0.5 + r * np.cos(t), 0.5 + r * np.sin(t)], axis=1)


_TILES = {
    "TP1": _star(),
    # Z: bottom bar, stem, top bar
    "TP2": [(0.4, 0.2), (0.8, 0.2), (0.8, 0.4), (0.6, 0.4), (0.6, 0.8), (0.2, 0.8), (0.2, 0.6), (0.4, 0.6)],
    "TP3": [(0.2, 0.2), (0.8, 0.2), (0.8, 0.8), (0.6, 0.8), (0.6, 0.4), (0.4, 0.4), (0.4, 0.8), (0.2, 0.8)],
    # inward spiral
    "TP4": [
        (0.1, 0.1), (0.9, 0.1), (0.9, 0.9), (0.3, 0.9), (0.3, 0.4), (0.6, 0.4), (0.6, 0.6), (0.5, 0.6),
        (0.5, 0.5), (0.4, 0.5), (0.4, 0.8), (0.8, 0.8), (0.8, 0.2), (0.2, 0.2), (0.2, 0.9), (0.1, 0.9),
    ],
    # three teeth
    "TP5": [
        (0.2, 0.2), (0.7, 0.2), (0.7, 0.8), (0.6, 0.8), (0.6, 0.4), (0.5, 0.4),
        (0.5, 0.8), (0.4, 0.8), (0.4, 0.4), (0.3, 0.4), (0.3, 0.8), (0.2, 0.8),
    ],
}  # fmt: skip

TP_VARIANTS = tuple(_TILES)


def tile_shape(variant: str) -> np.ndarray:
    """CCW vertex loop of the tile inside the unit cell."""
    try:
        return np.array(_TILES[str(variant).upper()], dtype=float)
    except KeyError:
        raise ValueError(f"unknown tile variant {variant!r}") from None


def _interior_point(loop: np.ndarray) -> np.ndarray:
    k = len(loop)
    t = tr.triangulate({"vertices": loop, "segments": np.stack([np.arange(k), (np.arange(k) + 1) % k], 1)}, "pQ")
    a, b, c = t["vertices"][t["triangles"][0]]
    return (a + b + c) / 3.0


@lru_cache(maxsize=None)
def gap_triangles(variant: str) -> np.ndarray:
    """CDT of unit square minus tile, over local ids (0..3 corners, 4.. tile vertices)."""
    tile = tile_shape(variant)
    k = len(tile)
    corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    pts = np.vstack([corners, tile])
    seg = [(i, (i + 1) % 4) for i in range(4)] + [(4 + i, 4 + (i + 1) % k) for i in range(k)]
    t = tr.triangulate({"vertices": pts, "segments": np.array(seg), "holes": _interior_point(tile)[None, :]}, "pQ")
    if len(t["vertices"]) != len(pts) or not np.allclose(t["vertices"], pts, rtol=0, atol=0):
        raise TilingError(f"gap triangulation of {variant} needed Steiner points")
    tri = np.asarray(t["triangles"], dtype=np.int64)
    expected = 1.0 - polygon_area(tile)
    got = sum(polygon_area(pts[c]) for c in tri)
    if abs(got - expected) > 1e-12:
        raise TilingError(f"gap triangulation of {variant} does not close ({got} vs {expected})")
    return tri


def tiled_mesh(domain, nx: int, ny: int, variant: str, rng_seed=None) -> Mesh2D:
    domain = domain if isinstance(domain, Domain) else make_domain(domain)
    variant = str(variant).upper()
    tile = tile_shape(variant)
    if not is_simple(tile) or polygon_area(tile) <= 0:
        raise TilingError(f"tile {variant} is not a simple CCW polygon")
    gaps = gap_triangles(variant)
    nx, ny = int(nx), int(ny)
    xy, _ = grid_vertices(domain, nx, ny)
    quads = grid_quads(nx, ny)
    tol = domain.boundary_tol

    x0, y0, x1, y1 = domain.bbox
    spacing = ARC_SPACING * math.sqrt((x1 - x0) * (y1 - y0) / (nx * ny))
    if domain.is_rectangle:
        interior = np.ones(len(quads), dtype=bool)
    else:
        # corners inside the sampled region, which sits within the true one
        region = lattice_region(domain, spacing)
        s = shapely.contains_xy(shapely.buffer(region, tol), xy[:, 0], xy[:, 1])
        interior = s[quads].all(axis=1)
        holes = hole_circles(domain)
        for qi in np.flatnonzero(interior):
            lo, hi = xy[quads[qi, 0]], xy[quads[qi, 2]]
            if any(rect_meets_circle(lo, hi, c, r) for c, r in holes):
                interior[qi] = False
        if domain.outline is not None:
            # an outline corner on a quad side would hang on the tiled neighbour
            for p in np.asarray(domain.outline, float):
                lo, hi = xy[quads[:, 0]], xy[quads[:, 2]]
                on = ((lo - tol <= p) & (p <= hi + tol)).all(axis=1)
                corner = (np.abs(xy[quads] - p).max(axis=2) <= tol).any(axis=1)
                interior[on & ~corner] = False

    k = len(tile)
    ids = np.flatnonzero(interior)
    lo = xy[quads[ids, 0]]
    size = xy[quads[ids, 2]] - lo
    tile_xy = (lo[:, None, :] + tile[None, :, :] * size[:, None, :]).reshape(-1, 2)
    n0 = len(xy)
    verts = np.vstack([xy, tile_xy])
    cells, keep = [], []
    for j, qi in enumerate(ids):
        local = np.concatenate([quads[qi], n0 + j * k + np.arange(k)])
        cells.append(local[4:])
        keep.append(True)
        for t in gaps:
            cells.append(local[t])
            keep.append(True)
    for qi in np.flatnonzero(~interior):
        cells.append(quads[qi])
        keep.append(False)
    prov = Provenance("TP", variant, nx * ny, rng_seed, domain.id)
    min_area = 1e-3 * (x1 - x0) * (y1 - y0) / (nx * ny)
    if domain.is_rectangle:
        return build_mesh(verts, cells, domain, prov)
    verts, cells = clip_cells(domain, verts, cells, keep_mask=np.array(keep), min_area=min_area, spacing=spacing)
    return build_mesh(verts, cells, domain, prov)
