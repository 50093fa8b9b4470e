"""Clipped Voronoi tessellations and Lloyd (CVT) smoothing, variants VP1-VP4."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from scipy.spatial import Voronoi

from polypde.domains import Domain, MirrorCircle, MirrorLine, make_domain, sample_in_domain
from polypde.mesh import (
    Mesh2D,
    Provenance,
    build_mesh,
    flatten_cells,
    merge_close_vertices,
    ragged_area_centroid,
    split_cells,
    topological_boundary_edges,
)

VP_ITERATIONS = {"VP1": 1, "VP2": 5, "VP3": 10, "VP4": 20}


class MeshingError(RuntimeError):
    def __init__(self, message, seed_index=None):
        super().__init__(message)
        self.seed_index = seed_index


@dataclass(frozen=True, eq=False)
class SeedSet:
    points: np.ndarray
    rng_seed: int | None = None
    history: tuple = field(default=(), repr=False)

    def __post_init__(self):
        p = np.ascontiguousarray(np.asarray(self.points, dtype=float).reshape(-1, 2))
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    def __len__(self):
        return len(self.points)


def _as_points(seeds) -> np.ndarray:
    return seeds.points if isinstance(seeds, SeedSet) else np.asarray(seeds, dtype=float).reshape(-1, 2)


def _as_domain(domain) -> Domain:
    return domain if isinstance(domain, Domain) else make_domain(domain)


def sample_seeds(domain, n: int, rng_seed: int) -> SeedSet:
    """``n`` points uniform over the domain by rejection; deterministic in ``rng_seed``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    domain = _as_domain(domain)
    rng = np.random.default_rng(rng_seed)
    return SeedSet(sample_in_domain(domain, n, rng), rng_seed)


# ---------------------------------------------------------------------------
# Voronoi construction
# ---------------------------------------------------------------------------


def _phantoms(p: np.ndarray, domain: Domain, alpha: float, extra: dict) -> np.ndarray:
    out = []
    for k, m in enumerate(domain.mirrors):
        q, keep = m.reflect(p, alpha)
        if k in extra:
            keep[extra[k]] = True
        out.append(q[keep])
        if isinstance(m, MirrorCircle) and m.hole:
            # keeps an unresolved hole empty on coarse seed sets
            out.append(np.asarray(m.center, float)[None, :])
    # a far ring bounds every region
    x0, y0, x1, y1 = domain.bbox
    c = np.array([(x0 + x1) / 2, (y0 + y1) / 2])
    t = np.linspace(0, 2 * math.pi, 16, endpoint=False)
    out.append(c + 4 * domain.diagonal * np.stack([np.cos(t), np.sin(t)], axis=1))
    return np.concatenate(out)


def _raw_loops(p: np.ndarray, domain: Domain) -> list:
    """Voronoi loops (CCW) of the seeds among their mirror phantoms.

    Walls reflect only nearby seeds; any seed whose cell still crosses a wall
    gets its reflection added and the diagram is rebuilt, so straight walls
    are always exact.
    """
    alpha = 1.5 * math.sqrt(domain.area / len(p))
    tol = 1e-10 * domain.diagonal
    extra: dict = {}
    for _ in range(8):
        pts = np.concatenate([p, _phantoms(p, domain, alpha, extra)])
        vor = Voronoi(pts)
        regions = [vor.regions[r] for r in vor.point_region[: len(p)]]
        for i, region in enumerate(regions):
            if not region or -1 in region:
                raise MeshingError(f"Voronoi region of seed {i} is unbounded", i)
        flat, sizes = flatten_cells(regions)
        owner = np.repeat(np.arange(len(p)), sizes)
        xy = vor.vertices[flat]
        grew = False
        for k, m in enumerate(domain.mirrors):
            if not isinstance(m, MirrorLine):
                continue
            _, had = m.reflect(p, alpha)
            if k in extra:
                had[extra[k]] = True
            crossing = np.unique(owner[m.side(xy) > tol])
            crossing = crossing[~had[crossing]]
            if len(crossing):
                extra[k] = np.union1d(extra.get(k, np.zeros(0, np.int64)), crossing)
                grew = True
        if not grew:
            break
    area, _ = ragged_area_centroid(xy, sizes)
    loops = split_cells(xy, sizes)
    return [c if a > 0 else c[::-1] for c, a in zip(loops, area)]


def _clipped_centroids(p: np.ndarray, domain: Domain) -> np.ndarray:
    loops = _clip_polygonal(_raw_loops(p, domain), domain)
    sizes = np.array([len(x) for x in loops])
    return ragged_area_centroid(np.concatenate(loops), sizes)[1]


def _clip_polygonal(loops: list, domain: Domain) -> list:
    """Exact cut of cells against the removed parts of non-convex polygonal domains."""
    if domain.id != "LS":
        return loops
    notch = shapely.box(0.0, 0.0, 2.0, 2.0)
    out = []
    for i, xy in enumerate(loops):
        if not (np.minimum(xy[:, 0], xy[:, 1]) > 0).any():
            out.append(xy)
            continue
        g = shapely.Polygon(xy).difference(notch)
        if g.geom_type != "Polygon" or g.is_empty:
            raise MeshingError(f"cell of seed {i} is split by the re-entrant corner", i)
        g = shapely.geometry.polygon.orient(g, 1.0)
        out.append(np.asarray(g.exterior.coords)[:-1])
    return out


def _loops_to_mesh(loops: list, tol: float):
    sizes = np.array([len(x) for x in loops])
    verts = np.concatenate(loops)
    return merge_close_vertices(verts, split_cells(np.arange(len(verts)), sizes), tol)


def _snap_boundary(verts: np.ndarray, cells: list, domain: Domain) -> np.ndarray:
    be = topological_boundary_edges(cells)
    bv = np.unique(be.ravel())
    verts = verts.copy()
    if len(bv) == 0:
        return verts
    proj, _, _ = domain.project(verts[bv])
    verts[bv] = proj
    used = set()
    for corner in domain.features:
        d = np.linalg.norm(verts[bv] - corner, axis=1)
        for j in np.argsort(d, kind="stable"):
            if int(bv[j]) not in used:
                used.add(int(bv[j]))
                verts[bv[j]] = corner
                break
    return verts


def voronoi_cells(seeds, domain, *, snap: bool = True) -> Mesh2D:
    """One clipped Voronoi cell per seed, in seed order.

    Straight outer walls are exact via full reflection; the LS notch is cut
    exactly; circles are resolved by per-seed mirror phantoms and boundary
    vertices are then projected onto the true boundary.
    """
    domain = _as_domain(domain)
    p = _as_points(seeds)
    if len(p) == 0:
        raise MeshingError("empty seed set")
    tol = 1e-9 * domain.diagonal
    loops = _clip_polygonal(_raw_loops(p, domain), domain)
    verts, cells = _loops_to_mesh(loops, tol)
    if snap:
        verts = _snap_boundary(verts, cells, domain)
        verts, cells = merge_close_vertices(verts, cells, tol)
        # near-coincident wall vertices leave slivers once cells are triangulated
        h = np.sqrt(domain.area / len(p))
        bv = np.unique(topological_boundary_edges(cells).ravel())
        verts, cells = merge_close_vertices(verts, cells, 1e-2 * h, subset=bv)
        verts = _snap_boundary(verts, cells, domain)
    for i, c in enumerate(cells):
        if len(c) < 3:
            raise MeshingError(f"cell of seed {i} degenerated to {len(c)} vertices", i)
    rng_seed = seeds.rng_seed if isinstance(seeds, SeedSet) else None
    mesh = build_mesh(verts, cells, domain, Provenance("VP", "", len(p), rng_seed, domain.id))
    bad = np.flatnonzero(~(mesh.cell_areas > 0))
    if len(bad):
        raise MeshingError(f"cell of seed {bad[0]} has non-positive area", int(bad[0]))
    return mesh


# ---------------------------------------------------------------------------
# Lloyd iterations
# ---------------------------------------------------------------------------


def lloyd(seeds, domain, iterations: int, *, keep_history: bool = False) -> SeedSet:
    """Replace each seed by the centroid of its clipped cell, ``iterations`` times.

    A centroid outside the domain (possible only near curved walls) keeps the
    previous seed.
    """
    domain = _as_domain(domain)
    p = _as_points(seeds).copy()
    hist = [p.copy()] if keep_history else []
    for _ in range(int(iterations)):
        c = _clipped_centroids(p, domain)
        ok = domain.sdf(c) < 0
        p = np.where(ok[:, None], c, p)
        if keep_history:
            hist.append(p.copy())
    rng_seed = seeds.rng_seed if isinstance(seeds, SeedSet) else None
    return SeedSet(p, rng_seed, tuple(hist))


def cvt_energy(seeds, mesh: Mesh2D) -> float:
    """Sum over cells of the second moment about the cell's seed (exact on polygons)."""
    p = _as_points(seeds)
    total = 0.0
    v = mesh.vertices
    for k, (ids, loops) in mesh.groups.items():
        xy = v[loops] - p[ids][:, None, :]
        a, b = xy[:, 1:-1], xy[:, 2:]
        o = xy[:, :1]
        da, db = a - o, b - o
        cr = 0.5 * (da[..., 0] * db[..., 1] - da[..., 1] * db[..., 0])
        s = a + b + o
        sq = (a**2).sum(-1) + (b**2).sum(-1) + (o**2).sum(-1) + (s**2).sum(-1)
        total += float((cr * sq / 12.0).sum())
    return total


def vp_variant(domain, n: int, variant: str, rng_seed: int, *, return_seeds: bool = False):
    """Seeds, Lloyd smoothing (1/5/10/20 steps for VP1..VP4) and final cells."""
    domain = _as_domain(domain)
    variant = str(variant).upper()
    if variant not in VP_ITERATIONS:
        raise ValueError(f"unknown Voronoi variant {variant!r}")
    seeds = lloyd(sample_seeds(domain, n, rng_seed), domain, VP_ITERATIONS[variant])
    m = voronoi_cells(seeds, domain)
    mesh = Mesh2D(m.vertices, m.cells, m.boundary_edges, m.boundary_tags, Provenance("VP", variant, n, rng_seed, domain.id))
    return (mesh, seeds) if return_seeds else mesh
