"""Polygonal mesh data model, geometric primitives, validation and file I/O.

A :class:`Mesh2D` stores vertex coordinates, one counter-clockwise vertex
loop per cell and the tagged boundary edges. Adjacency information is
derived lazily and cached on the instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from polypde.domains import make_domain


class InvalidPolygonError(ValueError):
    """Raised for polygons with too few points or non-positive area."""


class MeshValidationError(ValueError):
    """Raised when an operation requires a valid mesh and gets an invalid one."""

    def __init__(self, violations):
        self.violations = list(violations)
        head = "; ".join(str(v) for v in self.violations[:5])
        more = "" if len(self.violations) <= 5 else f" (+{len(self.violations) - 5} more)"
        super().__init__(f"invalid mesh: {head}{more}")


# ---------------------------------------------------------------------------
# polygon primitives
# ---------------------------------------------------------------------------


def polygon_area(loop) -> float:
    """Signed shoelace area; positive iff the loop is counter-clockwise."""
    p = np.asarray(loop, dtype=float)
    if p.ndim != 2 or p.shape[0] < 3:
        raise InvalidPolygonError("a polygon needs at least 3 points")
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


def polygon_centroid(loop) -> np.ndarray:
    """Area centroid of a counter-clockwise simple polygon."""
    p = np.asarray(loop, dtype=float)
    area = polygon_area(p)
    if not area > 0.0:
        raise InvalidPolygonError(f"centroid needs positive area, got {area!r}")
    # shift for round-off: moments about the first vertex
    q = p - p[0]
    x, y = q[:, 0], q[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    cx = np.sum((x + xn) * cr) / (6.0 * area)
    cy = np.sum((y + yn) * cr) / (6.0 * area)
    return np.array([cx, cy]) + p[0]


def polygon_diameter(loop) -> float:
    p = np.asarray(loop, dtype=float)
    d = p[:, None, :] - p[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


def batched_area_centroid(xy: np.ndarray):
    """Signed areas and centroids for a stack of ``(m, k, 2)`` loops."""
    q = xy - xy[:, :1, :]
    x, y = q[..., 0], q[..., 1]
    xn, yn = np.roll(x, -1, axis=1), np.roll(y, -1, axis=1)
    cr = x * yn - xn * y
    area = 0.5 * cr.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cx = ((x + xn) * cr).sum(axis=1) / (6.0 * area)
        cy = ((y + yn) * cr).sum(axis=1) / (6.0 * area)
    return area, np.stack([cx, cy], axis=1) + xy[:, 0, :]


def ragged_area_centroid(xy: np.ndarray, sizes: np.ndarray):
    """Signed areas and centroids of polygons stored as one flat ``(sum k, 2)`` array."""
    nxt = ragged_next(sizes)
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = x[nxt], y[nxt]
    cr = x * yn - xn * y
    cell = np.repeat(np.arange(len(sizes)), sizes)
    a2 = np.bincount(cell, cr, len(sizes))
    cx = np.bincount(cell, (x + xn) * cr, len(sizes))
    cy = np.bincount(cell, (y + yn) * cr, len(sizes))
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.stack([cx, cy], axis=1) / (3.0 * a2[:, None])
    return 0.5 * a2, c


def batched_diameter(xy: np.ndarray) -> np.ndarray:
    d = xy[:, :, None, :] - xy[:, None, :, :]
    return np.sqrt((d**2).sum(-1)).max(axis=(1, 2))


def point_in_polygon(points, loop) -> np.ndarray:
    """Even-odd crossing test; points on the boundary may go either way."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(loop, dtype=float)
    x, y = pts[:, 0:1], pts[:, 1:2]
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    cond = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    cross = cond & (x < xint)
    return (cross.sum(axis=1) % 2) == 1


def _segments_intersect(p1, p2, q1, q2, eps):
    """Proper-or-touching intersection for stacks of segments (broadcasting)."""

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (
            c[..., 0] - a[..., 0]
        )

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return ((d1 > eps) & (d2 < -eps) | (d1 < -eps) & (d2 > eps)) & (
        (d3 > eps) & (d4 < -eps) | (d3 < -eps) & (d4 > eps)
    )


def is_simple(loop) -> bool:
    p = np.asarray(loop, dtype=float)
    return not _self_intersections(p[None])[0]


def _self_intersections(xy: np.ndarray) -> np.ndarray:
    """Flag loops in an ``(m, k, 2)`` stack whose non-adjacent edges cross."""
    m, k, _ = xy.shape
    if k < 4:
        return np.zeros(m, dtype=bool)
    a = xy
    b = np.roll(xy, -1, axis=1)
    scale = np.abs(xy).max() + 1.0
    eps = 1e-14 * scale * scale
    ii, jj = np.triu_indices(k, 2)
    keep = ~((ii == 0) & (jj == k - 1))
    ii, jj = ii[keep], jj[keep]
    hit = _segments_intersect(a[:, ii], b[:, ii], a[:, jj], b[:, jj], eps)
    # repeated vertex positions inside a loop also make it non-simple
    d = xy[:, :, None, :] - xy[:, None, :, :]
    dist = np.sqrt((d**2).sum(-1))
    off = ~np.eye(k, dtype=bool)
    dup = (dist[:, off] <= 1e-13 * scale).any(axis=1)
    return hit.any(axis=1) | dup


# ---------------------------------------------------------------------------
# mesh
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Provenance:
    mesher: str = "raw"
    variant: str = ""
    resolution: float = 0
    seed: int | None = None
    domain: str = ""


class Violation(NamedTuple):
    rule: str
    index: int
    message: str

    def __str__(self):
        return f"[{self.rule} #{self.index}] {self.message}"


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Vertices, CCW cell loops and tagged boundary edges.

    ``boundary_edges`` is an ``(m, 2)`` int array paired with ``boundary_tags``.
    """

    vertices: np.ndarray
    cells: tuple
    boundary_edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    boundary_tags: tuple = ()
    provenance: Provenance = field(default_factory=Provenance)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=float).reshape(-1, 2))
        cells = tuple(np.asarray(c, dtype=np.int64).ravel() for c in self.cells)
        be = np.asarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        tags = tuple(str(t) for t in self.boundary_tags)
        if len(tags) != len(be):
            raise ValueError("boundary_tags must pair with boundary_edges")
        for arr in (v, be, *cells):
            arr.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "boundary_edges", be)
        object.__setattr__(self, "boundary_tags", tags)

    # -- sizes ---------------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @cached_property
    def cell_sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.cells], dtype=np.int64)

    @cached_property
    def is_triangular(self) -> bool:
        return bool(self.n_cells) and bool(np.all(self.cell_sizes == 3))

    @cached_property
    def groups(self) -> dict:
        """Cells grouped by vertex count: ``{k: (cell ids, (m, k) loops)}``."""
        out = {}
        sizes = self.cell_sizes
        for k in np.unique(sizes):
            ids = np.flatnonzero(sizes == k)
            out[int(k)] = (ids, np.array([self.cells[i] for i in ids], dtype=np.int64))
        return out

    @cached_property
    def triangles(self) -> np.ndarray:
        if not self.is_triangular:
            raise ValueError("mesh is not all-triangle")
        return self.groups[3][1]

    def cell_coords(self, i: int) -> np.ndarray:
        return self.vertices[self.cells[i]]

    @cached_property
    def cell_areas(self) -> np.ndarray:
        out = np.empty(self.n_cells)
        for k, (ids, loops) in self.groups.items():
            out[ids] = batched_area_centroid(self.vertices[loops])[0]
        return out

    @cached_property
    def cell_centroids(self) -> np.ndarray:
        out = np.empty((self.n_cells, 2))
        for k, (ids, loops) in self.groups.items():
            out[ids] = batched_area_centroid(self.vertices[loops])[1]
        return out

    @cached_property
    def cell_diameters(self) -> np.ndarray:
        out = np.empty(self.n_cells)
        for k, (ids, loops) in self.groups.items():
            out[ids] = batched_diameter(self.vertices[loops])
        return out

    # -- topology ------------------------------------------------------------
    @cached_property
    def _edge_table(self):
        """Directed half-edges (cell, local index, a, b) flattened over cells."""
        if not self.cells:
            z = np.zeros(0, dtype=np.int64)
            return z, z, z, z
        a = np.concatenate(self.cells)
        b = a[ragged_next(self.cell_sizes)]
        cell = np.repeat(np.arange(self.n_cells), self.cell_sizes)
        local = np.concatenate([np.arange(k) for k in self.cell_sizes])
        return cell, local, a, b

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted vertex pairs."""
        return self._edge_inverse[0]

    @cached_property
    def _edge_inverse(self):
        _, _, a, b = self._edge_table
        keys = np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1)
        uniq, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        return uniq, inv.ravel(), counts

    @cached_property
    def cell_edges(self) -> tuple:
        """Per cell, the global edge index of each local edge (i, i+1)."""
        inv = self._edge_inverse[1]
        offs = np.concatenate([[0], np.cumsum(self.cell_sizes)])
        return tuple(inv[offs[i] : offs[i + 1]] for i in range(self.n_cells))

    @cached_property
    def edge_use_count(self) -> np.ndarray:
        return self._edge_inverse[2]

    @cached_property
    def topological_boundary(self) -> np.ndarray:
        return self.edges[self.edge_use_count == 1]

    @cached_property
    def boundary_vertex_ids(self) -> np.ndarray:
        return np.unique(self.boundary_edges.ravel())

    def boundary_edges_with(self, tags: Iterable[str] | None) -> np.ndarray:
        if tags is None:
            return self.boundary_edges
        tags = set(tags)
        mask = np.array([t in tags for t in self.boundary_tags], dtype=bool)
        return self.boundary_edges[mask]

    @property
    def tag_set(self) -> set:
        return set(self.boundary_tags)

    @cached_property
    def is_strictly_convex(self) -> np.ndarray:
        """Per-cell flag: every turn strictly left (relative slack 1e-12)."""
        return convex_cells(self, 1e-12)


def _convex_flags(xy: np.ndarray, slack: float) -> np.ndarray:
    prev = np.roll(xy, 1, axis=1)
    nxt = np.roll(xy, -1, axis=1)
    e1 = xy - prev
    e2 = nxt - xy
    cr = e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0]
    scale = np.sqrt((e1**2).sum(-1) * (e2**2).sum(-1))
    return (cr > slack * scale).all(axis=1)


def convex_cells(mesh: Mesh2D, slack: float = 1e-12) -> np.ndarray:
    out = np.zeros(mesh.n_cells, dtype=bool)
    for k, (ids, loops) in mesh.groups.items():
        out[ids] = _convex_flags(mesh.vertices[loops], slack)
    return out


# ---------------------------------------------------------------------------
# validation and statistics
# ---------------------------------------------------------------------------


def validate(mesh: Mesh2D) -> list[Violation]:
    """Every broken Mesh2D invariant, as data. Empty list means valid."""
    out: list[Violation] = []
    v = mesh.vertices
    nv = len(v)
    bad = np.flatnonzero(~np.isfinite(v).all(axis=1))
    for i in bad:
        out.append(Violation("finite", int(i), "vertex has non-finite coordinates"))
    if len(bad):
        return out

    structural = set()
    for ci, c in enumerate(mesh.cells):
        if len(c) < 3:
            out.append(Violation("min-vertices", ci, f"cell has {len(c)} vertices"))
            structural.add(ci)
            continue
        if c.min() < 0 or c.max() >= nv:
            out.append(Violation("index-range", ci, "vertex index out of range"))
            structural.add(ci)
            continue
        if np.any(c == np.roll(c, -1)):
            out.append(Violation("duplicate-consecutive", ci, "repeated consecutive vertex"))
            structural.add(ci)
    if structural:
        return out

    for k, (ids, loops) in mesh.groups.items():
        xy = v[loops]
        area, _ = batched_area_centroid(xy)
        for ci in ids[~(area > 0)]:
            out.append(Violation("orientation", int(ci), "cell area is not positive (clockwise or degenerate)"))
        for ci in ids[_self_intersections(xy)]:
            out.append(Violation("simple", int(ci), "cell loop self-intersects"))

    counts = mesh.edge_use_count
    for e in np.flatnonzero(counts > 2):
        a, b = mesh.edges[e]
        out.append(Violation("conformity", int(e), f"edge ({a},{b}) shared by {counts[e]} cells"))

    topo = mesh.topological_boundary
    out.extend(_hanging_nodes(mesh, topo))

    declared = mesh.boundary_edges
    dkeys = {(int(min(a, b)), int(max(a, b))) for a, b in declared}
    tkeys = {(int(a), int(b)) for a, b in topo}
    if len(dkeys) != len(declared):
        out.append(Violation("boundary-coverage", -1, "duplicate boundary edge entries"))
    for i, (a, b) in enumerate(declared):
        key = (int(min(a, b)), int(max(a, b)))
        if key not in tkeys:
            out.append(Violation("boundary-coverage", i, f"boundary edge {key} is not on the topological boundary"))
    for key in sorted(tkeys - dkeys):
        out.append(Violation("boundary-coverage", -1, f"topological boundary edge {key} has no tag"))
    return out


def _hanging_nodes(mesh: Mesh2D, edges: np.ndarray) -> list[Violation]:
    if len(edges) == 0:
        return []
    v = mesh.vertices
    a, b = v[edges[:, 0]], v[edges[:, 1]]
    mid = 0.5 * (a + b)
    half = 0.5 * np.linalg.norm(b - a, axis=1)
    scale = float(np.ptp(v, axis=0).max()) or 1.0
    tol = 1e-9 * scale
    tree = cKDTree(v)
    out = []
    for e, hits in enumerate(tree.query_ball_point(mid, half + tol)):
        for h in hits:
            if h == edges[e, 0] or h == edges[e, 1]:
                continue
            d = b[e] - a[e]
            L2 = d @ d
            t = (v[h] - a[e]) @ d / L2
            if not (1e-9 < t < 1 - 1e-9):
                continue
            dist = abs(d[0] * (v[h, 1] - a[e, 1]) - d[1] * (v[h, 0] - a[e, 0])) / math.sqrt(L2)
            if dist <= tol:
                out.append(
                    Violation("conformity", int(e), f"vertex {h} hangs on edge ({edges[e, 0]},{edges[e, 1]})")
                )
    return out


def require_valid(mesh: Mesh2D) -> None:
    bad = validate(mesh)
    if bad:
        raise MeshValidationError(bad)


@dataclass(frozen=True)
class QualityStats:
    h_max: float
    h_min: float
    min_edge_length: float
    min_cell_area: float
    n_vertices: int
    n_cells: int
    max_cell_vertex_count: int
    min_angle_deg: float


def quality_stats(mesh: Mesh2D, check: bool = True) -> QualityStats:
    """Elementary size and shape statistics; cell diameter is the max vertex distance."""
    if check:
        require_valid(mesh)
    v = mesh.vertices
    e = mesh.edges
    lengths = np.linalg.norm(v[e[:, 1]] - v[e[:, 0]], axis=1)
    min_ang = math.pi
    for k, (ids, loops) in mesh.groups.items():
        xy = v[loops]
        d1 = np.roll(xy, 1, axis=1) - xy
        d2 = np.roll(xy, -1, axis=1) - xy
        cosang = (d1 * d2).sum(-1) / (np.linalg.norm(d1, axis=-1) * np.linalg.norm(d2, axis=-1))
        min_ang = min(min_ang, float(np.arccos(np.clip(cosang, -1, 1)).min()))
    h = mesh.cell_diameters
    return QualityStats(
        h_max=float(h.max()),
        h_min=float(h.min()),
        min_edge_length=float(lengths.min()),
        min_cell_area=float(mesh.cell_areas.min()),
        n_vertices=mesh.n_vertices,
        n_cells=mesh.n_cells,
        max_cell_vertex_count=int(mesh.cell_sizes.max()),
        min_angle_deg=math.degrees(min_ang),
    )


# ---------------------------------------------------------------------------
# construction helpers shared by the generators
# ---------------------------------------------------------------------------


def ragged_next(sizes: np.ndarray) -> np.ndarray:
    """Index of the next vertex (cyclically, within its own cell) in a flat loop array."""
    sizes = np.asarray(sizes, dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]) if len(sizes) else np.zeros(0, np.int64)
    nxt = np.arange(int(sizes.sum()), dtype=np.int64) + 1
    ends = starts + sizes - 1
    nz = sizes > 0
    nxt[ends[nz]] = starts[nz]
    return nxt


def flatten_cells(cells: Sequence):
    sizes = np.array([len(c) for c in cells], dtype=np.int64)
    flat = np.concatenate([np.asarray(c, dtype=np.int64) for c in cells]) if len(cells) else np.zeros(0, np.int64)
    return flat, sizes


def split_cells(flat: np.ndarray, sizes: np.ndarray) -> list:
    return np.split(flat, np.cumsum(sizes)[:-1]) if len(sizes) else []


def merge_close_vertices(vertices: np.ndarray, cells: Sequence, tol: float, subset=None):
    """Merge vertices closer than ``tol`` and drop repeated consecutive indices.

    Returns ``(vertices, cells)`` with unreferenced vertices removed; the
    representative of each cluster is its lowest original index. ``subset``
    restricts merging to those vertex ids.
    """
    vertices = np.asarray(vertices, dtype=float)
    n = len(vertices)
    rep = np.arange(n)
    if n and tol > 0:
        ids = np.arange(n) if subset is None else np.asarray(subset, dtype=np.int64)
        pairs = ids[cKDTree(vertices[ids]).query_pairs(tol, output_type="ndarray")].reshape(-1, 2)
        if len(pairs):
            g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
            _, lab = connected_components(g, directed=False)
            low = np.full(lab.max() + 1, n, dtype=np.int64)
            np.minimum.at(low, lab, np.arange(n))
            rep = low[lab]
    flat, sizes = flatten_cells(cells)
    flat = rep[flat]
    keep = flat != flat[ragged_next(sizes)]
    cell_id = np.repeat(np.arange(len(sizes)), sizes)
    sizes = np.bincount(cell_id[keep], minlength=len(sizes))
    return compact(vertices, split_cells(flat[keep], sizes))


def compact(vertices: np.ndarray, cells: Sequence, extra: np.ndarray | None = None):
    """Drop unreferenced vertices and renumber in first-use order."""
    flat, sizes = flatten_cells(cells)
    uniq, first = np.unique(flat, return_index=True)
    order = uniq[np.argsort(first, kind="stable")]
    seen = np.full(len(vertices), -1, dtype=np.int64)
    seen[order] = np.arange(len(order))
    cells = split_cells(seen[flat], sizes)
    if extra is not None:
        return vertices[order], cells, seen[extra]
    return vertices[order], cells


def topological_boundary_edges(cells: Sequence) -> np.ndarray:
    """Directed boundary edges (as traversed by their single cell)."""
    a, sizes = flatten_cells(cells)
    b = a[ragged_next(sizes)]
    keys = np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1)
    _, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    once = counts[inv.ravel()] == 1
    return np.stack([a[once], b[once]], axis=1)


def build_mesh(vertices, cells, domain=None, provenance: Provenance | None = None, tagger=None) -> Mesh2D:
    """Assemble a Mesh2D, tagging each topological boundary edge.

    ``domain`` is a Domain or its id. ``tagger`` maps edge midpoints ``(m, 2)``
    to tags; by default the domain's
    nearest boundary piece is used, or ``"BOUNDARY"`` without a domain.
    """
    if isinstance(domain, str):
        domain = make_domain(domain)
    vertices = np.asarray(vertices, dtype=float)
    cells = [np.asarray(c, dtype=np.int64) for c in cells]
    be = topological_boundary_edges(cells) if cells else np.zeros((0, 2), np.int64)
    mids = 0.5 * (vertices[be[:, 0]] + vertices[be[:, 1]])
    if tagger is not None:
        tags = list(tagger(mids))
    elif domain is not None:
        tags = list(domain.nearest_tags(mids))
    else:
        tags = ["BOUNDARY"] * len(be)
    return Mesh2D(vertices, tuple(cells), be, tuple(tags), provenance or Provenance())


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------


def write_mesh(mesh: Mesh2D, path) -> None:
    """Write the ``polymesh 1`` text format (17 significant digits)."""
    lines = ["polymesh 1"]
    p = mesh.provenance
    lines.append(
        f"# provenance mesher={p.mesher} variant={p.variant} resolution={p.resolution!r} "
        f"seed={p.seed} domain={p.domain}"
    )
    lines.extend(f"v {x:.17g} {y:.17g}" for x, y in mesh.vertices)
    lines.extend("c " + " ".join(str(int(i)) for i in c) for c in mesh.cells)
    lines.extend(f"b {int(a)} {int(b)} {t}" for (a, b), t in zip(mesh.boundary_edges, mesh.boundary_tags))
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh2D:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != "polymesh 1":
        raise ValueError(f"{path}: missing 'polymesh 1' header")
    verts, cells, be, tags = [], [], [], []
    prov = Provenance()
    for ln, line in enumerate(text[1:], start=2):
        parts = line.split()
        if not parts:
            continue
        head = parts[0]
        if head == "#":
            if len(parts) > 1 and parts[1] == "provenance":
                kv = dict(p.split("=", 1) for p in parts[2:] if "=" in p)
                seed = kv.get("seed", "None")
                res = kv.get("resolution", "0")
                prov = Provenance(
                    mesher=kv.get("mesher", "raw"),
                    variant=kv.get("variant", ""),
                    resolution=float(res) if "." in res or "e" in res else int(res),
                    seed=None if seed == "None" else int(seed),
                    domain=kv.get("domain", ""),
                )
        elif head == "v":
            verts.append((float(parts[1]), float(parts[2])))
        elif head == "c":
            cells.append([int(t) for t in parts[1:]])
        elif head == "b":
            be.append((int(parts[1]), int(parts[2])))
            tags.append(parts[3] if len(parts) > 3 else "BOUNDARY")
        else:
            raise ValueError(f"{path}:{ln}: unknown record {head!r}")
    return Mesh2D(np.array(verts).reshape(-1, 2), tuple(cells), np.array(be, dtype=np.int64).reshape(-1, 2), tuple(tags), prov)
