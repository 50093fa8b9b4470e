"""The six benchmark geometries as signed distance functions.

Each :class:`Domain` carries its SDF (negative inside), a bounding box, the
exact boundary as tagged line segments and circular arcs, and the set of
mirror primitives used by the Voronoi generator to clip cells.

Geometry (fixed, reproducible):

=====  ====================================================================
US     [0,1]^2
UD     unit disk centred at the origin
BE     [0,8] x [-2,2]
PH     [0,2]^2 minus the quarter disk of radius 0.4 at the origin
SC     [0,1]^2 minus four disks of radius 0.12 at (0.25|0.75, 0.25|0.75)
LS     [-1,1]^2 minus [0,1]^2 (re-entrant corner at the origin)
=====  ====================================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

DOMAIN_IDS = ("US", "UD", "BE", "PH", "SC", "LS")


class UnknownDomainError(KeyError):
    pass


class BoundaryClassificationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# SDF primitives and algebra
# ---------------------------------------------------------------------------


def box_sdf(p, lo, hi):
    p = np.atleast_2d(p)
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
    d = np.abs(p - c) - h
    outside = np.linalg.norm(np.maximum(d, 0.0), axis=1)
    inside = np.minimum(np.maximum(d[:, 0], d[:, 1]), 0.0)
    return outside + inside


def circle_sdf(p, center, radius):
    p = np.atleast_2d(p)
    return np.linalg.norm(p - np.asarray(center, float), axis=1) - radius


def difference(a, b):
    return np.maximum(a, -b)


def union(a, b):
    return np.minimum(a, b)


# ---------------------------------------------------------------------------
# boundary pieces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    a: tuple
    b: tuple
    tag: str

    def project(self, p):
        a, b = np.asarray(self.a, float), np.asarray(self.b, float)
        d = b - a
        t = np.clip(((p - a) @ d) / (d @ d), 0.0, 1.0)
        return a + t[:, None] * d

    def length(self):
        return float(np.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1]))


@dataclass(frozen=True)
class Arc:
    """Counter-clockwise arc from angle ``t0`` to ``t1`` (radians)."""

    center: tuple
    radius: float
    t0: float
    t1: float
    tag: str

    def project(self, p):
        c = np.asarray(self.center, float)
        q = p - c
        ang = np.arctan2(q[:, 1], q[:, 0])
        span = self.t1 - self.t0
        rel = np.mod(ang - self.t0, 2 * math.pi)
        if span < 2 * math.pi - 1e-12:
            # outside the arc: clamp to the nearer endpoint
            out = rel > span
            to_end = rel - span
            to_start = 2 * math.pi - rel
            rel = np.where(out, np.where(to_end < to_start, span, 0.0), rel)
        t = self.t0 + rel
        return c + self.radius * np.stack([np.cos(t), np.sin(t)], axis=1)

    def length(self):
        return self.radius * (self.t1 - self.t0)


# ---------------------------------------------------------------------------
# mirror primitives for Voronoi clipping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MirrorLine:
    """Supporting line of the whole domain; mirrors never steal domain points."""

    point: tuple
    normal: tuple  # outward

    def side(self, p):
        return (p - np.asarray(self.point, float)) @ np.asarray(self.normal, float)

    def reflect(self, p, alpha):
        n = np.asarray(self.normal, float)
        d = self.side(p)  # negative inside
        return p - 2.0 * d[:, None] * n, d > -alpha


@dataclass(frozen=True)
class MirrorSegment:
    """Re-entrant wall: mirror only seeds facing its interior within ``alpha``."""

    a: tuple
    b: tuple

    def reflect(self, p, alpha):
        a, b = np.asarray(self.a, float), np.asarray(self.b, float)
        d = b - a
        L = math.hypot(*d)
        t = ((p - a) @ d) / (L * L)
        q = a + t[:, None] * d
        dist = np.linalg.norm(p - q, axis=1)
        keep = (t > 0.0) & (t < 1.0) & (dist < alpha)
        return 2.0 * q - p, keep


@dataclass(frozen=True)
class MirrorCircle:
    """Circle boundary; ``hole=True`` when the disk is excluded from the domain."""

    center: tuple
    radius: float
    hole: bool

    def reflect(self, p, alpha):
        c = np.asarray(self.center, float)
        q = p - c
        rho = np.linalg.norm(q, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = q / rho[:, None]
        gap = (rho - self.radius) if self.hole else (self.radius - rho)
        keep = (gap > 0) & (gap < alpha) & (rho > 0)
        if self.hole:
            keep &= gap < self.radius
        r_new = 2.0 * self.radius - rho
        return c + r_new[:, None] * u, keep


# ---------------------------------------------------------------------------
# Domain
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Domain:
    id: str
    sdf_fn: Callable
    bbox: tuple  # (xmin, ymin, xmax, ymax)
    pieces: tuple
    area: float
    features: np.ndarray
    holes: np.ndarray
    mirrors: tuple
    polygonal: bool
    outline: np.ndarray | None = None  # CCW loop, polygonal non-rectangular domains only

    def sdf(self, p):
        p = np.asarray(p, dtype=float)
        if p.ndim == 1:
            return float(self.sdf_fn(p[None, :])[0])
        return self.sdf_fn(p)

    @property
    def diagonal(self) -> float:
        x0, y0, x1, y1 = self.bbox
        return math.hypot(x1 - x0, y1 - y0)

    @property
    def boundary_tol(self) -> float:
        return 1e-7 * self.diagonal

    @property
    def tags(self) -> tuple:
        seen = []
        for pc in self.pieces:
            if pc.tag not in seen:
                seen.append(pc.tag)
        return tuple(seen)

    @property
    def is_rectangle(self) -> bool:
        return self.id in ("US", "BE")

    def project(self, points):
        """Nearest boundary points and the index of the piece they lie on."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        best = np.full(len(p), np.inf)
        proj = np.zeros_like(p)
        idx = np.zeros(len(p), dtype=np.int64)
        for k, pc in enumerate(self.pieces):
            q = pc.project(p)
            d = np.linalg.norm(q - p, axis=1)
            better = d < best - 1e-15
            best = np.where(better, d, best)
            proj[better] = q[better]
            idx[better] = k
        return proj, idx, best

    def nearest_tags(self, points):
        _, idx, _ = self.project(points)
        return [self.pieces[i].tag for i in idx]

    def boundary_tagger(self, p):
        return classify_boundary(self, p)

    def perimeter(self) -> float:
        return sum(pc.length() for pc in self.pieces)


def classify_boundary(domain: Domain, p, tol: float | None = None) -> str:
    """Tag of the boundary piece through ``p``; ``p`` must lie on the boundary."""
    p = np.asarray(p, dtype=float).reshape(1, 2)
    tol = domain.boundary_tol if tol is None else tol
    _, idx, dist = domain.project(p)
    if abs(domain.sdf(p[0])) > tol or dist[0] > tol:
        raise BoundaryClassificationError(f"point {p[0].tolist()} is not on the boundary of {domain.id}")
    return domain.pieces[int(idx[0])].tag


def _rect_pieces(x0, y0, x1, y1):
    return (
        Segment((x0, y0), (x1, y0), "BOTTOM"),
        Segment((x1, y0), (x1, y1), "RIGHT"),
        Segment((x1, y1), (x0, y1), "TOP"),
        Segment((x0, y1), (x0, y0), "LEFT"),
    )


def _rect_mirrors(x0, y0, x1, y1):
    return (
        MirrorLine((x0, y0), (0.0, -1.0)),
        MirrorLine((x1, y0), (1.0, 0.0)),
        MirrorLine((x0, y1), (0.0, 1.0)),
        MirrorLine((x0, y0), (-1.0, 0.0)),
    )


_SC_CENTERS = ((0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75))
_SC_RADIUS = 0.12
PH_HOLE_RADIUS = 0.4


def make_domain(domain_id: str) -> Domain:
    did = str(domain_id).upper()
    if did == "US":
        return Domain(
            "US",
            lambda p: box_sdf(p, (0, 0), (1, 1)),
            (0.0, 0.0, 1.0, 1.0),
            _rect_pieces(0.0, 0.0, 1.0, 1.0),
            1.0,
            np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float),
            np.zeros((0, 2)),
            _rect_mirrors(0.0, 0.0, 1.0, 1.0),
            True,
        )
    if did == "BE":
        return Domain(
            "BE",
            lambda p: box_sdf(p, (0, -2), (8, 2)),
            (0.0, -2.0, 8.0, 2.0),
            _rect_pieces(0.0, -2.0, 8.0, 2.0),
            32.0,
            np.array([[0, -2], [8, -2], [8, 2], [0, 2]], float),
            np.zeros((0, 2)),
            _rect_mirrors(0.0, -2.0, 8.0, 2.0),
            True,
        )
    if did == "UD":
        return Domain(
            "UD",
            lambda p: circle_sdf(p, (0, 0), 1.0),
            (-1.0, -1.0, 1.0, 1.0),
            (Arc((0.0, 0.0), 1.0, 0.0, 2 * math.pi, "OUTER"),),
            math.pi,
            np.zeros((0, 2)),
            np.zeros((0, 2)),
            (MirrorCircle((0.0, 0.0), 1.0, hole=False),),
            False,
        )
    if did == "PH":
        a = PH_HOLE_RADIUS
        return Domain(
            "PH",
            lambda p: difference(box_sdf(p, (0, 0), (2, 2)), circle_sdf(p, (0, 0), a)),
            (0.0, 0.0, 2.0, 2.0),
            (
                Segment((a, 0.0), (2.0, 0.0), "BOTTOM"),
                Segment((2.0, 0.0), (2.0, 2.0), "RIGHT"),
                Segment((2.0, 2.0), (0.0, 2.0), "TOP"),
                Segment((0.0, 2.0), (0.0, a), "LEFT"),
                Arc((0.0, 0.0), a, 0.0, 0.5 * math.pi, "HOLE"),
            ),
            4.0 - math.pi * a * a / 4.0,
            np.array([[2, 0], [2, 2], [0, 2], [0, a], [a, 0]], float),
            np.zeros((0, 2)),
            _rect_mirrors(0.0, 0.0, 2.0, 2.0) + (MirrorCircle((0.0, 0.0), a, hole=True),),
            False,
        )
    if did == "SC":
        r = _SC_RADIUS

        def sc(p):
            holes = np.min([circle_sdf(p, c, r) for c in _SC_CENTERS], axis=0)
            return difference(box_sdf(p, (0, 0), (1, 1)), holes)

        return Domain(
            "SC",
            sc,
            (0.0, 0.0, 1.0, 1.0),
            _rect_pieces(0.0, 0.0, 1.0, 1.0) + tuple(Arc(c, r, 0.0, 2 * math.pi, "HOLE") for c in _SC_CENTERS),
            1.0 - 4 * math.pi * r * r,
            np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float),
            np.array(_SC_CENTERS, float),
            _rect_mirrors(0.0, 0.0, 1.0, 1.0) + tuple(MirrorCircle(c, r, hole=True) for c in _SC_CENTERS),
            False,
        )
    if did == "LS":
        return Domain(
            "LS",
            # the removed box overhangs the square so its outer faces never touch the L
            lambda p: difference(box_sdf(p, (-1, -1), (1, 1)), box_sdf(p, (0, 0), (2, 2))),
            (-1.0, -1.0, 1.0, 1.0),
            (
                Segment((-1.0, -1.0), (1.0, -1.0), "BOTTOM"),
                Segment((1.0, -1.0), (1.0, 0.0), "RIGHT"),
                Segment((1.0, 0.0), (0.0, 0.0), "REENTRANT"),
                Segment((0.0, 0.0), (0.0, 1.0), "REENTRANT"),
                Segment((0.0, 1.0), (-1.0, 1.0), "TOP"),
                Segment((-1.0, 1.0), (-1.0, -1.0), "LEFT"),
            ),
            3.0,
            np.array([[-1, -1], [1, -1], [1, 0], [0, 0], [0, 1], [-1, 1]], float),
            np.zeros((0, 2)),
            _rect_mirrors(-1.0, -1.0, 1.0, 1.0)
            + (MirrorSegment((1.0, 0.0), (0.0, 0.0)), MirrorSegment((0.0, 0.0), (0.0, 1.0))),
            True,
            np.array([[-1, -1], [1, -1], [1, 0], [0, 0], [0, 1], [-1, 1]], float),
        )
    raise UnknownDomainError(f"unknown domain id {domain_id!r}; expected one of {DOMAIN_IDS}")


def sample_in_domain(domain: Domain, n: int, rng: np.random.Generator, max_draws: int = 10_000_000) -> np.ndarray:
    """Uniform rejection sampling of ``n`` points with ``sdf < 0``."""
    x0, y0, x1, y1 = domain.bbox
    out = []
    have = draws = 0
    batch = max(64, 2 * n)
    while have < n:
        pts = rng.uniform((x0, y0), (x1, y1), size=(batch, 2))
        draws += batch
        inside = pts[domain.sdf(pts) < 0]
        out.append(inside)
        have += len(inside)
        if draws >= max_draws and have / draws < 1e-4:
            raise ValueError(f"degenerate domain {domain.id}: acceptance rate {have / draws:.2e}")
    return np.concatenate(out)[:n]
