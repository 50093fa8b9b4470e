"""Displaced structured-grid polygonal meshes, variants DP1-DP5.

With ``(u, v)`` the normalised grid coordinates and ``A = 0.3 / max(nx, ny)``:

* DP1 identity
* DP2 graded, ``u -> u^2`` and ``v -> v^2``
* DP3 checkerboard shift of ``+-(A, A)`` by the parity of ``i + j``
* DP4 sinusoidal warp ``(A sin 2 pi v, A sin 2 pi u)``
* DP5 i.i.d. uniform noise in ``[-A, A]^2``

Vertices on the bounding box are pinned; DP2 slides them along their own
side, which leaves the boundary unchanged as a set. Other domains are cut
out of the displaced bbox grid.
"""

from __future__ import annotations

import math

import numpy as np

from polypde._clip import ARC_SPACING, clip_cells, grid_quads, grid_vertices, uv_to_xy
from polypde.domains import Domain, make_domain
from polypde.mesh import Mesh2D, Provenance, batched_area_centroid, build_mesh

DP_VARIANTS = ("DP1", "DP2", "DP3", "DP4", "DP5")


class TanglingError(RuntimeError):
    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


def displacement(uv: np.ndarray, nx: int, ny: int, variant: str, rng_seed=None) -> np.ndarray:
    """Displaced normalised coordinates for every grid vertex (pinning is done by the caller)."""
    A = 0.3 / max(nx, ny)
    u, v = uv[:, 0], uv[:, 1]
    if variant == "DP1":
        return uv.copy()
    if variant == "DP2":
        return np.stack([u**2, v**2], axis=1)
    if variant == "DP3":
        i = np.rint(u * nx).astype(np.int64)
        j = np.rint(v * ny).astype(np.int64)
        sgn = np.where((i + j) % 2 == 0, 1.0, -1.0)
        return uv + A * sgn[:, None]
    if variant == "DP4":
        return uv + A * np.stack([np.sin(2 * np.pi * v), np.sin(2 * np.pi * u)], axis=1)
    if variant == "DP5":
        rng = np.random.default_rng(rng_seed)
        return uv + rng.uniform(-A, A, size=uv.shape)
    raise ValueError(f"unknown displaced variant {variant!r}")


def displaced_mesh(domain, nx: int, ny: int, variant: str, rng_seed: int | None = 0) -> Mesh2D:
    domain = domain if isinstance(domain, Domain) else make_domain(domain)
    variant = str(variant).upper()
    if variant not in DP_VARIANTS:
        raise ValueError(f"unknown displaced variant {variant!r}")
    nx, ny = int(nx), int(ny)
    if nx < 1 or ny < 1:
        raise ValueError("nx, ny must be >= 1")
    _, uv = grid_vertices(domain, nx, ny)
    moved = displacement(uv, nx, ny, variant, rng_seed)
    on_box = (uv == 0.0).any(axis=1) | (uv == 1.0).any(axis=1)
    # the DP2 map sends each side of the box onto itself
    new_uv = moved if variant == "DP2" else np.where(on_box[:, None], uv, moved)
    xy = uv_to_xy(domain, new_uv)
    quads = grid_quads(nx, ny)
    area, _ = batched_area_centroid(xy[quads])
    bad = np.flatnonzero(~(area > 0))
    if len(bad):
        raise TanglingError(f"displacement tangles cell {int(bad[0])}", int(bad[0]))
    prov = Provenance("DP", variant, nx * ny, rng_seed, domain.id)
    if domain.is_rectangle:
        return build_mesh(xy, list(quads), domain, prov)
    x0, y0, x1, y1 = domain.bbox
    min_area = 1e-3 * (x1 - x0) * (y1 - y0) / (nx * ny)
    spacing = ARC_SPACING * math.sqrt((x1 - x0) * (y1 - y0) / (nx * ny))
    verts, cells = clip_cells(domain, xy, list(quads), min_area=min_area, spacing=spacing)
    return build_mesh(verts, cells, domain, prov)
