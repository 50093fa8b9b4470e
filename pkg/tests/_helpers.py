"""Random geometry shared by the unit and acceptance tests."""

import numpy as np

from polypde.mesh import build_mesh
from polypde.tiled import tile_shape


def random_triangle(rng, min_area=1e-2):
    while True:
        t = rng.uniform(-1, 1, (3, 2))
        a = 0.5 * ((t[1, 0] - t[0, 0]) * (t[2, 1] - t[0, 1]) - (t[1, 1] - t[0, 1]) * (t[2, 0] - t[0, 0]))
        if abs(a) > min_area:
            return t if a > 0 else t[::-1].copy()


def random_convex_polygon(rng, k=None):
    """Sorted random angles on a jittered circle; strictly convex by construction."""
    k = int(rng.integers(4, 10)) if k is None else k
    while True:
        th = np.sort(rng.uniform(0, 2 * np.pi, k))
        gaps = np.diff(np.r_[th, th[0] + 2 * np.pi])
        if gaps.min() > 0.15 and gaps.max() < np.pi - 0.15:
            r = rng.uniform(0.5, 1.5)
            return r * np.c_[np.cos(th), np.sin(th)] + rng.uniform(-1, 1, 2)


def random_star_polygon(rng, k=None):
    """Simple, generally concave polygon star-shaped about the origin."""
    k = int(rng.integers(5, 12)) if k is None else k
    th = np.sort(rng.uniform(0, 2 * np.pi, k))
    while np.diff(np.r_[th, th[0] + 2 * np.pi]).max() >= np.pi - 0.1:
        th = np.sort(rng.uniform(0, 2 * np.pi, k))
    r = rng.uniform(0.3, 1.0, k)
    return r[:, None] * np.c_[np.cos(th), np.sin(th)]


def points_in_triangle(rng, tri, n):
    u = rng.dirichlet([1, 1, 1], n)
    return u @ tri


def points_in_polygon(rng, xy, n, margin=1e-3):
    from polypde.mesh import point_in_polygon

    lo, hi = xy.min(0), xy.max(0)
    out = []
    while sum(len(o) for o in out) < n:
        p = rng.uniform(lo, hi, (4 * n, 2))
        ok = point_in_polygon(p, xy)
        # keep away from edges where the coordinates are singular
        d = np.min([_seg_dist(p, xy[i], xy[(i + 1) % len(xy)]) for i in range(len(xy))], axis=0)
        out.append(p[ok & (d > margin)])
    return np.concatenate(out)[:n]


def _seg_dist(p, a, b):
    d = b - a
    t = np.clip(((p - a) @ d) / (d @ d), 0, 1)
    return np.linalg.norm(p - (a + t[:, None] * d), axis=1)


def u_tile():
    return tile_shape("TP3")


def single_cell_mesh(xy):
    xy = np.asarray(xy, dtype=float)
    return build_mesh(xy, [np.arange(len(xy))])


def linear_scalar(p):
    return 1 + 2 * p[:, 0] - 3 * p[:, 1]


def linear_vector(p):
    return np.c_[0.1 + 0.2 * p[:, 0] - 0.3 * p[:, 1], -0.2 + 0.05 * p[:, 0] + 0.4 * p[:, 1]]


def patch_error(mesh, method, kind):
    """Max nodal error, relative to the field's max, for a linear exact solution."""
    from polypde.fem import MaterialModel, apply_dirichlet, assemble_elasticity, assemble_poisson
    from polypde.solver import solve_direct

    if kind == "poisson":
        u = linear_scalar
        system = assemble_poisson(mesh, method)
    else:
        u = linear_vector
        system = assemble_elasticity(mesh, method, MaterialModel())
    system = apply_dirichlet(system, None, u)
    x = solve_direct(system).solution[system.dof_map]
    exact = u(system.space.node_xy).reshape(x.shape)
    return float(np.abs(x - exact).max() / np.abs(exact).max())
