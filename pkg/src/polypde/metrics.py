"""L2 and H1-seminorm errors and log-log convergence-rate fitting.

The discrete field on each cell is the space's own representation: the
Lagrange interpolant, the barycentric expansion (with exact gradients) or
the VEM projection. Integration uses the basis default degree plus two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from polypde.basis import MAX_DEGREE
from polypde.fem import DEFAULT_QUAD_DEGREE, DiscreteSystem, Space


class DofMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class ErrorReport:
    l2: float
    h1: float


def _space_of(discretization) -> Space:
    return discretization.space if isinstance(discretization, DiscreteSystem) else discretization


def error_degree(space: Space) -> int:
    return min(DEFAULT_QUAD_DEGREE[space.basis_id] + 2, MAX_DEGREE)


def cells_near(mesh, point, tol: float = 1e-10) -> np.ndarray:
    """Cells with a vertex within ``tol`` (relative to the mesh size) of ``point``."""
    if point is None:
        return np.zeros(0, dtype=np.int64)
    x0, y0 = mesh.vertices.min(0)
    x1, y1 = mesh.vertices.max(0)
    scale = np.hypot(x1 - x0, y1 - y0)
    near = np.hypot(*(mesh.vertices - np.asarray(point, float)).T) <= tol * scale
    if not near.any():
        return np.zeros(0, dtype=np.int64)
    return np.array([i for i, c in enumerate(mesh.cells) if near[c].any()], dtype=np.int64)


def compute_errors(discretization, solution_dofs, u_exact, grad_exact, quad_degree=None, singular_point=None) -> ErrorReport:
    space = _space_of(discretization)
    u = np.asarray(solution_dofs, dtype=float).ravel()
    if len(u) % space.n_nodes:
        raise DofMismatchError(f"{len(u)} DOFs do not match {space.n_nodes} nodes")
    n_comp = len(u) // space.n_nodes
    U = u.reshape(space.n_nodes, n_comp)
    deg = error_degree(space) if quad_degree is None else int(quad_degree)
    refine = cells_near(space.mesh, singular_point)
    l2 = h1 = 0.0
    for b in space.batches(deg, exact=True, refine=refine if len(refine) else None):
        loc = U[b.nodes]  # (m, n, c)
        uh = np.einsum("mqn,mnc->mqc", b.values, loc)
        gh = np.einsum("mqnd,mnc->mqcd", b.grads, loc)
        pts = b.points.reshape(-1, 2)
        ue = np.asarray(u_exact(pts), dtype=float).reshape(uh.shape)
        l2 += float(np.einsum("mq,mqc->", b.weights, (uh - ue) ** 2))
        if grad_exact is not None:
            ge = np.asarray(grad_exact(pts), dtype=float).reshape(gh.shape)
            h1 += float(np.einsum("mq,mqcd->", b.weights, (gh - ge) ** 2))
    return ErrorReport(np.sqrt(l2), np.sqrt(h1) if grad_exact is not None else float("nan"))


def l2_error(discretization, solution_dofs, exact, **kw) -> float:
    return compute_errors(discretization, solution_dofs, exact, None, **kw).l2


def h1_error(discretization, solution_dofs, exact, grad_exact, **kw) -> float:
    return compute_errors(discretization, solution_dofs, exact, grad_exact, **kw).h1


def problem_errors(system: DiscreteSystem, solution_dofs, problem, quad_degree=None) -> ErrorReport:
    sol = problem.solution
    return compute_errors(system, solution_dofs, sol.u_exact, sol.grad_exact, quad_degree, problem.singular_point)


def fit_convergence_rate(pairs) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if len(arr) < 3:
        raise ValueError("need at least 3 (h, error) pairs")
    if not (arr > 0).all() or not np.isfinite(arr).all():
        raise ValueError("h and error must be finite and positive")
    slope, _ = np.polyfit(np.log(arr[:, 0]), np.log(arr[:, 1]), 1)
    return float(slope)


def h_max(mesh) -> float:
    return float(mesh.cell_diameters.max())
