"""Lowest-order virtual elements for Poisson and linear elasticity.

On a cell with ``N`` vertices the local space is only known through its
vertex values. With scaled monomials ``m = {1, (x - xc)/h, (y - yc)/h}``:

* ``D[i, a] = m_a(v_i)``
* ``B[0, i] = 1/N`` and ``B[1:, i] = grad(m_a) . b_i`` with ``b_i`` the
  averaged edge normal ``(|e_{i-1}| n_{i-1} + |e_i| n_i) / 2``
* ``G = B D``, ``Pi_star = G^-1 B``, ``Pi = D Pi_star``

The consistency part integrates the projected gradients exactly; the
stabilisation acts on ``ker(Pi)`` only, so linear fields pass the patch
test on any cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from polypde.basis import cell_batches
from polypde.fem import (
    BasisBatch,
    DiscreteSystem,
    MaterialModel,
    Space,
    _eval,
    boundary_moments,
    local_dofs,
    scatter,
    strain_operator,
)
from polypde.mesh import InvalidPolygonError, Mesh2D, batched_area_centroid, batched_diameter


class VemElementError(ValueError):
    pass


class StabilizationKind(str, Enum):
    GAIN = "gain"
    DRECIPE = "drecipe"
    MODIFIED_DRECIPE = "modified-drecipe"

    @classmethod
    def parse(cls, value) -> "StabilizationKind":
        if value is None:
            return cls.MODIFIED_DRECIPE
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for s in cls:
            if key in (s.value, s.name.lower().replace("_", "-")):
                return s
        raise ValueError(f"unknown stabilization {value!r}; expected gain, drecipe or modified-drecipe")


DEFAULT_STABILIZATION = StabilizationKind.MODIFIED_DRECIPE


@dataclass
class VemElement:
    area: float
    centroid: np.ndarray
    diameter: float
    D: np.ndarray
    B: np.ndarray
    G: np.ndarray
    Pi_star: np.ndarray
    Pi: np.ndarray
    K_c: np.ndarray
    S: np.ndarray

    @property
    def K(self) -> np.ndarray:
        return self.K_c + self.S


# ---------------------------------------------------------------------------
# batched projections
# ---------------------------------------------------------------------------


@dataclass
class _Projection:
    area: np.ndarray  # (m,)
    xc: np.ndarray  # (m, 2)
    h: np.ndarray  # (m,)
    D: np.ndarray  # (m, k, 3)
    B: np.ndarray  # (m, 3, k)
    G: np.ndarray  # (m, 3, 3)
    Pi_star: np.ndarray  # (m, 3, k)
    Pi: np.ndarray  # (m, k, k)
    bnd: np.ndarray  # (m, k, 2)


def _projection(xy: np.ndarray) -> _Projection:
    m, k, _ = xy.shape
    area, xc = batched_area_centroid(xy)
    if not (area > 0).all():
        raise VemElementError(f"degenerate cell (area {area.min():.3e})")
    h = batched_diameter(xy)
    rel = (xy - xc[:, None, :]) / h[:, None, None]
    D = np.concatenate([np.ones((m, k, 1)), rel], axis=2)
    bnd = boundary_moments(xy)
    B = np.concatenate([np.full((m, 1, k), 1.0 / k), np.swapaxes(bnd, 1, 2) / h[:, None, None]], axis=1)
    G = B @ D
    if not (np.abs(np.linalg.det(G)) > 1e-14).all():
        raise VemElementError("singular projection matrix")
    Pi_star = np.linalg.solve(G, B)
    Pi = D @ Pi_star
    return _Projection(area, xc, h, D, B, G, Pi_star, Pi, bnd)


def _poisson_matrices(p: _Projection):
    Gt = p.G.copy()
    Gt[:, 0, :] = 0.0
    Kc = np.swapaxes(p.Pi_star, 1, 2) @ Gt @ p.Pi_star
    R = np.eye(p.Pi.shape[1]) - p.Pi
    S = np.swapaxes(R, 1, 2) @ R
    return Kc, S


def _vector_projector(Pi: np.ndarray) -> np.ndarray:
    m, k, _ = Pi.shape
    P = np.zeros((m, 2 * k, 2 * k))
    P[:, 0::2, 0::2] = Pi
    P[:, 1::2, 1::2] = Pi
    return P


def _elasticity_matrices(p: _Projection, material: MaterialModel, stab: StabilizationKind):
    g = p.bnd / p.area[:, None, None]  # projected (cell-average) gradients
    Be = strain_operator(g)
    Kc = p.area[:, None, None] * np.einsum("mai,ab,mbj->mij", Be, material.C, Be)
    n = Kc.shape[1]
    diag = np.einsum("mii->mi", Kc)
    if stab is StabilizationKind.GAIN:
        s = np.repeat((diag.sum(1) / n)[:, None], n, axis=1)
    elif stab is StabilizationKind.DRECIPE:
        s = np.maximum(1.0, diag)
    else:
        s = np.maximum(diag, diag.mean(1, keepdims=True))
    R = np.eye(n) - _vector_projector(p.Pi)
    S = np.einsum("mki,mk,mkj->mij", R, s, R)
    return Kc, S


# ---------------------------------------------------------------------------
# local element API
# ---------------------------------------------------------------------------


def _cell_projection(cell) -> _Projection:
    xy = np.asarray(cell, dtype=float)
    if xy.ndim != 2 or len(xy) < 3:
        raise InvalidPolygonError("a VEM cell needs at least 3 vertices")
    return _projection(xy[None])


def _element(p: _Projection, Kc, S) -> VemElement:
    return VemElement(
        float(p.area[0]), p.xc[0], float(p.h[0]), p.D[0], p.B[0], p.G[0], p.Pi_star[0], p.Pi[0], Kc[0], S[0]
    )


def vem_local_poisson(cell) -> VemElement:
    p = _cell_projection(cell)
    Kc, S = _poisson_matrices(p)
    return _element(p, Kc, S)


def vem_local_elasticity(cell, material: MaterialModel | None = None, stab=None) -> VemElement:
    p = _cell_projection(cell)
    Kc, S = _elasticity_matrices(p, material or MaterialModel(), StabilizationKind.parse(stab))
    return _element(p, Kc, S)


def vem_project_solution(element: VemElement, local_dofs) -> np.ndarray:
    """Scaled-monomial coefficients of the projected linear polynomial.

    Scalar DOFs ``(k,)`` give ``(3,)``; vector DOFs ``(k, 2)`` or interleaved
    ``(2k,)`` give ``(3, 2)``, one column per component.
    """
    u = np.asarray(local_dofs, dtype=float)
    k = element.Pi_star.shape[1]
    if u.shape == (2 * k,):
        u = u.reshape(k, 2)
    return element.Pi_star @ u


def eval_projection(element: VemElement, coeffs: np.ndarray, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rel = (x - element.centroid) / element.diameter
    m = np.concatenate([np.ones((len(x), 1)), rel], axis=1)
    return m @ coeffs


# ---------------------------------------------------------------------------
# global assembly
# ---------------------------------------------------------------------------


class VemSpace(Space):
    """Vertex DOFs; evaluation returns the projected polynomial basis ``Pi phi_i``."""

    basis_id = "VEM"

    def __init__(self, mesh: Mesh2D, stab=None):
        super().__init__(mesh)
        self.stabilization = StabilizationKind.parse(stab)

    def batches(self, degree, exact=False, refine=None):
        out = []
        for b in cell_batches(self.mesh, degree, refine=refine):
            p = _projection(b.xy)
            rel = (b.points - p.xc[:, None, :]) / p.h[:, None, None]
            mono = np.concatenate([np.ones(rel.shape[:-1] + (1,)), rel], axis=-1)  # (m, q, 3)
            vals = np.einsum("mqa,mak->mqk", mono, p.Pi_star)
            g = np.swapaxes(p.Pi_star[:, 1:, :], 1, 2) / p.h[:, None, None]  # (m, k, 2)
            grads = np.broadcast_to(g[:, None], vals.shape + (2,))
            out.append(BasisBatch(b.ids, b.loops, b.weights, b.points, vals, grads))
        return out


def _average_load(p: _Projection, k: int, rhs, n_comp: int) -> np.ndarray:
    m = len(p.area)
    if rhs is None:
        return np.zeros((m, k * n_comp))
    fc = _eval(rhs, p.xc[:, None, :], n_comp)[:, 0]  # (m,) or (m, c)
    w = np.repeat((p.area / k)[:, None], k, axis=1)
    if n_comp == 1:
        return w * fc[:, None]
    return (w[:, :, None] * fc[:, None, :]).reshape(m, k * n_comp)


def vem_assemble(
    mesh: Mesh2D, problem_kind: str, material: MaterialModel | None = None, rhs=None, stab=None, load: str = "average"
) -> DiscreteSystem:
    """Assemble the global VEM system.

    ``load="average"`` uses the lowest-order rule ``f_i = |E|/N rhs(xc)``;
    ``load="projected"`` integrates ``(Pi phi_i) rhs`` with a cell quadrature.
    """
    kind = str(problem_kind).lower()
    if kind not in ("poisson", "elasticity"):
        raise ValueError(f"unknown problem kind {problem_kind!r}")
    n_comp = 1 if kind == "poisson" else 2
    stab_kind = StabilizationKind.parse(stab)
    if load not in ("average", "projected"):
        raise ValueError(f"unknown VEM load rule {load!r}")
    if kind == "elasticity" and material is None:
        material = MaterialModel()
    space = VemSpace(mesh, stab_kind)
    dofs, mats, vecs = [], [], []
    v = mesh.vertices
    for k, (ids, loops) in mesh.groups.items():
        p = _projection(v[loops])
        Kc, S = _poisson_matrices(p) if n_comp == 1 else _elasticity_matrices(p, material, stab_kind)
        dofs.append(local_dofs(loops, n_comp))
        mats.append(Kc + S)
        if load == "projected":
            vecs.append(np.zeros((len(ids), k * n_comp)))
        else:
            vecs.append(_average_load(p, k, rhs, n_comp))
    if load == "projected" and rhs is not None:
        for b in space.batches(2):
            d = local_dofs(b.nodes, n_comp)
            fb = _eval(rhs, b.points, n_comp)
            if n_comp == 1:
                val = np.einsum("mq,mqi,mq->mi", b.weights, b.values, fb)
            else:
                val = np.einsum("mq,mqi,mqc->mic", b.weights, b.values, fb).reshape(d.shape)
            dofs.append(d)
            mats.append(np.zeros((len(b.ids), d.shape[1], d.shape[1])))
            vecs.append(val)
    n = mesh.n_vertices
    K, f = scatter(n_comp * n, dofs, mats, vecs)
    dof_map = n_comp * np.arange(n)[:, None] + np.arange(n_comp)
    return DiscreteSystem(K, f, dof_map, space, kind, material)
