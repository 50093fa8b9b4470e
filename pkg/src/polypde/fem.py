"""Galerkin assembly for Poisson and linear elasticity with explicit bases.

A *space* maps mesh nodes to DOFs and yields, per batch of cells, the basis
values and gradients at quadrature points. Lagrange P1/P2 need an
all-triangle mesh; the barycentric spaces (mean value, Wachspress) work on
polygons. Elasticity DOFs are interleaved ``(x0, y0, x1, y1, ...)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from polypde.basis import GBC, areal_coordinates, cell_batches, map_triangle_rule, p1_gradients, p2_values_gradients, split4
from polypde.mesh import Mesh2D

BASIS_IDS = ("P1", "P2", "MV", "WACHSPRESS")
DEFAULT_QUAD_DEGREE = {"P1": 2, "P2": 4, "MV": 4, "WACHSPRESS": 4, "VEM": 2}

# 3-point Gauss-Legendre on [0, 1]
_GL_T = 0.5 + 0.5 * np.array([-np.sqrt(3 / 5), 0.0, np.sqrt(3 / 5)])
_GL_W = np.array([5 / 18, 8 / 18, 5 / 18])


class IncompatibleBasisError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class MaterialModel:
    E: float = 1e7
    nu: float = 0.3
    mode: str = "plane-strain"

    def __post_init__(self):
        if not self.E > 0 or not 0 <= self.nu < 0.5:
            raise ValueError("need E > 0 and 0 <= nu < 0.5")
        if self.mode not in ("plane-stress", "plane-strain"):
            raise ValueError(f"unknown elasticity mode {self.mode!r}")

    @property
    def mu(self) -> float:
        return self.E / (2 * (1 + self.nu))

    @property
    def lam(self) -> float:
        E, nu = self.E, self.nu
        if self.mode == "plane-strain":
            return E * nu / ((1 + nu) * (1 - 2 * nu))
        return E * nu / (1 - nu * nu)

    @property
    def C(self) -> np.ndarray:
        """Voigt matrix acting on ``(eps_xx, eps_yy, gamma_xy)``."""
        l, m = self.lam, self.mu
        return np.array([[l + 2 * m, l, 0.0], [l, l + 2 * m, 0.0], [0.0, 0.0, m]])

    def stress(self, grad: np.ndarray) -> np.ndarray:
        """Cauchy stress ``(..., 2, 2)`` from displacement gradients ``(..., 2, 2)`` (``grad[..., i, j] = du_i/dx_j``)."""
        eps = 0.5 * (grad + np.swapaxes(grad, -1, -2))
        tr = eps[..., 0, 0] + eps[..., 1, 1]
        return 2 * self.mu * eps + self.lam * tr[..., None, None] * np.eye(2)


@dataclass
class BasisBatch:
    ids: np.ndarray  # (m,) cells
    nodes: np.ndarray  # (m, n) global node ids
    weights: np.ndarray  # (m, q)
    points: np.ndarray  # (m, q, 2)
    values: np.ndarray  # (m, q, n)
    grads: np.ndarray  # (m, q, n, 2)


# ---------------------------------------------------------------------------
# spaces
# ---------------------------------------------------------------------------


class Space:
    """Nodes, DOFs and per-cell basis evaluation on one mesh."""

    basis_id: str
    edge_order = 1  # polynomial order of the trace on an edge

    def __init__(self, mesh: Mesh2D):
        self.mesh = mesh

    @property
    def n_nodes(self) -> int:
        return len(self.node_xy)

    @property
    def node_xy(self) -> np.ndarray:
        return self.mesh.vertices

    def batches(self, degree: int, exact: bool = False, refine=None) -> list[BasisBatch]:
        raise NotImplementedError

    def edge_nodes(self, edges: np.ndarray) -> np.ndarray:
        """Nodes carried by each edge: two endpoints (and the midpoint for P2)."""
        return np.asarray(edges, dtype=np.int64).reshape(-1, 2)

    def edge_shapes(self, t: np.ndarray) -> np.ndarray:
        """Trace of the edge nodes' basis functions at parameters ``t``: ``(len(t), n_e)``."""
        return np.stack([1 - t, t], axis=1)


class P1Space(Space):
    basis_id = "P1"

    def __init__(self, mesh: Mesh2D):
        if not mesh.is_triangular:
            raise IncompatibleBasisError("P1 needs an all-triangle mesh")
        super().__init__(mesh)

    def batches(self, degree, exact=False, refine=None):
        tris = self.mesh.triangles
        xy = self.mesh.vertices[tris]
        g, _ = p1_gradients(xy)
        out = []
        for ids, sub in _triangle_subsets(xy, refine):
            pts, w = map_triangle_rule(sub, degree)
            pts, w = pts.reshape(len(ids), -1, 2), w.reshape(len(ids), -1)
            lam = areal_coordinates(xy[ids], pts)
            grads = np.broadcast_to(g[ids][:, None], lam.shape + (2,))
            out.append(BasisBatch(ids, tris[ids], w, pts, lam, grads))
        return out


class P2Space(Space):
    basis_id = "P2"
    edge_order = 2

    def __init__(self, mesh: Mesh2D):
        if not mesh.is_triangular:
            raise IncompatibleBasisError("P2 needs an all-triangle mesh")
        super().__init__(mesh)
        nv = mesh.n_vertices
        e = np.stack(mesh.cell_edges)  # (t, 3), local edge (i, i+1)
        self.cell_nodes = np.concatenate([mesh.triangles, nv + e], axis=1)
        v = mesh.vertices
        self._node_xy = np.vstack([v, 0.5 * (v[mesh.edges[:, 0]] + v[mesh.edges[:, 1]])])

    @property
    def node_xy(self):
        return self._node_xy

    def batches(self, degree, exact=False, refine=None):
        tris = self.mesh.triangles
        xy = self.mesh.vertices[tris]
        g, _ = p1_gradients(xy)
        out = []
        for ids, sub in _triangle_subsets(xy, refine):
            pts, w = map_triangle_rule(sub, degree)
            pts, w = pts.reshape(len(ids), -1, 2), w.reshape(len(ids), -1)
            lam = areal_coordinates(xy[ids], pts)
            val, grad = p2_values_gradients(lam, g[ids])
            out.append(BasisBatch(ids, self.cell_nodes[ids], w, pts, val, grad))
        return out

    def edge_nodes(self, edges):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        keys = np.sort(edges, axis=1)
        E = self.mesh.edges
        code = E[:, 0] * self.mesh.n_vertices + E[:, 1]
        idx = np.searchsorted(code, keys[:, 0] * self.mesh.n_vertices + keys[:, 1])
        return np.concatenate([edges, self.mesh.n_vertices + idx[:, None]], axis=1)

    def edge_shapes(self, t):
        return np.stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)], axis=1)


class BarycentricSpace(Space):
    """Generalised barycentric coordinates as nodal basis on polygons.

    Assembly uses gradients corrected by a per-cell constant so that the
    quadrature of each gradient equals its exact boundary integral; this
    keeps the patch test exact under inexact quadrature of the rational
    shape functions. ``exact=True`` returns the uncorrected gradients.
    """

    def __init__(self, mesh: Mesh2D, basis_id: str):
        basis_id = basis_id.upper()
        if basis_id not in GBC:
            raise ValueError(f"unknown barycentric basis {basis_id!r}")
        if basis_id == "WACHSPRESS" and not mesh.is_strictly_convex.all():
            bad = int(np.flatnonzero(~mesh.is_strictly_convex)[0])
            raise IncompatibleBasisError(f"Wachspress needs strictly convex cells (cell {bad} is not)")
        super().__init__(mesh)
        self.basis_id = basis_id
        self._fn = GBC[basis_id]

    def batches(self, degree, exact=False, refine=None):
        out = []
        for b in cell_batches(self.mesh, degree, refine=refine):
            lam, grad = self._fn(b.xy, b.points)
            if not exact:
                bnd = boundary_moments(b.xy)  # (m, k, 2)
                area = b.weights.sum(1)
                corr = (bnd - np.einsum("mq,mqkd->mkd", b.weights, grad)) / area[:, None, None]
                grad = grad + corr[:, None]
            out.append(BasisBatch(b.ids, b.loops, b.weights, b.points, lam, grad))
        return out


def boundary_moments(xy: np.ndarray) -> np.ndarray:
    """``b_i = (|e_{i-1}| n_{i-1} + |e_i| n_i) / 2``, the exact integral of grad(phi_i)."""
    d = np.roll(xy, -1, axis=-2) - np.roll(xy, 1, axis=-2)
    return 0.5 * np.stack([d[..., 1], -d[..., 0]], axis=-1)


def _triangle_subsets(xy: np.ndarray, refine):
    """``(ids, sub-triangles)`` pairs; refined triangles are split into four."""
    n = len(xy)
    mask = np.zeros(n, dtype=bool)
    if refine is not None:
        mask[np.asarray(refine, dtype=np.int64)] = True
    plain = np.flatnonzero(~mask)
    out = []
    if len(plain):
        out.append((plain, xy[plain][:, None]))
    ref = np.flatnonzero(mask)
    if len(ref):
        out.append((ref, split4(xy[ref]).reshape(len(ref), 4, 3, 2)))
    return out


def make_space(mesh: Mesh2D, basis_id: str) -> Space:
    bid = str(basis_id).upper()
    if bid == "P1":
        return P1Space(mesh)
    if bid == "P2":
        return P2Space(mesh)
    if bid in GBC:
        return BarycentricSpace(mesh, bid)
    if bid == "VEM":
        from polypde.vem import VemSpace

        return VemSpace(mesh)
    raise ValueError(f"unknown basis id {basis_id!r}")


def check_compatible(mesh: Mesh2D, basis_id: str) -> str | None:
    """Reason the basis cannot run on the mesh, or None."""
    bid = str(basis_id).upper().split(":")[0]
    if bid in ("P1", "P2") and not mesh.is_triangular:
        return f"{bid} needs an all-triangle mesh"
    if bid == "WACHSPRESS" and not mesh.is_strictly_convex.all():
        return "Wachspress needs strictly convex cells"
    if bid not in BASIS_IDS + ("VEM",):
        return f"unknown basis {basis_id!r}"
    return None


# ---------------------------------------------------------------------------
# systems
# ---------------------------------------------------------------------------


@dataclass
class DiscreteSystem:
    K: sp.csr_matrix
    f: np.ndarray
    dof_map: np.ndarray  # (n_nodes, n_comp)
    space: Space
    kind: str = "poisson"
    material: MaterialModel | None = None
    constrained_dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    constrained_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_dofs(self) -> int:
        return self.K.shape[0]

    @property
    def n_comp(self) -> int:
        return self.dof_map.shape[1]

    @property
    def constrained(self) -> dict:
        return dict(zip(self.constrained_dofs.tolist(), self.constrained_values.tolist()))

    def free_dofs(self) -> np.ndarray:
        fixed = np.zeros(self.n_dofs, dtype=bool)
        fixed[self.constrained_dofs] = True
        return np.flatnonzero(~fixed)

    def reduced(self):
        """``(A_ff, b_f)`` over the free DOFs, known values moved to the right-hand side."""
        free = self.free_dofs()
        ubar = np.zeros(self.n_dofs)
        ubar[self.constrained_dofs] = self.constrained_values
        b = (self.f - self.K @ ubar)[free]
        A = self.K[free][:, free].tocsr()
        A.sort_indices()
        return A, b

    def expand(self, x_free: np.ndarray) -> np.ndarray:
        """Full DOF vector from the free-DOF solution."""
        u = np.zeros(self.n_dofs)
        u[self.constrained_dofs] = self.constrained_values
        u[self.free_dofs()] = x_free
        return u

    def condensed(self):
        """``(A, b)`` with Dirichlet DOFs eliminated symmetrically (identity rows)."""
        n = self.n_dofs
        fixed = np.zeros(n, dtype=bool)
        fixed[self.constrained_dofs] = True
        ubar = np.zeros(n)
        ubar[self.constrained_dofs] = self.constrained_values
        free = sp.diags((~fixed).astype(float))
        A = (free @ self.K @ free + sp.diags(fixed.astype(float))).tocsr()
        A.sort_indices()
        b = np.where(fixed, ubar, self.f - self.K @ ubar)
        return A, b


def element_stiffness_poisson(batch: BasisBatch) -> np.ndarray:
    return np.einsum("mq,mqid,mqjd->mij", batch.weights, batch.grads, batch.grads)


def strain_operator(g: np.ndarray) -> np.ndarray:
    """Voigt strain operator ``(..., 3, 2n)`` from nodal gradients ``(..., n, 2)``."""
    n = g.shape[-2]
    B = np.zeros(g.shape[:-2] + (3, 2 * n))
    B[..., 0, 0::2] = g[..., 0]
    B[..., 1, 1::2] = g[..., 1]
    B[..., 2, 0::2] = g[..., 1]
    B[..., 2, 1::2] = g[..., 0]
    return B


def element_stiffness_elasticity(batch: BasisBatch, material: MaterialModel) -> np.ndarray:
    B = strain_operator(batch.grads)
    return np.einsum("mq,mqai,ab,mqbj->mij", batch.weights, B, material.C, B)


def _eval(fn, pts: np.ndarray, n_comp: int) -> np.ndarray:
    vals = np.asarray(fn(pts.reshape(-1, 2)), dtype=float)
    return vals.reshape(pts.shape[:-1] + ((n_comp,) if n_comp > 1 else ()))


def local_dofs(nodes: np.ndarray, n_comp: int) -> np.ndarray:
    if n_comp == 1:
        return nodes
    return (n_comp * nodes[..., None] + np.arange(n_comp)).reshape(nodes.shape[0], -1)


def scatter(n: int, dofs: list, mats: list, vecs: list):
    rows = np.concatenate([np.repeat(d, d.shape[1], axis=1).ravel() for d in dofs]) if dofs else np.zeros(0, int)
    cols = np.concatenate([np.tile(d, (1, d.shape[1])).ravel() for d in dofs]) if dofs else np.zeros(0, int)
    data = np.concatenate([m.ravel() for m in mats]) if mats else np.zeros(0)
    K = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    # duplicates are summed in different orders for (i, j) and (j, i)
    K = ((K + K.T) * 0.5).tocsr()
    K.sum_duplicates()
    K.sort_indices()
    f = np.zeros(n)
    for d, v in zip(dofs, vecs):
        np.add.at(f, d.ravel(), v.ravel())
    return K, f


def assemble_poisson(mesh: Mesh2D, basis_id: str, rhs=None, quad_degree: int | None = None) -> DiscreteSystem:
    bid = str(basis_id).upper()
    if bid.startswith("VEM"):
        from polypde.vem import vem_assemble

        return vem_assemble(mesh, "poisson", rhs=rhs)
    space = make_space(mesh, bid)
    deg = DEFAULT_QUAD_DEGREE[bid] if quad_degree is None else int(quad_degree)
    dofs, mats, vecs = [], [], []
    for b in space.batches(deg):
        dofs.append(b.nodes)
        mats.append(element_stiffness_poisson(b))
        if rhs is None:
            vecs.append(np.zeros(b.nodes.shape))
        else:
            vecs.append(np.einsum("mq,mqi,mq->mi", b.weights, b.values, _eval(rhs, b.points, 1)))
    K, f = scatter(space.n_nodes, dofs, mats, vecs)
    return DiscreteSystem(K, f, np.arange(space.n_nodes)[:, None], space, "poisson")


def assemble_elasticity(
    mesh: Mesh2D, basis_id: str, material: MaterialModel | None = None, body_force=None, quad_degree: int | None = None
) -> DiscreteSystem:
    material = material or MaterialModel()
    bid = str(basis_id).upper()
    if bid.startswith("VEM"):
        from polypde.vem import vem_assemble

        stab = bid.split(":", 1)[1] if ":" in bid else None
        return vem_assemble(mesh, "elasticity", material=material, rhs=body_force, stab=stab)
    space = make_space(mesh, bid)
    deg = DEFAULT_QUAD_DEGREE[bid] if quad_degree is None else int(quad_degree)
    dofs, mats, vecs = [], [], []
    for b in space.batches(deg):
        d = local_dofs(b.nodes, 2)
        dofs.append(d)
        mats.append(element_stiffness_elasticity(b, material))
        if body_force is None:
            vecs.append(np.zeros(d.shape))
        else:
            fb = _eval(body_force, b.points, 2)
            vecs.append(np.einsum("mq,mqi,mqc->mic", b.weights, b.values, fb).reshape(d.shape))
    n = space.n_nodes
    K, f = scatter(2 * n, dofs, mats, vecs)
    return DiscreteSystem(K, f, 2 * np.arange(n)[:, None] + np.arange(2), space, "elasticity", material)


# ---------------------------------------------------------------------------
# boundary conditions
# ---------------------------------------------------------------------------


def oriented_boundary_edges(mesh: Mesh2D, tags=None) -> np.ndarray:
    """Boundary edges with the given tags, oriented so the domain lies on the left."""
    e = mesh.boundary_edges_with(tags)
    if not len(e):
        return e
    _, _, a, b = mesh._edge_table
    n = mesh.n_vertices
    directed = np.sort(a * n + b)
    code = e[:, 0] * n + e[:, 1]
    pos = np.clip(np.searchsorted(directed, code), 0, len(directed) - 1)
    forward = directed[pos] == code
    return np.where(forward[:, None], e, e[:, ::-1])


def _selector_edges(system: DiscreteSystem, selector) -> np.ndarray:
    mesh = system.space.mesh
    tags = None if selector is None else ([selector] if isinstance(selector, str) else list(selector))
    return oriented_boundary_edges(mesh, tags)


def apply_dirichlet(system: DiscreteSystem, boundary_selector, g) -> DiscreteSystem:
    """Constrain the nodes on the selected boundary to ``g(node_xy)``.

    ``boundary_selector`` is a tag, an iterable of tags, or None for the whole
    boundary. Later constraints override earlier ones on shared nodes.
    """
    edges = _selector_edges(system, boundary_selector)
    if not len(edges):
        raise ConfigurationError(f"boundary selector {boundary_selector!r} matches no nodes")
    nodes = np.unique(system.space.edge_nodes(edges))
    vals = np.asarray(g(system.space.node_xy[nodes]), dtype=float).reshape(len(nodes), system.n_comp)
    dofs = system.dof_map[nodes].ravel()
    alld = np.concatenate([system.constrained_dofs, dofs])
    allv = np.concatenate([system.constrained_values, vals.ravel()])
    # keep the last value written for each dof
    _, first = np.unique(alld[::-1], return_index=True)
    keep = len(alld) - 1 - first
    keep.sort()
    return replace(system, constrained_dofs=alld[keep], constrained_values=allv[keep])


def apply_neumann(system: DiscreteSystem, boundary_selector, traction) -> DiscreteSystem:
    """Add ``int_edge phi_i * traction`` over the selected boundary edges.

    ``traction(points, normals)`` returns a flux ``(n,)`` (Poisson) or a
    traction ``(n, 2)`` (elasticity); normals are outward unit vectors.
    """
    edges = _selector_edges(system, boundary_selector)
    if not len(edges):
        raise ConfigurationError(f"boundary selector {boundary_selector!r} matches no edges")
    v = system.space.mesh.vertices
    a, b = v[edges[:, 0]], v[edges[:, 1]]
    d = b - a
    L = np.hypot(d[:, 0], d[:, 1])
    normal = np.stack([d[:, 1], -d[:, 0]], axis=1) / L[:, None]
    pts = a[:, None, :] + _GL_T[None, :, None] * d[:, None, :]  # (e, 3, 2)
    nrm = np.broadcast_to(normal[:, None, :], pts.shape)
    t = np.asarray(traction(pts.reshape(-1, 2), nrm.reshape(-1, 2)), dtype=float)
    t = t.reshape(len(edges), len(_GL_T), system.n_comp)
    shapes = system.space.edge_shapes(_GL_T)  # (3, n_e)
    contrib = np.einsum("e,q,qk,eqc->ekc", L, _GL_W, shapes, t)
    nodes = system.space.edge_nodes(edges)
    f = system.f.copy()
    np.add.at(f, system.dof_map[nodes].ravel(), contrib.ravel())
    return replace(system, f=f)
