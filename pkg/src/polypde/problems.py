"""Benchmark problem bank: manufactured Poisson fields and two elasticity cases.

Poisson problems solve ``-lap u = rhs``; elasticity problems solve
``-div sigma[u] = body force`` with zero body force. All fields are
vectorised over ``(n, 2)`` point arrays; elasticity gradients are
``(n, 2, 2)`` with ``grad[:, i, j] = du_i/dx_j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from polypde.domains import DOMAIN_IDS, PH_HOLE_RADIUS, Domain, make_domain
from polypde.fem import DiscreteSystem, MaterialModel, apply_dirichlet, apply_neumann, assemble_elasticity, assemble_poisson

PROBLEM_IDS = ("PS1", "PS2", "PS3", "PB", "LEP", "LEB")

# beam and plate constants
BEAM_LENGTH = 8.0
BEAM_HEIGHT = 4.0
BEAM_LOAD = -1000.0


class UnknownProblemError(KeyError):
    pass


class BoundaryTagError(ValueError):
    pass


@dataclass
class ManufacturedSolution:
    u_exact: Callable
    grad_exact: Callable
    rhs: Callable
    stress: Callable | None = None  # elasticity: (n, 2, 2) Cauchy stress
    flux: Callable | None = None  # Poisson: (points, normals) -> grad u . n


@dataclass
class ProblemSpec:
    id: str
    kind: str  # poisson | elasticity
    solution: ManufacturedSolution
    material: MaterialModel | None = None
    bc_plan: dict = field(default_factory=dict)  # tag -> "dirichlet" | "neumann"
    default_bc: str = "dirichlet"
    compatible_domains: tuple = DOMAIN_IDS
    singular_point: np.ndarray | None = None

    @property
    def n_comp(self) -> int:
        return 1 if self.kind == "poisson" else 2

    def bc_for(self, domain) -> dict:
        """Complete tag -> BC assignment for a domain."""
        domain = domain if isinstance(domain, Domain) else make_domain(domain)
        return {t: self.bc_plan.get(t, self.default_bc) for t in domain.tags}

    def pair_name(self, domain_id: str) -> str:
        return f"{self.id}-{domain_id}"


def _xy(p):
    p = np.asarray(p, dtype=float).reshape(-1, 2)
    return p[:, 0], p[:, 1]


def _grad_flux(grad):
    def flux(points, normals):
        return np.einsum("nd,nd->n", grad(points), np.asarray(normals, dtype=float).reshape(-1, 2))

    return flux


# ---------------------------------------------------------------------------
# Poisson
# ---------------------------------------------------------------------------


def _ps1(variant: str = "literal") -> ManufacturedSolution:
    if variant == "literal":
        # the printed expression 0.25(1 - x^2 - 1 - y^2) simplifies to this
        u = lambda p: -0.25 * (_xy(p)[0] ** 2 + _xy(p)[1] ** 2)
        g = lambda p: np.stack([-0.5 * _xy(p)[0], -0.5 * _xy(p)[1]], axis=1)
        f = lambda p: np.ones(len(_xy(p)[0]))
    elif variant == "product":
        u = lambda p: 0.25 * (1 - _xy(p)[0] ** 2) * (1 - _xy(p)[1] ** 2)
        g = lambda p: np.stack(
            [-0.5 * _xy(p)[0] * (1 - _xy(p)[1] ** 2), -0.5 * _xy(p)[1] * (1 - _xy(p)[0] ** 2)], axis=1
        )
        f = lambda p: 0.5 * (2 - _xy(p)[0] ** 2 - _xy(p)[1] ** 2)
    else:
        raise ValueError(f"unknown PS1 variant {variant!r}")
    return ManufacturedSolution(u, g, f, flux=_grad_flux(g))


def _ps2() -> ManufacturedSolution:
    def u(p):
        x, y = _xy(p)
        return 16 * x * y * (1 - x) * (1 - y)

    def g(p):
        x, y = _xy(p)
        return np.stack([16 * y * (1 - y) * (1 - 2 * x), 16 * x * (1 - x) * (1 - 2 * y)], axis=1)

    def f(p):
        x, y = _xy(p)
        return 32 * (x * (1 - x) + y * (1 - y))

    return ManufacturedSolution(u, g, f, flux=_grad_flux(g))


def _ps3() -> ManufacturedSolution:
    c = -1.0 / (2 * np.pi**2)

    def u(p):
        x, y = _xy(p)
        return c * np.sin(np.pi * x) * np.sin(np.pi * y)

    def g(p):
        x, y = _xy(p)
        return c * np.pi * np.stack([np.cos(np.pi * x) * np.sin(np.pi * y), np.sin(np.pi * x) * np.cos(np.pi * y)], axis=1)

    def f(p):
        x, y = _xy(p)
        return -np.sin(np.pi * x) * np.sin(np.pi * y)

    return ManufacturedSolution(u, g, f, flux=_grad_flux(g))


def _polar_terms(p, terms, shift=0.0):
    """Sum of ``c r^n trig(m (theta - shift))`` terms and its Cartesian gradient."""
    x, y = _xy(p)
    r = np.hypot(x, y)
    th = np.arctan2(y, x)
    ph = np.mod(th - shift, 2 * np.pi)
    cs, sn = np.cos(th), np.sin(th)
    val = np.zeros_like(r)
    gx = np.zeros_like(r)
    gy = np.zeros_like(r)
    for c, n, m, trig in terms:
        with np.errstate(divide="ignore", invalid="ignore"):
            rn = r**n
            rn1 = r ** (n - 1)
        if trig == "cos":
            t, dt = np.cos(m * ph), -m * np.sin(m * ph)
        else:
            t, dt = np.sin(m * ph), m * np.cos(m * ph)
        val += c * rn * t
        # d/dr = n r^{n-1} t; (1/r) d/dtheta = r^{n-1} dt
        with np.errstate(invalid="ignore"):
            gx += c * rn1 * (n * cs * t - sn * dt)
            gy += c * rn1 * (n * sn * t + cs * dt)
    return val, np.stack([gx, gy], axis=1)


def _pb() -> ManufacturedSolution:
    # angle measured from the +y axis so both re-entrant edges of the L are zero sets
    terms = [(1.0, 2.0 / 3.0, 2.0 / 3.0, "sin")]
    u = lambda p: _polar_terms(p, terms, np.pi / 2)[0]
    g = lambda p: _polar_terms(p, terms, np.pi / 2)[1]
    f = lambda p: np.zeros(len(_xy(p)[0]))
    return ManufacturedSolution(u, g, f, flux=_grad_flux(g))


# ---------------------------------------------------------------------------
# elasticity
# ---------------------------------------------------------------------------


def _stress_from(material: MaterialModel, grad):
    return lambda p: material.stress(grad(p))


def _lep(material: MaterialModel) -> ManufacturedSolution:
    """Cantilever with a parabolic end shear, clamped at x = 0, mid-plane y = 0."""
    L, h, P = BEAM_LENGTH, BEAM_HEIGHT, BEAM_LOAD
    # the closed form is written for plane stress; plane strain swaps in Ebar, nubar
    if material.mode == "plane-strain":
        E = material.E / (1 - material.nu**2)
        nu = material.nu / (1 - material.nu)
    else:
        E, nu = material.E, material.nu
    I = h**3 / 12.0
    k = P / (6 * E * I)

    def u(p):
        x, y = _xy(p)
        ux = -k * y * ((6 * L - 3 * x) * x + (2 + nu) * y**2 - 1.5 * h**2 * (1 + nu))
        uy = k * (3 * nu * y**2 * (L - x) + (3 * L - x) * x**2)
        return np.stack([ux, uy], axis=1)

    def g(p):
        x, y = _xy(p)
        dux_dx = -k * y * (6 * L - 6 * x)
        dux_dy = -k * ((6 * L - 3 * x) * x + 3 * (2 + nu) * y**2 - 1.5 * h**2 * (1 + nu))
        duy_dx = k * (-3 * nu * y**2 + 6 * L * x - 3 * x**2)
        duy_dy = k * 6 * nu * y * (L - x)
        return np.stack([np.stack([dux_dx, dux_dy], -1), np.stack([duy_dx, duy_dy], -1)], axis=1)

    f = lambda p: np.zeros((len(_xy(p)[0]), 2))
    return ManufacturedSolution(u, g, f, stress=_stress_from(material, g))


def lep_tip_deflection(material: MaterialModel | None = None) -> float:
    """Closed-form ``u_y(L, 0)``."""
    material = material or MaterialModel()
    sol = _lep(material)
    return float(sol.u_exact(np.array([[BEAM_LENGTH, 0.0]]))[0, 1])


def kirsch_stress(p, a: float = PH_HOLE_RADIUS, load: float = 1.0) -> np.ndarray:
    """Cartesian stress around a traction-free hole under far-field tension along x."""
    x, y = _xy(p)
    r2 = x * x + y * y
    th = np.arctan2(y, x)
    q2, q4 = a * a / r2, a**4 / (r2 * r2)
    c2, c4, s2, s4 = np.cos(2 * th), np.cos(4 * th), np.sin(2 * th), np.sin(4 * th)
    sxx = 1 - q2 * (1.5 * c2 + c4) + 1.5 * q4 * c4
    syy = -q2 * (0.5 * c2 - c4) - 1.5 * q4 * c4
    sxy = -q2 * (0.5 * s2 + s4) + 1.5 * q4 * s4
    return load * np.stack([np.stack([sxx, sxy], -1), np.stack([sxy, syy], -1)], axis=1)


def _leb(material: MaterialModel) -> ManufacturedSolution:
    a = PH_HOLE_RADIUS
    mu = material.mu
    kappa = 3 - 4 * material.nu if material.mode == "plane-strain" else (3 - material.nu) / (1 + material.nu)
    c = 1.0 / (8 * mu)
    tx = [
        (c * (kappa + 1), 1, 1, "cos"),
        (c * 2 * a * a * (1 + kappa), -1, 1, "cos"),
        (c * 2 * a * a, -1, 3, "cos"),
        (-c * 2 * a**4, -3, 3, "cos"),
    ]
    ty = [
        (c * (kappa - 3), 1, 1, "sin"),
        (c * 2 * a * a * (1 - kappa), -1, 1, "sin"),
        (c * 2 * a * a, -1, 3, "sin"),
        (-c * 2 * a**4, -3, 3, "sin"),
    ]

    def u(p):
        return np.stack([_polar_terms(p, tx)[0], _polar_terms(p, ty)[0]], axis=1)

    def g(p):
        return np.stack([_polar_terms(p, tx)[1], _polar_terms(p, ty)[1]], axis=1)

    f = lambda p: np.zeros((len(_xy(p)[0]), 2))
    return ManufacturedSolution(u, g, f, stress=lambda p: kirsch_stress(p, a))


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


def make_problem(problem_id: str, material: MaterialModel | None = None, ps1_variant: str = "literal") -> ProblemSpec:
    pid = str(problem_id).upper().replace("#", "")
    if pid == "PS1":
        return ProblemSpec("PS1", "poisson", _ps1(ps1_variant))
    if pid == "PS2":
        return ProblemSpec("PS2", "poisson", _ps2())
    if pid == "PS3":
        return ProblemSpec("PS3", "poisson", _ps3())
    if pid == "PB":
        return ProblemSpec("PB", "poisson", _pb(), compatible_domains=("LS",), singular_point=np.zeros(2))
    if pid == "LEP":
        material = material or MaterialModel()
        return ProblemSpec(
            "LEP", "elasticity", _lep(material), material, {"LEFT": "dirichlet"}, "neumann", ("BE",)
        )
    if pid == "LEB":
        material = material or MaterialModel()
        return ProblemSpec(
            "LEB", "elasticity", _leb(material), material, {"LEFT": "neumann", "BOTTOM": "neumann"}, "dirichlet", ("PH",)
        )
    raise UnknownProblemError(f"unknown problem id {problem_id!r}; expected one of {PROBLEM_IDS}")


def dirichlet_values(problem: ProblemSpec, points) -> np.ndarray:
    return problem.solution.u_exact(points)


def neumann_values(problem: ProblemSpec, points, normals) -> np.ndarray:
    """``grad u . n`` (Poisson) or ``sigma n`` (elasticity) from the exact fields."""
    n = np.asarray(normals, dtype=float).reshape(-1, 2)
    if problem.kind == "poisson":
        return np.einsum("nd,nd->n", problem.solution.grad_exact(points), n)
    return np.einsum("nij,nj->ni", problem.solution.stress(points), n)


def _tag_check(problem: ProblemSpec, domain: Domain, mesh_tags: set):
    unknown = mesh_tags - set(domain.tags)
    if unknown:
        raise BoundaryTagError(f"mesh carries tags {sorted(unknown)} not in domain {domain.id}")


def assemble_problem(problem: ProblemSpec, mesh, method: str, domain=None, quad_degree: int | None = None) -> DiscreteSystem:
    """Assemble ``problem`` on ``mesh`` with ``method`` and apply its boundary plan."""
    domain = make_domain(domain or mesh.provenance.domain)
    _tag_check(problem, domain, mesh.tag_set)
    sol = problem.solution
    if problem.kind == "poisson":
        system = assemble_poisson(mesh, method, sol.rhs, quad_degree)
    else:
        system = assemble_elasticity(mesh, method, problem.material, sol.rhs, quad_degree)
    plan = problem.bc_for(domain)
    neumann = [t for t, kind in plan.items() if kind == "neumann" and t in mesh.tag_set]
    dirichlet = [t for t, kind in plan.items() if kind == "dirichlet" and t in mesh.tag_set]
    if neumann:
        system = apply_neumann(system, neumann, lambda p, n: neumann_values(problem, p, n))
    if dirichlet:
        system = apply_dirichlet(system, dirichlet, sol.u_exact)
    return system
