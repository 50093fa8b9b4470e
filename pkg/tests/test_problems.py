import numpy as np
import pytest

from polypde.domains import make_domain
from polypde.fem import MaterialModel
from polypde.problems import (
    BEAM_HEIGHT,
    BEAM_LENGTH,
    BEAM_LOAD,
    PROBLEM_IDS,
    UnknownProblemError,
    dirichlet_values,
    kirsch_stress,
    lep_tip_deflection,
    make_problem,
    neumann_values,
)
from polypde.voronoi import sample_seeds

POISSON = ["PS1", "PS2", "PS3", "PB"]
H = 1e-5


def domain_points(prob, n=40):
    return sample_seeds(prob.compatible_domains[0], n, 0).points


def fd_grad(f, p):
    out = []
    for d in range(2):
        e = np.zeros(2)
        e[d] = H
        out.append((f(p + e) - f(p - e)) / (2 * H))
    return np.stack(out, axis=-1)


def test_ps2_center():
    assert make_problem("PS2").solution.u_exact(np.array([[0.5, 0.5]]))[0] == pytest.approx(1.0)


def test_ps3_rhs_center():
    assert make_problem("PS3").solution.rhs(np.array([[0.5, 0.5]]))[0] == pytest.approx(-1.0)


def test_pb_homogeneity():
    u = make_problem("PB").solution.u_exact
    for th in (0.3, 1.5, 3.0, 4.4):
        p = np.array([[0.3 * np.cos(th), 0.3 * np.sin(th)]])
        assert u(p)[0] / u(2 * p)[0] == pytest.approx(2 ** (-2 / 3))


def test_pb_zero_on_reentrant_walls():
    u = make_problem("PB").solution.u_exact
    t = np.linspace(0.05, 1, 9)
    np.testing.assert_allclose(u(np.c_[np.zeros_like(t), t]), 0, atol=1e-15)
    np.testing.assert_allclose(u(np.c_[t, np.zeros_like(t)]), 0, atol=1e-15)


@pytest.mark.parametrize("pid", POISSON)
def test_poisson_gradient_and_rhs(pid):
    sol = make_problem(pid).solution
    p = domain_points(make_problem(pid))
    np.testing.assert_allclose(sol.grad_exact(p), fd_grad(sol.u_exact, p), atol=1e-7)
    lap = sum(fd_grad(lambda q: sol.grad_exact(q)[:, d], p)[:, d] for d in range(2))
    np.testing.assert_allclose(sol.rhs(p), -lap, atol=1e-5)


@pytest.mark.parametrize("pid", ["LEP", "LEB"])
def test_elasticity_gradient_and_equilibrium(pid):
    prob = make_problem(pid)
    sol = prob.solution
    p = domain_points(prob)
    np.testing.assert_allclose(sol.grad_exact(p), fd_grad(sol.u_exact, p), rtol=1e-6, atol=1e-9 * abs(sol.grad_exact(p)).max())
    # closed-form stress agrees with the material law applied to the gradient
    s = sol.stress(p)
    np.testing.assert_allclose(prob.material.stress(sol.grad_exact(p)), s, atol=1e-9 * abs(s).max())
    div = sum(fd_grad(lambda q: sol.stress(q)[:, :, d], p)[..., d] for d in range(2))
    np.testing.assert_allclose(div, 0, atol=1e-6 * abs(s).max())


def test_lep_left_edge_values():
    mat = MaterialModel()
    E, nu = mat.E / (1 - mat.nu**2), mat.nu / (1 - mat.nu)
    L, h, P = BEAM_LENGTH, BEAM_HEIGHT, BEAM_LOAD
    I = h**3 / 12
    k = P / (6 * E * I)
    y = 2.0
    ux = -k * y * ((2 + nu) * y**2 - 1.5 * h**2 * (1 + nu))
    uy = k * 3 * nu * y**2 * L
    np.testing.assert_allclose(dirichlet_values(make_problem("LEP"), np.array([[0.0, y]]))[0], [ux, uy], rtol=1e-14)
    np.testing.assert_allclose(make_problem("LEP").solution.u_exact(np.zeros((1, 2))), 0, atol=1e-20)


def test_lep_tip_deflection_value():
    # frozen from the closed form with E=1e7, nu=0.3 in plane strain
    assert lep_tip_deflection() == pytest.approx(-0.002912, abs=5e-7)
    mat = MaterialModel()
    E = mat.E / (1 - mat.nu**2)
    nu = mat.nu / (1 - mat.nu)
    I = BEAM_HEIGHT**3 / 12
    assert lep_tip_deflection() == pytest.approx(BEAM_LOAD * BEAM_LENGTH**3 / (3 * E * I), rel=1e-14)


def test_lep_right_edge_resultant():
    prob = make_problem("LEP")
    y, w = np.polynomial.legendre.leggauss(6)
    y, w = 2 * y, 2 * w
    p = np.c_[np.full_like(y, BEAM_LENGTH), y]
    t = neumann_values(prob, p, np.tile([1.0, 0.0], (len(y), 1)))
    np.testing.assert_allclose(w @ t, [0, BEAM_LOAD], atol=1e-9)
    # top edge is traction free
    p = np.c_[np.linspace(0.5, 7.5, 5), np.full(5, 2.0)]
    np.testing.assert_allclose(neumann_values(prob, p, np.tile([0.0, 1.0], (5, 1))), 0, atol=1e-9)


def test_ps_boundary_traces():
    assert dirichlet_values(make_problem("PS3"), np.zeros((1, 2)))[0] == pytest.approx(0, abs=1e-17)
    t = np.linspace(0, 1, 7)
    ps2 = make_problem("PS2")
    for p in (np.c_[t, 0 * t], np.c_[t, 0 * t + 1], np.c_[0 * t, t], np.c_[0 * t + 1, t]):
        np.testing.assert_allclose(dirichlet_values(ps2, p), 0, atol=1e-15)


def test_pb_flux_on_wall():
    # wall x = 0, y > 0 with outward normal +x
    v = neumann_values(make_problem("PB"), np.array([[0.0, 0.5]]), np.array([[1.0, 0.0]]))
    assert v[0] == pytest.approx(-(2 / 3) * 0.5 ** (-1 / 3))


def test_ps1_flux_right_edge():
    v = neumann_values(make_problem("PS1"), np.array([[1.0, 0.3]]), np.array([[1.0, 0.0]]))
    assert v[0] == pytest.approx(-0.5)


def test_ps1_product_variant():
    sol = make_problem("PS1", ps1_variant="product").solution
    p = sample_seeds("US", 20, 1).points
    np.testing.assert_allclose(sol.grad_exact(p), fd_grad(sol.u_exact, p), atol=1e-8)


def test_kirsch_hole_traction_free():
    a = 0.4
    th = np.linspace(0.05, np.pi / 2 - 0.05, 9)
    n = np.c_[np.cos(th), np.sin(th)]
    s = kirsch_stress(a * n, a)
    np.testing.assert_allclose(np.einsum("nij,nj->ni", s, n), 0, atol=1e-14)
    far = kirsch_stress(np.array([[1e4, 3e3]]), a)[0]
    np.testing.assert_allclose(far, [[1, 0], [0, 0]], atol=1e-6)


def test_problem_table():
    assert set(PROBLEM_IDS) == {"PS1", "PS2", "PS3", "PB", "LEP", "LEB"}
    for pid in PROBLEM_IDS:
        prob = make_problem(pid)
        for did in prob.compatible_domains:
            assert set(prob.bc_for(make_domain(did))) <= set(make_domain(did).tags)
    with pytest.raises(UnknownProblemError):
        make_problem("XYZ")
