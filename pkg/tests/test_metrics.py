import numpy as np
import pytest
from _helpers import linear_scalar, linear_vector

from polypde.displaced import displaced_mesh
from polypde.fem import make_space
from polypde.metrics import DofMismatchError, compute_errors, fit_convergence_rate, h1_error, h_max, l2_error, problem_errors
from polypde.problems import assemble_problem, make_problem
from polypde.solver import solve_direct
from polypde.triangulate import triangulate_mesh
from polypde.voronoi import vp_variant


def grid_tris(n):
    return triangulate_mesh(displaced_mesh("US", n, n, "DP1"), "PT1")


def interp(space, fn):
    return fn(space.node_xy).ravel()


@pytest.mark.parametrize("method", ["P1", "P2", "MV", "WACHSPRESS", "VEM"])
def test_linear_exact(method):
    mesh = grid_tris(4) if method in ("P1", "P2") else vp_variant("US", 40, "VP4", 0)
    sp = make_space(mesh, method)
    grad = lambda p: np.tile([2.0, -3.0], (len(p), 1))
    assert l2_error(sp, interp(sp, linear_scalar), linear_scalar) <= 1e-10
    assert h1_error(sp, interp(sp, linear_scalar), linear_scalar, grad) <= 1e-9


def test_linear_vector_exact():
    sp = make_space(vp_variant("US", 40, "VP4", 0), "MV")
    grad = lambda p: np.tile([[0.2, -0.3], [0.05, 0.4]], (len(p), 1, 1))
    e = compute_errors(sp, interp(sp, linear_vector), linear_vector, grad)
    assert e.l2 <= 1e-10 and e.h1 <= 1e-9


def test_zero_vs_ps2_norm():
    # ||16 x y (1-x)(1-y)||^2 = 256 (int x^2 (1-x)^2)^2 = 256 / 900;
    # u^2 is degree 8, above the degree-6 rule, hence the loose tolerance
    sp = make_space(grid_tris(8), "P2")
    assert l2_error(sp, np.zeros(sp.n_nodes), make_problem("PS2").solution.u_exact) == pytest.approx(16 / 30, rel=1e-9)


def _ps3_errors(method, n):
    prob = make_problem("PS3")
    s = assemble_problem(prob, grid_tris(n), method, "US")
    return problem_errors(s, solve_direct(s).solution, prob)


def test_p1_halving_ratios():
    a, b = _ps3_errors("P1", 16), _ps3_errors("P1", 32)
    assert 3.5 < a.l2 / b.l2 < 4.5
    assert 1.8 < a.h1 / b.h1 < 2.2


def test_p2_h1_order():
    a, b = _ps3_errors("P2", 8), _ps3_errors("P2", 16)
    assert 3.6 < a.h1 / b.h1 < 4.4


def test_fit_exact():
    h = np.array([0.1, 0.05, 0.025, 0.0125])
    assert fit_convergence_rate(np.c_[h, h**2]) == pytest.approx(2.0, abs=1e-12)
    assert fit_convergence_rate(np.c_[h, 3 * h**1.5]) == pytest.approx(1.5, abs=1e-12)


def test_fit_noisy():
    rng = np.random.default_rng(0)
    h = 0.2 / 2 ** np.arange(8)
    e = h**2 * (1 + rng.uniform(-0.05, 0.05, h.size))
    assert fit_convergence_rate(list(zip(h, e))) == pytest.approx(2.0, abs=0.1)


def test_fit_needs_three():
    with pytest.raises(ValueError):
        fit_convergence_rate([(0.1, 0.01), (0.05, 0.0025)])
    with pytest.raises(ValueError):
        fit_convergence_rate([(0.1, 0.01), (0.05, 0.0), (0.02, 1e-4)])


def test_dof_mismatch():
    sp = make_space(grid_tris(2), "P1")
    with pytest.raises(DofMismatchError):
        l2_error(sp, np.zeros(sp.n_nodes + 1), linear_scalar)


def test_h_max():
    assert h_max(displaced_mesh("US", 4, 4, "DP1")) == pytest.approx(np.sqrt(2) / 4)
