import numpy as np
import pytest
import scipy.sparse as sp
from _helpers import single_cell_mesh

from polypde.fem import apply_dirichlet, assemble_elasticity, assemble_poisson
from polypde.problems import assemble_problem, make_problem
from polypde.solver import (
    IterativeFailure,
    SolverError,
    energy_difference,
    export_system,
    import_system,
    incomplete_cholesky,
    solve,
    solve_direct,
    solve_pcg,
)
from polypde.triangulate import dual_delaunay
from polypde.voronoi import vp_variant


@pytest.fixture(scope="module")
def ps3_system():
    d = "US"
    vp, seeds = vp_variant(d, 400, "VP4", 0, return_seeds=True)
    return assemble_problem(make_problem("PS3"), dual_delaunay(seeds, d, vp, "DT4"), "P1", d)


def test_identity():
    r = solve_direct((sp.identity(3), np.array([1.0, 2, 3])))
    np.testing.assert_allclose(r.solution, [1, 2, 3])


@pytest.mark.parametrize("method", ["direct", "pcg"])
def test_two_by_two(method):
    r = solve((sp.csr_matrix([[2.0, 1], [1, 2]]), np.array([3.0, 3])), method)
    np.testing.assert_allclose(r.solution, [1, 1], atol=1e-12)
    assert r.wall_time >= 0


def test_pcg_diagonal_one_iteration():
    A = sp.diags(np.arange(1.0, 51))
    r = solve_pcg((A, np.ones(50)))
    assert r.iterations == 1
    np.testing.assert_allclose(r.solution, 1 / np.arange(1.0, 51))


def test_patch_residual():
    m = vp_variant("US", 80, "VP4", 1)
    s = apply_dirichlet(assemble_poisson(m, "VEM"), None, lambda p: 1 + p[:, 0] - p[:, 1])
    assert solve_direct(s).residual <= 1e-12


def test_direct_vs_pcg(ps3_system):
    a = solve(ps3_system, "direct")
    b = solve(ps3_system, "pcg")
    assert b.residual <= 1e-10
    assert energy_difference(ps3_system.K, a.solution, b.solution) <= 1e-8
    assert b.iterations > 1


def test_pcg_failure_reports():
    A = sp.diags(np.r_[1.0, np.full(99, 1e6)]) + sp.diags(np.full(99, 1.0), 1) + sp.diags(np.full(99, 1.0), -1)
    with pytest.raises(IterativeFailure) as e:
        solve_pcg((A.tocsr(), np.ones(100)), tol=1e-14, max_iter=0)
    assert e.value.iterations == 0


def test_singular_hint():
    s = assemble_elasticity(single_cell_mesh([(0, 0), (1, 0), (0, 1)]), "P1")
    with pytest.raises(SolverError, match="kernel dimension 3"):
        solve_direct(s)
    with pytest.raises(SolverError, match="kernel dimension 1"):
        solve_direct(assemble_poisson(single_cell_mesh([(0, 0), (1, 0), (0, 1)]), "P1"))


def test_not_spd_for_ic0():
    with pytest.raises(SolverError):
        incomplete_cholesky(sp.csr_matrix([[-1.0, 0], [0, 1]]))


def test_ic0_shift_on_breakdown():
    # SPD but IC(0) breaks down without a shift
    A = sp.csr_matrix(np.array([[3, -2, 0, 2], [-2, 3, -2, 0], [0, -2, 3, -2], [2, 0, -2, 3]], float))
    assert np.linalg.eigvalsh(A.toarray()).min() > 0
    L, shift = incomplete_cholesky(A)
    assert shift > 0
    r = solve_pcg((A, np.ones(4)))
    np.testing.assert_allclose(A @ r.solution, 1, atol=1e-9)


def test_matrix_market_roundtrip(tmp_path, ps3_system):
    export_system(ps3_system, tmp_path / "ps3")
    A, b = import_system(tmp_path / "ps3")
    A0, b0 = ps3_system.reduced()
    assert abs(A - A0).max() == 0
    np.testing.assert_array_equal(b, b0)


def test_unknown_solver(ps3_system):
    with pytest.raises(ValueError):
        solve(ps3_system, "gmres")


def test_pcg_true_residual_meets_tol():
    from polypde import bench

    s = assemble_problem(make_problem("PS2"), bench.generate_mesh("UD", "VP4-PT1", 400), "P2", "UD")
    K, f = s.reduced()
    x = solve_pcg(s).solution[s.free_dofs()]
    assert np.linalg.norm(f - K @ x) <= 1e-10 * np.linalg.norm(f)
