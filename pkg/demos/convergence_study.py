"""Convergence of P1, quadratic and VEM on the smooth Poisson problem.

Solves on a mesh ladder, prints errors per rung and the fitted log-log slopes.
"""
import numpy as np

from polypde import bench
from polypde.metrics import h_max, problem_errors
from polypde.problems import assemble_problem, make_problem
from polypde.solver import solve_direct

problem = make_problem("PS3")
cases = [("DT4", "P1"), ("DT4", "P2"), ("VP4", "VEM"), ("DP2", "MV")]

for mesher, method in cases:
    hs, l2, h1 = [], [], []
    print(f"\n{mesher} {method}")
    for n in bench.ladder(100, 5):
        mesh = bench.generate_mesh("US", mesher, n)
        system = assemble_problem(problem, mesh, method, "US")
        rep = solve_direct(system)
        err = problem_errors(system, rep.solution, problem)
        hs.append(h_max(mesh))
        l2.append(err.l2)
        h1.append(err.h1)
        print(f"  n={n:5d} dofs={system.n_dofs:6d} h={hs[-1]:.4f} L2={err.l2:.3e} H1={err.h1:.3e}")
    s2 = np.polyfit(np.log(hs), np.log(l2), 1)[0]
    s1 = np.polyfit(np.log(hs), np.log(h1), 1)[0]
    print(f"  slopes: L2 {s2:.2f}  H1 {s1:.2f}")
