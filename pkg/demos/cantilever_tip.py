"""Cantilever beam under end shear: tip deflection against the closed form.

Quadratic elements on a dual Delaunay mesh; the tip displacement is read at
the loaded end on the neutral axis.
"""
from polypde import bench
from polypde.problems import assemble_problem, lep_tip_deflection, make_problem
from polypde.solver import solve_direct, solve_pcg, energy_difference

problem = make_problem("LEP")
exact = lep_tip_deflection()
mesh = bench.generate_mesh("BE", "DT4", 2500)
system = assemble_problem(problem, mesh, "P2", "BE")

direct = solve_direct(system)
pcg = solve_pcg(system)
K, _ = system.reduced()
free = system.free_dofs()
print(f"dofs {system.n_dofs}, direct {direct.wall_time:.3f}s, pcg {pcg.wall_time:.3f}s in {pcg.iterations} its")
print(f"energy difference direct vs pcg {energy_difference(K, direct.solution[free], pcg.solution[free]):.2e}")

# the tip node lies on the right wall at y = 0
v = mesh.vertices
tip = ((v[:, 0] - v[:, 0].max()) ** 2 + v[:, 1] ** 2).argmin()
uy = direct.solution[system.dof_map[tip, 1]]
print(f"tip deflection {uy:.6e}  closed form {exact:.6e}  rel err {abs(uy - exact) / abs(exact):.2e}")
