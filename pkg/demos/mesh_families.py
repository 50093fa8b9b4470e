"""Generate one mesh of every family on the disc with a hole and print quality.

Writes an SVG wireframe per mesher into ./mesh_families_out.
"""
from pathlib import Path

from polypde import bench, quality_stats
from polypde.cli import plot_mesh

out = Path("mesh_families_out")
out.mkdir(exist_ok=True)

print(f"{'mesher':10s} {'cells':>6s} {'min edge':>10s} {'min angle':>10s} {'max nv':>7s}")
for m in ["VP1", "VP4", "DP1", "DP3", "TP1", "TP4", "DT4", "VP4-PT1", "VP4-PT3", "VP4-PT4"]:
    mesh = bench.generate_mesh("PH", m, 400, rng_seed=0)
    q = quality_stats(mesh)
    print(f"{m:10s} {q.n_cells:6d} {q.min_edge_length:10.3e} {q.min_angle_deg:10.3f} {q.max_cell_vertex_count:7d}")
    plot_mesh(mesh, out / f"PH_{m}.svg")
