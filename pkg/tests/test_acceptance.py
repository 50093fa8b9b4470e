"""End-to-end acceptance checks, one test per criterion.

Each test records its outcome through the ``criterion`` fixture so the run
ends with one PASS/FAIL line per criterion.
"""

import csv
import time

import numpy as np
import pytest
from _helpers import (
    patch_error,
    points_in_polygon,
    points_in_triangle,
    random_convex_polygon,
    random_star_polygon,
    random_triangle,
)

from polypde import bench
from polypde.basis import areal_coordinates, lagrange_eval, mean_value_batch, wachspress_batch
from polypde.domains import DOMAIN_IDS, make_domain
from polypde.fem import MaterialModel, check_compatible
from polypde.mesh import validate
from polypde.problems import BEAM_LENGTH, PROBLEM_IDS, assemble_problem, lep_tip_deflection, make_problem
from polypde.solver import energy_difference, solve_direct, solve_pcg
from polypde.vem import StabilizationKind, vem_local_elasticity, vem_local_poisson

pytestmark = pytest.mark.acceptance

STABS = [s.value for s in StabilizationKind]
METHODS = ["P1", "P2", "MV", "WACHSPRESS"] + [f"VEM:{s}" for s in STABS]


def compatible(mesh):
    return [m for m in METHODS if check_compatible(mesh, m.split(":")[0]) is None]


def sweep(tmp_path, name, mesher, method, resolutions, problem="PS3", domain="US"):
    cfg = bench.BenchConfig(
        problems=[problem],
        domains=[domain],
        meshers=[mesher],
        resolutions=resolutions,
        methods=[method],
        output_dir=str(tmp_path / name),
    )
    return bench.run_suite(cfg, resume=False, repeats=1)


def rates(records):
    (row,) = bench.convergence_table(records)
    assert row["status"] == "ok", row
    return row["l2_rate"], row["h1_rate"]


# 1


def test_patch_all_families(criterion):
    t0 = time.perf_counter()
    worst, runs = 0.0, 0
    for mesher in bench.ALL_MESHERS:
        mesh = bench.generate_mesh("US", mesher, 400, 0)
        for m in compatible(mesh):
            for kind in ("poisson", "elasticity"):
                worst = max(worst, patch_error(mesh, m, kind))
                runs += 1
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 300
    assert criterion(1, ok, f"{runs} mesh/method/kind runs, worst rel error {worst:.1e}, {dt:.0f}s")


# 2


def test_convergence_orders(criterion, tmp_path):
    t0 = time.perf_counter()
    lad = bench.ladder(100, 7)  # 100 .. 6400
    cases = [
        ("DT4", "P1", lad, (2.0, 0.2), (1.0, 0.2)),
        ("DT4", "P2", lad[:-1], (3.0, 0.3), None),
        ("VP4", "VEM", lad, (2.0, 0.3), None),
        ("DP2", "MV", lad, (2.0, 0.3), None),
        ("VP4", "MV", lad, (2.0, 0.3), None),
    ]
    ok, parts = True, []
    for mesher, method, res, l2_target, h1_target in cases:
        recs = sweep(tmp_path, f"{mesher}-{method}", mesher, method, res)
        assert all(r.status == "ok" for r in recs)
        assert max(r.n_dofs for r in recs) <= 25_000
        l2, h1 = rates(recs)
        good = abs(l2 - l2_target[0]) <= l2_target[1]
        parts.append(f"{method}/{mesher} L2 {l2:.2f}")
        if h1_target:
            good &= abs(h1 - h1_target[0]) <= h1_target[1]
            parts.append(f"H1 {h1:.2f}")
        ok &= good
    dt = time.perf_counter() - t0
    ok &= dt < 900
    assert criterion(2, ok, ", ".join(parts) + f" ({dt:.0f}s)")


# 3


def test_stabilization_equivalence(criterion, tmp_path):
    slopes = {}
    for s in STABS:
        recs = sweep(tmp_path, s, "VP4", f"VEM:{s}", [1600, 3200, 6400, 12800], problem="LEP", domain="BE")
        slopes[s] = rates(recs)[0]
    v = np.array(list(slopes.values()))
    ok = np.ptp(v) <= 0.3 and (np.abs(v - 2.0) <= 0.3).all()
    assert criterion(3, ok, ", ".join(f"{k} {x:.2f}" for k, x in slopes.items()))


# 4


def locate(mesh, p):
    tris = mesh.triangles
    lam = areal_coordinates(mesh.vertices[tris], np.broadcast_to(p, (len(tris), 1, 2)))[:, 0]
    return int(np.argmax(lam.min(axis=1)))


def test_lep_tip_deflection(criterion):
    prob = make_problem("LEP")
    mesh = bench.generate_mesh("BE", "DT4", 2500, 0)
    system = assemble_problem(prob, mesh, "P2", "BE")
    x = solve_direct(system).solution
    tip = np.array([BEAM_LENGTH, 0.0])
    c = locate(mesh, tip)
    phi = lagrange_eval(2, mesh.vertices[mesh.triangles[c]], tip).values
    uy = phi @ x[system.dof_map[system.space.cell_nodes[c], 1]]
    exact = lep_tip_deflection()
    rel = abs(uy / exact - 1)
    assert criterion(4, rel <= 0.01, f"u_y(8,0) = {uy:.6e} vs {exact:.6e} ({rel:.1e} rel, {system.n_dofs} DOFs)")


# 5


def test_basis_oracles(criterion):
    rng = np.random.default_rng(2024)
    tri_err = 0.0
    for _ in range(1000):
        tri = random_triangle(rng)
        x = points_in_triangle(rng, tri, 1)
        lam = areal_coordinates(tri, x)
        for fn in (wachspress_batch, mean_value_batch):
            tri_err = max(tri_err, np.abs(fn(tri[None], x[None])[0][0] - lam).max())
    pu_err = lin_err = grad_err = 0.0
    h = 1e-6
    polys = [(random_convex_polygon(rng), (wachspress_batch, mean_value_batch)) for _ in range(100)]
    polys += [(random_star_polygon(rng), (mean_value_batch,)) for _ in range(100)]
    for xy, fns in polys:
        x = points_in_polygon(rng, xy, 20, margin=1e-2)
        for fn in fns:
            lam, g = fn(xy[None], x[None])
            pu_err = max(pu_err, np.abs(lam[0].sum(-1) - 1).max())
            lin_err = max(lin_err, np.abs(lam[0] @ xy - x).max())
            for d in range(2):
                e = np.zeros(2)
                e[d] = h
                fd = (fn(xy[None], (x + e)[None])[0] - fn(xy[None], (x - e)[None])[0])[0] / (2 * h)
                grad_err = max(grad_err, np.abs(g[0, :, :, d] - fd).max())
    ok = tri_err <= 1e-12 and pu_err <= 1e-10 and lin_err <= 1e-10 and grad_err <= 1e-6
    detail = f"triangle {tri_err:.1e}, unity {pu_err:.1e}, linear {lin_err:.1e}, gradient {grad_err:.1e}"
    assert criterion(5, ok, detail)


# 6


def p1_oracle(tri, C):
    # closed-form P1 gradients: b_i = y_j - y_k, c_i = x_k - x_j
    x, y = tri[:, 0], tri[:, 1]
    b = np.roll(y, -1) - np.roll(y, -2)
    c = np.roll(x, -2) - np.roll(x, -1)
    area = 0.5 * (b[0] * c[1] - b[1] * c[0])
    G = np.c_[b, c] / (2 * area)
    Kp = area * G @ G.T
    B = np.zeros((3, 6))
    B[0, 0::2] = G[:, 0]
    B[1, 1::2] = G[:, 1]
    B[2, 0::2] = G[:, 1]
    B[2, 1::2] = G[:, 0]
    return Kp, area * B.T @ C @ B


def test_vem_equals_p1(criterion):
    mesh = bench.generate_mesh("PH", "DT2", 150, 0)
    assert mesh.is_triangular and mesh.n_cells >= 200
    mat = MaterialModel()
    worst = 0.0
    for cell in mesh.cells[:200]:
        xy = mesh.vertices[cell]
        Kp, Ke = p1_oracle(xy, mat.C)
        worst = max(worst, np.abs(vem_local_poisson(xy).K - Kp).max() / np.abs(Kp).max())
        for s in STABS:
            Kv = vem_local_elasticity(xy, mat, s).K
            worst = max(worst, np.abs(Kv - Ke).max() / np.abs(Ke).max())
    assert criterion(6, worst <= 1e-12, f"200 cells, Poisson and 3 elasticity recipes, worst rel {worst:.1e}")


# 7


def test_cross_solver_agreement(criterion):
    families = ["VP4", "DP2", "TP3", "DT4", "VP4-PT1"]
    worst_e = worst_r = 0.0
    n_sys = 0
    largest = 0
    fails = []
    for pid in PROBLEM_IDS:
        prob = make_problem(pid)
        for did in prob.compatible_domains:
            for mesher in families:
                for res in (100, 1600):
                    mesh = bench.generate_mesh(did, mesher, res, 0)
                    for m in compatible(mesh):
                        system = assemble_problem(prob, mesh, m, did)
                        if system.n_dofs > 20_000:
                            continue
                        K, _ = system.reduced()
                        xd = solve_direct(system)
                        try:
                            xp = solve_pcg(system, tol=1e-10)
                        except Exception as err:
                            fails.append(f"{pid}-{did} {mesher} {res} {m}: {err}")
                            continue
                        xr = xd.solution[system.free_dofs()]
                        yr = xp.solution[system.free_dofs()]
                        worst_e = max(worst_e, energy_difference(K, xr, yr))
                        worst_r = max(worst_r, xp.residual)
                        n_sys += 1
                        largest = max(largest, system.n_dofs)
    ok = not fails and worst_e <= 1e-7 and worst_r <= 1e-10
    detail = f"{n_sys} systems up to {largest} DOFs, energy diff {worst_e:.1e}, PCG residual {worst_r:.1e}"
    if fails:
        detail += f", {len(fails)} PCG failures (first: {fails[0]})"
    assert criterion(7, ok, detail)


# 8


def test_singular_rate(criterion, tmp_path):
    recs = sweep(tmp_path, "pb", "DT4", "P1", bench.ladder(100, 7), problem="PB", domain="LS")
    l2 = rates(recs)[0]
    assert criterion(8, 1.0 < l2 < 1.9, f"PB-LS P1/DT4 L2 rate {l2:.2f}")


# 9


def strip_timing(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: v for k, v in r.items() if k not in bench.TIMING_COLUMNS} for r in rows]


def test_deterministic_artifacts(criterion, tmp_path):
    runs = []
    for name in ("a", "b"):
        cfg = bench.BenchConfig(
            problems=["PS3"],
            domains=["US"],
            meshers=["VP4", "DP2", "TP3", "DT4", "VP4-PT1"],
            resolutions=bench.ladder(100, 5),
            methods=["P1", "MV", "VEM"],
            output_dir=str(tmp_path / name),
        )
        recs = bench.run_suite(cfg, resume=False, repeats=1)
        bench.emit_convergence_table(recs, tmp_path / name / "rates.csv")
        runs.append(recs)
    same_records = strip_timing(tmp_path / "a" / "records.csv") == strip_timing(tmp_path / "b" / "records.csv")
    same_rates = (tmp_path / "a" / "rates.csv").read_bytes() == (tmp_path / "b" / "rates.csv").read_bytes()
    svg1 = bench.emit_time_error_plot(runs[0], tmp_path / "p1.svg").read_bytes()
    svg2 = bench.emit_time_error_plot(runs[0], tmp_path / "p2.svg").read_bytes()
    frac = bench.monotone_fraction(runs[0])
    ok = same_records and same_rates and svg1 == svg2 and frac >= 0.9
    detail = f"records {same_records}, rates {same_rates}, svg {svg1 == svg2}, monotone {frac:.2f}"
    assert criterion(9, ok, detail)


# 10


def test_mesh_conformance(criterion):
    bad = []
    n_mesh = 0
    for did in DOMAIN_IDS:
        d = make_domain(did)
        tol = 1e-10 * d.area
        for mesher in bench.ALL_MESHERS:
            deficit = []
            for n in bench.ladder():
                mesh = bench.generate_mesh(did, mesher, n, 0)
                n_mesh += 1
                v = validate(mesh)
                if v:
                    bad.append(f"{did} {mesher} {n}: {v[0]}")
                deficit.append(abs(mesh.cell_areas.sum() - d.area))
            if d.polygonal:
                if max(deficit) > tol:
                    bad.append(f"{did} {mesher}: deficit {max(deficit):.1e} on a polygonal domain")
            elif any(b > a and b > tol for a, b in zip(deficit, deficit[1:])):
                bad.append(f"{did} {mesher}: deficit not shrinking {np.round(deficit, 8).tolist()}")
    detail = f"{n_mesh} meshes" + (f", {len(bad)} problems (first: {bad[0]})" if bad else ", all valid and closed")
    assert criterion(10, not bad, detail)
