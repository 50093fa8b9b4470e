import itertools

import numpy as np
import pytest

from polypde.displaced import DP_VARIANTS, displaced_mesh
from polypde.domains import make_domain
from polypde.mesh import build_mesh, is_simple, point_in_polygon, polygon_area, quality_stats, validate
from polypde.tiled import TP_VARIANTS, gap_triangles, tile_shape, tiled_mesh
from polypde.triangulate import (
    cdt_cells,
    conforming_dt,
    dual_delaunay,
    earclip,
    fan_random,
    incircle,
)
from polypde.voronoi import SeedSet, cvt_energy, lloyd, sample_seeds, voronoi_cells, vp_variant


def one_cell(xy):
    xy = np.asarray(xy, float)
    return build_mesh(xy, [np.arange(len(xy))])


def min_angle(mesh):
    return quality_stats(mesh, check=False).min_angle_deg


# seeds and Voronoi


def test_sample_one_seed_inside():
    s = sample_seeds("US", 1, 5)
    assert len(s) == 1 and make_domain("US").sdf(s.points)[0] < 0


def test_sample_disk_mean():
    assert np.linalg.norm(sample_seeds("UD", 1000, 0).points.mean(0)) < 0.05


def test_sample_deterministic():
    np.testing.assert_array_equal(sample_seeds("PH", 50, 7).points, sample_seeds("PH", 50, 7).points)


def test_voronoi_two_seeds():
    m = voronoi_cells(SeedSet([(0.25, 0.5), (0.75, 0.5)]), "US")
    assert m.n_cells == 2
    np.testing.assert_allclose(m.cell_areas, [0.5, 0.5], atol=1e-14)
    left = m.vertices[m.cells[0]]
    np.testing.assert_allclose(left[:, 0].max(), 0.5, atol=1e-14)


def test_voronoi_four_squares():
    m = voronoi_cells(SeedSet([(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)]), "US")
    np.testing.assert_allclose(m.cell_areas, 0.25, atol=1e-14)
    assert all(len(c) == 4 for c in m.cells)


@pytest.mark.parametrize("did", ["US", "UD", "PH", "SC", "LS", "BE"])
def test_voronoi_valid_and_closed(did):
    d = make_domain(did)
    m = vp_variant(d, 150, "VP2", 2)
    assert validate(m) == []
    # curved walls are polygonised at cell scale
    assert abs(m.cell_areas.sum() - d.area) < (0.02 * d.area if d.id in ("UD", "PH", "SC") else 1e-12)


def test_lloyd_fixed_point():
    p = [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)]
    np.testing.assert_allclose(lloyd(SeedSet(p), "US", 10).points, p, atol=1e-14)


def test_lloyd_converges_to_grid():
    s = lloyd(sample_seeds("US", 4, 11), "US", 200).points
    got = sorted(map(tuple, np.round(s, 3)))
    assert np.allclose(got, [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)], atol=1e-3)


def test_lloyd_energy_non_increasing():
    s0 = sample_seeds("US", 60, 4)
    s10, s20 = lloyd(s0, "US", 10), lloyd(s0, "US", 20)
    e10 = cvt_energy(s10, voronoi_cells(s10, "US"))
    e20 = cvt_energy(s20, voronoi_cells(s20, "US"))
    assert e20 <= e10 + 1e-15


def test_vp4_800_cells():
    m = vp_variant("US", 800, "VP4", 0)
    assert m.n_cells == 800 and validate(m) == []


def test_vp1_four_cells():
    assert vp_variant("US", 4, "VP1", 3).n_cells == 4


def test_cvt_improves_min_edge():
    wins = sum(
        quality_stats(vp_variant("US", 200, "VP4", s)).min_edge_length >= quality_stats(vp_variant("US", 200, "VP1", s)).min_edge_length
        for s in range(20)
    )
    assert wins >= 16


def test_vp_convex_cells():
    m = vp_variant("US", 200, "VP3", 1)
    for c in m.cells:
        xy = m.vertices[c]
        d1 = np.roll(xy, -1, 0) - xy
        d2 = np.roll(xy, -2, 0) - np.roll(xy, -1, 0)
        assert (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] >= -1e-12).all()


# displaced grids


def test_dp1_is_uniform_grid():
    m = displaced_mesh("US", 2, 2, "DP1")
    assert m.n_vertices == 9
    np.testing.assert_allclose(m.cell_areas, 0.25)


def test_dp5_moves_interior_only():
    ref = displaced_mesh("US", 20, 20, "DP1")
    m = displaced_mesh("US", 20, 20, "DP5", 3)
    assert validate(m) == []
    on_bnd = np.isin(np.arange(m.n_vertices), m.boundary_edges.ravel())
    np.testing.assert_allclose(m.vertices[on_bnd], ref.vertices[on_bnd], atol=1e-15)
    assert (np.linalg.norm(m.vertices[~on_bnd] - ref.vertices[~on_bnd], axis=1) > 0).all()


def test_dp2_graded():
    a1 = displaced_mesh("US", 4, 4, "DP1").cell_areas
    a2 = displaced_mesh("US", 4, 4, "DP2").cell_areas
    np.testing.assert_allclose(a1, 1 / 16)
    assert np.ptp(a2) > 1e-3
    assert a2.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("v", DP_VARIANTS)
@pytest.mark.parametrize("did", ["US", "BE", "PH", "LS"])
def test_dp_valid(v, did):
    assert validate(displaced_mesh(did, 12, 12, v, 1)) == []


# tiles


def reflex_count(loop):
    d1 = np.roll(loop, -1, 0) - loop
    d0 = loop - np.roll(loop, 1, 0)
    return int(((d0[:, 0] * d1[:, 1] - d0[:, 1] * d1[:, 0]) < 0).sum())


def test_tp1_star():
    t = tile_shape("TP1")
    assert len(t) == 10 and reflex_count(t) >= 1


def test_tp3_u_area():
    t = tile_shape("TP3")
    assert len(t) == 8
    # 0.6 x 0.6 square minus the 0.2 x 0.4 slot
    assert polygon_area(t) == pytest.approx(0.36 - 0.08, abs=1e-15)


@pytest.mark.parametrize("v", TP_VARIANTS)
def test_tiles_simple(v):
    t = tile_shape(v)
    assert polygon_area(t) > 0 and is_simple(t)


def test_tp3_single_cell():
    m = tiled_mesh("US", 1, 1, "TP3")
    assert m.n_cells == 1 + len(gap_triangles("TP3"))
    assert m.cell_areas.sum() == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("v", TP_VARIANTS)
def test_tp_4x4(v):
    m = tiled_mesh("US", 4, 4, v)
    assert (m.cell_sizes > 3).sum() == 16
    assert validate(m) == []


@pytest.mark.parametrize("did", ["BE", "PH", "LS", "UD"])
def test_tp_other_domains(did):
    assert validate(tiled_mesh(did, 8, 8, "TP2")) == []


# triangulations


def test_dt_three_seeds():
    m = dual_delaunay(SeedSet([(0.2, 0.2), (0.8, 0.3), (0.4, 0.7)]), "US")
    interior = [c for c in m.cells if np.isin(c, [0, 1, 2]).all()]
    assert len(interior) == 1


def test_dt_tie_break_square():
    from polypde.triangulate import delaunay

    p = np.array([(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)])
    for perm in itertools.permutations(range(4)):
        q = p[list(perm)]
        tris = delaunay(q)
        assert len(tris) == 2
        # the diagonal through the lexicographically smallest point wins
        lo = int(np.lexsort((q[:, 1], q[:, 0]))[0])
        assert all(lo in t for t in tris)


@pytest.mark.parametrize("did", ["US", "LS"])
def test_dt_empty_circumcircle(did):
    d = make_domain(did)
    m = dual_delaunay(sample_seeds(d, 80, 9), d)
    v = m.vertices
    t = np.linspace(0, 1, 201)[1:-1, None]
    for c in m.cells:
        ic = incircle(v[c[0]][None], v[c[1]][None], v[c[2]][None], v)
        g = v[c].mean(0)
        for j in set(np.flatnonzero(ic > 1e-10)) - set(c.tolist()):
            # constrained Delaunay: the offending vertex must be hidden behind a wall
            seg = g + t * (v[j] - g)
            assert (d.sdf(seg) > 0).any(), (c, j)


def test_earclip_square():
    assert earclip(one_cell([(0, 0), (1, 0), (1, 1), (0, 1)])).n_cells == 2


def test_earclip_pentagon_fan():
    t = np.linspace(0, 2 * np.pi, 6)[:-1]
    m = earclip(one_cell(np.c_[np.cos(t), np.sin(t)]))
    assert m.n_cells == 3
    # the scan clips vertex 0, then 1, ... so every triangle shares the last vertex
    assert all(4 in c for c in m.cells)
    assert [int(c[1]) for c in m.cells] == [0, 1, 2]


def test_earclip_count_identity():
    src = vp_variant("US", 120, "VP4", 0)
    assert earclip(src).n_cells == int((src.cell_sizes - 2).sum())


def test_fan_square():
    m = fan_random(one_cell([(0, 0), (1, 0), (1, 1), (0, 1)]), 3)
    assert m.n_cells == 4 and m.n_vertices == 5


def test_fan_new_vertices():
    src = vp_variant("PH", 90, "VP4", 1)
    m = fan_random(src, 1)
    assert m.n_vertices - src.n_vertices == src.n_cells
    assert validate(m) == []
    assert min_angle(m) > 0


def test_cdt_quad_delaunay_diagonal():
    # the Delaunay diagonal is the short one
    m = cdt_cells(one_cell([(0, 0), (2, -0.2), (4, 0), (2, 0.2)]))
    assert m.n_cells == 2
    assert all({1, 3} <= set(c.tolist()) for c in m.cells)


def test_cdt_u_tile():
    m = cdt_cells(one_cell(tile_shape("TP3")))
    u = tile_shape("TP3")
    cent = np.array([m.vertices[c].mean(0) for c in m.cells])
    assert point_in_polygon(cent, u).all()
    assert m.n_vertices == len(u)


def test_pt4_equilateral_unchanged():
    m = conforming_dt(one_cell([(0, 0), (1, 0), (0.5, np.sqrt(3) / 2)]))
    assert m.n_cells == 1


def test_pt4_sliver():
    m = conforming_dt(one_cell([(0, 0), (10, 0), (10, 1), (0, 1)]))
    assert min_angle(m) >= 20 - 1e-9
    assert validate(m) == []


@pytest.mark.parametrize("v", ["PT1", "PT2", "PT3", "PT4"])
def test_triangulations_valid(v):
    from polypde.triangulate import triangulate_mesh

    d = make_domain("SC")
    src = vp_variant(d, 120, "VP4", 0)
    m = triangulate_mesh(src, v, 0, d)
    assert validate(m) == [] and m.is_triangular
    if v == "PT4":
        # Steiner points on arcs are projected onto the true boundary
        assert abs(m.cell_areas.sum() - d.area) <= abs(src.cell_areas.sum() - d.area)
    else:
        assert m.cell_areas.sum() == pytest.approx(src.cell_areas.sum(), rel=1e-12)


# clipping against curved and re-entrant walls


def test_clip_arc_bulging_past_edge():
    # both ends of the outer grid edges lie outside the disk; the arc bulges across
    d = make_domain("UD")
    m = displaced_mesh(d, 2, 1, "DP1")
    assert validate(m) == []
    assert abs(m.cell_areas.sum() - d.area) < 0.05 * d.area


def test_clip_edge_along_wall_into_hole():
    # bottom grid edge runs along y = 0 from inside the hole to the wall
    d = make_domain("PH")
    m = displaced_mesh(d, 7, 7, "DP1")
    assert validate(m) == []
    # the sampled hole is inscribed, so the mesh can only overshoot
    assert 0 <= m.cell_areas.sum() - d.area < 1e-2


def test_clip_hole_splits_cell():
    # y = 0.36 crosses the hole centred at (0.75, 0.25), leaving two pieces
    for v in ("DP1", "DP2"):
        m = displaced_mesh("SC", 10, 10, v)
        assert validate(m) == []
        assert all(is_simple(m.vertices[c]) for c in m.cells)


def test_tiled_ls_corner_on_quad_side():
    m = tiled_mesh("LS", 2, 1, "TP3")
    assert validate(m) == []
    assert m.cell_areas.sum() == pytest.approx(3.0, abs=1e-12)


def test_refine_arcs_lattice():
    from polypde._clip import refine_arcs

    d = make_domain("UD")
    src = vp_variant(d, 100, "VP2", 0)
    m = refine_arcs(src, d, 0.02)
    assert validate(m) == []
    on = np.unique(m.boundary_edges.ravel())
    np.testing.assert_allclose(np.hypot(*m.vertices[on].T), 1.0, atol=1e-9)
    # chord deficit of a lattice polygon with spacing s is about s^2 / 12 per unit length
    assert abs(m.cell_areas.sum() - d.area) < 2 * np.pi * 0.02**2 / 12 * 1.05
    assert abs(m.cell_areas.sum() - d.area) < abs(src.cell_areas.sum() - d.area)


def test_refine_arcs_keeps_triangles():
    from polypde._clip import refine_arcs

    d = make_domain("PH")
    src = dual_delaunay(sample_seeds(d, 120, 3), d)
    m = refine_arcs(src, d, 0.01)
    assert m.is_triangular and validate(m) == []
    assert m.n_vertices > src.n_vertices


def test_earclip_scaled_z_tile():
    # collinear walls after float scaling used to block every ear
    xy = 0.1 + tile_shape("TP2") / 6.0
    t = earclip(one_cell(xy))
    assert t.n_cells == 6
    assert t.cell_areas.min() > 0
    assert t.cell_areas.sum() == pytest.approx(polygon_area(xy), rel=1e-14)


@pytest.mark.parametrize("did", ["UD", "PH", "SC"])
def test_voronoi_no_near_coincident_wall_vertices(did):
    m = vp_variant(did, 800, "VP1", 3)
    e = np.asarray(m.boundary_edges)
    length = np.linalg.norm(m.vertices[e[:, 0]] - m.vertices[e[:, 1]], axis=1)
    assert length.min() >= 1e-2 * np.sqrt(make_domain(did).area / 800)
