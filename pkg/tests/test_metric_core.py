import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alexlab.generators import make_space
from alexlab.metric_core import (
    FiniteMetricSpace,
    QuadrupleBatch,
    build_from_graph,
    check_quadruples,
    estimate_curvature_bound,
    geodesic,
    quadruple_defect,
    sample_quadruples,
)
from alexlab.model_plane import DomainError
from conftest import get

OCTILE_STRETCH = 1.0 / math.cos(math.pi / 8)  # worst 8-neighbour grid detour


def euclid(X, Y):
    return np.sqrt(np.sum((np.asarray(X) - np.asarray(Y)) ** 2, axis=-1))


def test_path_graph():
    sp = build_from_graph("abc", [("a", "b", 1), ("b", "c", 1)])
    assert sp.distance(sp.index("a"), sp.index("c")) == 2.0


def test_heavy_edge_shortcut():
    sp = build_from_graph("abc", [("a", "b", 1), ("b", "c", 1), ("a", "c", 3)])
    assert sp.distance(0, 2) == 2.0
    assert geodesic(sp, 0, 2).vertices == (0, 1, 2)


def test_build_errors():
    with pytest.raises(ValueError, match="disconnected"):
        build_from_graph("abcd", [("a", "b", 1), ("c", "d", 1)])
    with pytest.raises(ValueError, match="nonpositive"):
        build_from_graph("ab", [("a", "b", 0.0)])


def grid_space(m=21):
    h = 1.0 / (m - 1)
    verts = [(i, j) for i in range(m) for j in range(m)]
    edges = []
    for i, j in verts:
        for di, dj in [(1, 0), (0, 1), (1, 1), (1, -1)]:
            a, b = i + di, j + dj
            if 0 <= a < m and 0 <= b < m:
                edges.append(((i, j), (a, b), h * math.hypot(di, dj)))
    pts = np.array(verts, dtype=float) * h
    return build_from_graph(verts, edges, points=pts), pts


def test_grid_net_approximates_plane():
    sp, pts = grid_space()
    D = sp.distance_matrix()
    E = euclid(pts[:, None, :], pts[None, :, :])
    assert np.all(D >= E - 1e-12)
    assert np.all(D <= OCTILE_STRETCH * E + 1e-12)
    assert sp.net_spacing == pytest.approx(1 / 20)


def test_geodesic_length_equals_distance_on_graph():
    sp, _ = grid_space(11)
    rng = np.random.default_rng(1)
    for p, q in rng.integers(0, sp.point_count, size=(30, 2)):
        g = geodesic(sp, p, q)
        assert g.length == pytest.approx(sp.distance(p, q), abs=1e-12)
        assert g.endpoints == (p, q)


def test_geodesic_trivial_and_deterministic():
    sp, _ = grid_space(11)
    assert geodesic(sp, 5, 5) == geodesic(sp, 5, 5)
    assert geodesic(sp, 5, 5).vertices == (5,) and geodesic(sp, 5, 5).length == 0.0
    a = geodesic(sp, 0, 120)
    sp2, _ = grid_space(11)
    assert geodesic(sp2, 0, 120) == a


def test_cone_rays_are_geodesics():
    ms = get("cone", N=2000, rho=0.5, R=4.0)
    f = ms.base
    nbrs = f.graph[0].indices
    for j in nbrs[:5]:
        g = geodesic(f, 0, int(j))
        assert g.vertices == (0, int(j))
        assert g.length == pytest.approx(f.points[j, 0], abs=1e-12)
    far = int(np.argmax(f.row(0)))
    g = geodesic(f, 0, far)
    assert f.points[far, 0] <= g.length <= 1.1 * f.points[far, 0] + f.net_spacing


def test_exact_space_validation_rejects_non_metric():
    pts = np.random.default_rng(0).random((30, 2))
    with pytest.raises(ValueError):
        FiniteMetricSpace(points=pts, metric=lambda X, Y: euclid(X, Y) ** 2)


def test_defect_flat_centroid():
    pts = np.array([[0, 0]] + [[math.cos(t), math.sin(t)] for t in (0, 2 * math.pi / 3, 4 * math.pi / 3)])
    sp = FiniteMetricSpace(points=pts, metric=euclid)
    assert quadruple_defect(sp, 0.0, 0, 1, 2, 3) == pytest.approx(0.0, abs=1e-12)
    for perm in itertools.permutations([1, 2, 3]):
        assert quadruple_defect(sp, 0.0, 0, *perm) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        quadruple_defect(sp, 0.0, 0, 1, 1, 2)


def test_hyperbolic_quadruple_refutes_flat():
    ms = get("hyperbolic", N=2000, kappa=-1.0, R=6.0)
    quads = sample_quadruples(ms.point_count, 5000, np.random.default_rng(0))
    d = QuadrupleBatch(ms.base, quads).defects(0.0)
    assert np.nanmin(d) < -1e-3
    assert np.nanmin(QuadrupleBatch(ms.base, quads).defects(-1.0)) >= -1e-6


def test_cone_apex_defects_nonnegative():
    ms = get("cone", N=2000, rho=0.5, R=4.0)
    rng = np.random.default_rng(3)
    abc = np.stack([rng.choice(np.arange(1, ms.point_count), 3, replace=False) for _ in range(3000)])
    quads = np.column_stack([np.zeros(len(abc), dtype=int), abc])
    assert np.min(QuadrupleBatch(ms.base, quads).defects(0.0)) >= -1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_defect_permutation_invariant_and_monotone(seed):
    ms = get("hyperbolic", N=2000, kappa=-1.0, R=6.0)
    q = sample_quadruples(ms.point_count, 1, np.random.default_rng(seed))[0]
    base = quadruple_defect(ms.base, -0.5, *q)
    assert quadruple_defect(ms.base, -0.5, q[0], q[2], q[3], q[1]) == pytest.approx(base, abs=1e-12)
    assert quadruple_defect(ms.base, -0.5, q[0], q[3], q[1], q[2]) == pytest.approx(base, abs=1e-12)
    assert quadruple_defect(ms.base, -1.0, *q) >= base - 1e-12
    assert quadruple_defect(ms.base, 0.0, *q) <= base + 1e-12


def test_estimate_curvature_bounds():
    hyp = get("hyperbolic", N=2000, kappa=-1.0, R=6.0)
    assert -1.1 <= estimate_curvature_bound(hyp.base, 2000, 0) <= -0.9
    flat = get("euclidean", N=2000, n=2, R=1.0)
    assert abs(estimate_curvature_bound(flat.base, 2000, 0)) <= 0.05
    cone = get("cone", N=2000, rho=0.8, R=4.0)
    assert abs(estimate_curvature_bound(cone.base, 2000, 0)) <= 0.05


def test_estimate_is_deterministic():
    hyp = get("hyperbolic", N=2000, kappa=-1.0, R=6.0)
    assert estimate_curvature_bound(hyp.base, 500, 7) == estimate_curvature_bound(hyp.base, 500, 7)


def test_estimate_needs_four_points():
    sp = FiniteMetricSpace(points=np.eye(3), metric=euclid)
    with pytest.raises(ValueError):
        estimate_curvature_bound(sp)


def test_positive_curvature_refuted_by_large_triangles():
    flat = get("euclidean", N=2000, n=2, R=1.0)
    rep = check_quadruples(flat.base, 100.0, 200, 0)
    assert not rep.passed


def test_check_quadruples_report():
    flat = get("euclidean", N=2000, n=2, R=1.0)
    rep = check_quadruples(flat.base, 0.0, 2000, 0)
    assert rep.passed and rep.items_tested == 2000 and rep.tolerance == 1e-6
    hyp = get("hyperbolic", N=2000, kappa=-1.0, R=6.0)
    bad = check_quadruples(hyp.base, 0.0, 2000, 0)
    assert not bad.passed
    defects = [v["defect"] for v in bad.violations]
    assert defects == sorted(defects)


def test_graph_tolerance_default():
    sp, _ = grid_space(11)
    assert sp.default_tolerance == pytest.approx(3 * sp.net_spacing)


def test_distance_table_is_symmetric():
    ms = get("cone", N=2000, rho=0.5, R=4.0)
    D = ms.base.distance_matrix()
    assert np.array_equal(D, D.T)
    assert np.all(np.diag(D) == 0)


def test_large_space_without_table_matches_exact():
    sp = make_space("euclidean", n=2, R=1.0)
    pts = sp.sample_coords(4100, 0)
    f = FiniteMetricSpace(points=pts, metric=sp.distance, validate=False)
    assert not f.has_table
    assert f.distance(3, 17) == pytest.approx(float(np.linalg.norm(pts[3] - pts[17])), abs=1e-15)
