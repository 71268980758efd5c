import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alexlab.generators import (
    ConeOverCircle,
    EuclideanBall,
    FlatCylinder,
    HyperbolicDisk,
    ParaboloidPatch,
    exact_distance,
    make_space,
    sample,
)
from conftest import get

angle = st.floats(0.0, 2 * math.pi, exclude_max=True)
radius = st.floats(0.0, 4.0)


def test_cone_unrolled_distance():
    cone = ConeOverCircle(0.5)
    assert exact_distance(cone, (1.0, 0.0), (1.0, math.pi / 2)) == pytest.approx(math.sqrt(2), abs=1e-14)
    assert exact_distance(cone, (0.0, 0.0), (2.5, 1.0)) == pytest.approx(2.5, abs=1e-15)


def test_cone_largest_link_separation():
    # link points at most pi*rho apart; unrolled angle pi/2 for rho = 0.5
    cone = ConeOverCircle(0.5)
    assert exact_distance(cone, (1.0, 0.0), (2.0, 0.5 * math.pi)) == pytest.approx(math.sqrt(5), abs=1e-14)
    assert exact_distance(cone, (1.0, 0.1), (2.0, 0.1 + 0.6 * math.pi)) == pytest.approx(
        math.sqrt(5 - 4 * math.cos(0.4 * math.pi)), abs=1e-14
    )


def test_cylinder_half_circumference():
    cyl = FlatCylinder(1.0)
    assert exact_distance(cyl, (0.0, 0.0), (math.pi, 0.0)) == pytest.approx(math.pi, abs=1e-15)
    assert exact_distance(cyl, (0.1, 0.0), (2 * math.pi - 0.1, 3.0)) == pytest.approx(math.hypot(0.2, 3.0))


def test_hyperbolic_radial_and_law_of_cosines():
    hyp = HyperbolicDisk(-1.0, 6.0)
    assert exact_distance(hyp, (0.0, 0.0), (2.0, 1.3)) == pytest.approx(2.0, abs=1e-14)
    d = exact_distance(hyp, (1.0, 0.0), (1.0, math.pi / 2))
    assert d == pytest.approx(math.acosh(math.cosh(1) ** 2), abs=1e-13)
    hyp4 = HyperbolicDisk(-4.0, 3.0)
    assert exact_distance(hyp4, (0.0, 0.0), (1.5, 0.0)) == pytest.approx(1.5, abs=1e-14)


def test_exact_distance_errors():
    with pytest.raises(ValueError):
        exact_distance(ConeOverCircle(0.5), (1.0, 0.0), (1.0, 4.0))
    with pytest.raises(ValueError):
        exact_distance(ParaboloidPatch(), (0.0, 0.0), (1.0, 0.0))


def test_link_measures_and_areas():
    assert ConeOverCircle(0.5, 4.0).link_measure == pytest.approx(math.pi)
    assert EuclideanBall(2, 1.0).link_measure == pytest.approx(2 * math.pi)
    assert EuclideanBall(3, 1.0).link_measure == pytest.approx(4 * math.pi)
    assert ConeOverCircle(0.5, 4.0).total_area == pytest.approx(8 * math.pi)
    assert HyperbolicDisk(-1.0, 2.0).total_area == pytest.approx(2 * math.pi * (math.cosh(2) - 1))


@pytest.mark.parametrize(
    "kind,params",
    [
        ("cone", {"rho": 1.2}),
        ("cone", {"rho": 0.0}),
        ("hyperbolic", {"kappa": 0.0}),
        ("euclidean", {"n": 1}),
        ("cylinder", {"rho": -1.0}),
        ("paraboloid", {"a": 0.0}),
        ("torus", {}),
    ],
)
def test_make_space_rejects(kind, params):
    with pytest.raises(ValueError):
        make_space(kind, **params)


def test_make_space_spec_roundtrip():
    sp = make_space({"kind": "cone", "rho": 0.5, "R": 4.0})
    assert sp == ConeOverCircle(0.5, 4.0)
    assert make_space(sp.spec()) == sp
    assert hash(sp) == hash(ConeOverCircle(0.5, 4.0))


def test_cone_rho_one_is_the_plane():
    cone = ConeOverCircle(1.0, 4.0)
    plane = EuclideanBall(2, 4.0)
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.uniform(0, 4, 500), rng.uniform(0, 2 * math.pi, 500)])
    Y = np.column_stack([rng.uniform(0, 4, 500), rng.uniform(0, 2 * math.pi, 500)])
    np.testing.assert_allclose(cone.distance(X, Y), plane.distance(cone.to_plane(X), cone.to_plane(Y)), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(radius, angle, radius, angle, radius, angle)
def test_cone_metric_axioms(r1, t1, r2, t2, r3, t3):
    cone = ConeOverCircle(0.5)
    L = cone.link_length
    x, y, z = (np.array([r, t * L / (2 * math.pi)]) for r, t in ((r1, t1), (r2, t2), (r3, t3)))
    d = cone.distance
    assert d(x, y) == pytest.approx(float(d(y, x)), abs=1e-12)
    assert d(x, x) == pytest.approx(0.0, abs=1e-12)
    assert d(x, z) <= d(x, y) + d(y, z) + 1e-9


@settings(max_examples=100, deadline=None)
@given(radius, angle, radius, angle, radius, angle)
def test_hyperbolic_metric_axioms(r1, t1, r2, t2, r3, t3):
    hyp = HyperbolicDisk(-1.0, 6.0)
    x, y, z = np.array([r1, t1]), np.array([r2, t2]), np.array([r3, t3])
    d = hyp.distance
    assert d(x, y) == pytest.approx(float(d(y, x)), abs=1e-12)
    assert d(x, z) <= d(x, y) + d(y, z) + 1e-9


@settings(max_examples=60, deadline=None)
@given(angle, st.floats(-5, 5), angle, st.floats(-5, 5), angle, st.floats(-3, 3))
def test_cylinder_isometry_invariance(u1, z1, u2, z2, shift, lift):
    cyl = FlatCylinder(1.0, 10.0)
    x, y = np.array([u1, z1]), np.array([u2, z2])
    move = np.array([shift, lift])
    xs, ys = x + move, y + move
    xs[0], ys[0] = xs[0] % (2 * math.pi), ys[0] % (2 * math.pi)
    assert cyl.distance(xs, ys) == pytest.approx(float(cyl.distance(x, y)), abs=1e-9)


def test_geodesic_points_are_on_minimal_segments():
    rng = np.random.default_rng(5)
    for sp in (EuclideanBall(2, 3.0), ConeOverCircle(0.5, 4.0), FlatCylinder(1.0, 10.0), HyperbolicDisk(-1.0, 6.0)):
        U = rng.random((20, 2))
        X, Y = sp.unit_to_coords(U[:10]), sp.unit_to_coords(U[10:])
        for x, y in zip(X, Y):
            t = np.linspace(0, 1, 7)
            G = sp.geodesic_point(x, y, t)
            d = float(sp.distance(x, y))
            np.testing.assert_allclose(sp.distance(x[None, :], G), t * d, atol=1e-9)
            np.testing.assert_allclose(sp.distance(G, y[None, :]), (1 - t) * d, atol=1e-9)


def test_sample_weights_and_areas():
    ms = sample(EuclideanBall(2, 1.0), 1000, 0)
    assert ms.total_weight == pytest.approx(math.pi, rel=1e-12)
    assert np.allclose(ms.weights, math.pi / 1000)
    cone = get("cone", N=2000, rho=0.5, R=4.0)
    assert cone.total_weight == pytest.approx(8 * math.pi, rel=1e-12)


def test_sample_determinism_and_base_point():
    a = sample(ConeOverCircle(0.5, 4.0), 500, 3)
    b = sample(ConeOverCircle(0.5, 4.0), 500, 3)
    c = sample(ConeOverCircle(0.5, 4.0), 500, 4)
    assert np.array_equal(a.base.points, b.base.points)
    assert not np.array_equal(a.base.points, c.base.points)
    assert np.array_equal(a.base.points[0], [0.0, 0.0])
    assert a.base.base_index == 0


def test_sample_rejects_tiny():
    with pytest.raises(ValueError):
        sample(EuclideanBall(2, 1.0), 5, 0)


def test_samples_stay_in_domain():
    for sp in (EuclideanBall(3, 1.0), ConeOverCircle(0.3, 2.0), FlatCylinder(1.0, 5.0), HyperbolicDisk(-1.0, 4.0)):
        P = sp.sample_coords(800, 1)
        assert np.all(sp.in_domain(P))
        if sp.kind != "cylinder":
            assert np.all(sp.distance(P, sp.distinguished_point) <= sp.truncation_radius + 1e-12)
    P = FlatCylinder(1.0, 5.0).sample_coords(800, 1)
    assert np.all(np.abs(P[:, 1]) <= 5.0)


def test_euclidean_three_dim_sample_fills_the_ball():
    ms = sample(EuclideanBall(3, 1.0), 2000, 0)
    r = np.linalg.norm(ms.base.points, axis=1)
    assert np.all(r <= 1.0)
    # radial CDF r^3
    assert np.mean(r <= 0.5) == pytest.approx(0.125, abs=0.02)


def test_paraboloid_graph_metric():
    ms = sample(ParaboloidPatch(0.25, 2.0), 1000, 0)
    f = ms.base
    assert f.backing == "graph"
    emb = f.points
    assert np.allclose(emb[:, 2], 0.25 * np.sum(emb[:, :2] ** 2, axis=1))
    j = int(np.argmax(np.linalg.norm(emb[:, :2], axis=1)))
    chord = float(np.linalg.norm(emb[j] - emb[0]))
    assert chord <= f.distance(0, j) <= 1.1 * chord
    assert ms.total_weight == pytest.approx(ParaboloidPatch(0.25, 2.0).total_area)


def test_paraboloid_area():
    a, R = 0.25, 2.0
    expect = math.pi / (6 * a * a) * ((1 + 4 * a * a * R * R) ** 1.5 - 1)
    assert ParaboloidPatch(a, R).total_area == pytest.approx(expect, rel=1e-12)


def test_cylinder_cut_function():
    cyl = FlatCylinder(1.0, 10.0)
    assert cyl.cut(0.0) == pytest.approx(math.pi)
    assert math.isinf(cyl.cut(math.pi / 2))
    assert math.isinf(ConeOverCircle(0.5).cut(0.3))
