import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alexlab.critical import (
    InconclusiveError,
    alpha_of,
    contradiction_margin,
    critical_scan,
    default_curvature,
    epsilon_max,
    gamma_threshold,
    geodesic_placement_check,
    is_critical,
    theorem_constants,
)
from alexlab.generators import FlatCylinder
from alexlab.measure import MeasuredSpace
from alexlab.metric_core import FiniteMetricSpace
from alexlab.model_plane import DomainError
from alexlab.report import INCONCLUSIVE, NO_VIOLATION, VIOLATION
from conftest import get

EPS_MAX_2_1 = 0.29435250562886867  # sqrt(ln 2 / 8)
ALPHA_2_1 = 0.9787983953722232  # 1 - 1 / (1 + 4 / EPS_MAX_2_1**2)
GAMMA_01_2_2 = 1 / 401
GAMMA_CBAR_4 = 0.0011985617259288853  # 1 / (1 + 25 * 4 / (0.01 * 12))


@lru_cache(maxsize=None)
def cylinder_with_antipode(N=4000, half_height=30.0):
    cyl = FlatCylinder(1.0, half_height)
    pts = cyl.sample_coords(N, 0)
    pts = np.vstack([pts, [[math.pi, 0.0], [math.pi, 2 * cyl.circumference]]])
    f = FiniteMetricSpace(points=pts, metric=cyl.distance, dimension_hint=2, analytic=cyl, base_index=0)
    return MeasuredSpace(f, np.full(len(pts), cyl.total_area / len(pts)), 2)


def test_euclidean_points_are_not_critical():
    ms = get("euclidean", n=2, R=1.0)
    f = ms.base
    for q in (10, 200, 1234):
        if f.distance(0, q) < 0.7:
            assert not is_critical(ms, 0.0, 0, q)
    assert not is_critical(ms, 0.0, 17, 300)


def test_cone_apex_distance_has_no_critical_points():
    ms = get("cone", rho=0.5, R=4.0)
    qs = np.flatnonzero((ms.base.row(0) > 0.5) & (ms.base.row(0) < 3.0))[:20]
    assert not any(is_critical(ms, 0.0, 0, int(q)) for q in qs)


def test_cylinder_antipode_is_critical():
    ms = cylinder_with_antipode()
    m = ms.point_count
    assert is_critical(ms, 0.0, 0, m - 2)
    # far up the antipodal line the upward direction escapes: not critical
    assert not is_critical(ms, 0.0, 0, m - 1)


def test_thin_annulus_is_inconclusive():
    ms = get("euclidean", N=200, n=2, R=1.0)
    with pytest.raises(InconclusiveError):
        is_critical(ms, 0.0, 0, 5, annulus_radius=1e-6)
    with pytest.raises(ValueError):
        is_critical(ms, 0.0, 3, 3)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3999), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_criticality_monotone_in_tol(q, t1, t2):
    ms = cylinder_with_antipode()
    lo, hi = sorted((t1, t2))
    if is_critical(ms, 0.0, 0, q % ms.point_count or 1, tol=lo):
        assert is_critical(ms, 0.0, 0, q % ms.point_count or 1, tol=hi)


def test_default_curvature():
    assert default_curvature(get("hyperbolic", kappa=-1.0, R=6.0)) == -1.0
    assert default_curvature(get("cone", rho=0.5, R=4.0)) == 0.0


def test_scans_on_finite_type_spaces():
    flat = get("euclidean", n=2, R=1.0)
    rep = critical_scan(flat, None, 0, [0.2, 0.4, 0.6])
    assert rep.critical == [] and rep.largest_critical_radius is None
    assert all(t > 0 for t in rep.tested_per_radius)
    cone = get("cone", rho=0.5, R=4.0)
    rep = critical_scan(cone, None, 0, [0.5, 1.0, 2.0, 3.0])
    assert rep.critical == []
    assert "no critical points" in rep.verdict
    d = rep.to_dict()
    assert d["critical_per_radius"] == [0, 0, 0, 0]
    with pytest.raises(ValueError):
        critical_scan(cone, None, 0, [2.0, 1.0])


def test_scan_finds_antipode():
    ms = cylinder_with_antipode()
    rep = critical_scan(ms, 0.0, 0, [math.pi], band=1e-9)
    assert (ms.point_count - 2, math.pi) in rep.critical
    assert rep.verdict.startswith("no finite-type evidence")


def test_gamma_threshold():
    assert gamma_threshold(0.1, 2, 2) == pytest.approx(GAMMA_01_2_2, abs=1e-15)
    assert gamma_threshold(0.1, 2, 2, Cbar=4) == pytest.approx(GAMMA_CBAR_4, rel=1e-13)
    assert gamma_threshold(0.1, 2, 2, Cbar=1e6) == pytest.approx(GAMMA_01_2_2, rel=1e-4)
    with pytest.raises(ValueError):
        gamma_threshold(0.1, 2, 2, Cbar=1.5)
    with pytest.raises(ValueError):
        gamma_threshold(0.0, 2, 2)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(1.1, 10.0), st.integers(2, 6), st.floats(1.01, 100.0))
def test_gamma_monotonicity(e1, e2, C, n, scale):
    lo, hi = sorted((e1, e2))
    assert gamma_threshold(lo, C, n) <= gamma_threshold(hi, C, n)
    assert gamma_threshold(lo, C * scale, n) <= gamma_threshold(lo, C, n)
    assert gamma_threshold(lo, C, n, Cbar=C * scale) <= gamma_threshold(lo, C, n)


def test_theorem_constants():
    assert epsilon_max(2, 1.0) == pytest.approx(EPS_MAX_2_1, abs=1e-15)
    assert alpha_of(2, EPS_MAX_2_1) == pytest.approx(ALPHA_2_1, abs=1e-15)
    tc = theorem_constants(2, 1.0)
    assert tc.eps_hat == pytest.approx(0.99 * EPS_MAX_2_1)
    assert tc.alpha_min > ALPHA_2_1
    big = theorem_constants(3, 1e6)
    assert big.epsilon_max < 1e-3 and big.alpha_min > 1 - 1e-9
    with pytest.raises(DomainError):
        theorem_constants(2, 0.0)
    with pytest.raises(DomainError):
        theorem_constants(2, 1.0, eps_hat=1.0)


def test_contradiction_margin():
    R = np.geomspace(0.1, 1000, 50)
    m = np.array([contradiction_margin(2, 1.0, 0.2, r) for r in R])
    # the infimum is reached in floating point once exp(-2R) drops below eps
    assert np.all(m >= math.log(2) - 0.32 - 1e-15)
    assert np.all(np.diff(m) <= 0)
    e = epsilon_max(2, 1.0)
    assert contradiction_margin(2, 1.0, e, 1000.0) == pytest.approx(0.0, abs=1e-12)
    e = 0.99 * epsilon_max(3, 2.0)
    assert min(contradiction_margin(3, 2.0, e, r) for r in R) > 0


def test_geodesic_placement_controls():
    cone = get("cone", rho=0.5, R=4.0)
    rep = geodesic_placement_check(cone, 0, 3.0, 1e-6, 1.0)
    assert rep.verdict == NO_VIOLATION and rep.items_tested > 0
    flat = get("euclidean", n=2, R=1.0)
    assert geodesic_placement_check(flat, 0, 3.0, 1e-6, 0.25).passed
    cyl = get("cylinder", N=4000, rho=1.0, half_height=20.0)
    bad = geodesic_placement_check(cyl, 0, 4.0, 0.1, 3.5)
    assert bad.verdict == VIOLATION
    none = geodesic_placement_check(flat, 0, 3.0, 0.1, 1.0)
    assert none.verdict == INCONCLUSIVE and none.warnings
