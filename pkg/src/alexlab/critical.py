"""Critical points of distance functions, theorem thresholds and geodesic placement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .measure import MeasuredSpace
from .metric_core import FiniteMetricSpace, estimate_curvature_bound, path_vertices
from .model_plane import DomainError, comparison_angle_array, hyperbolic_excess_lower_bound
from .report import INCONCLUSIVE, VerificationReport, _jsonable

MIN_ANNULUS = 8
ANGLE_TOL = 1e-6
PLACEMENT_CAP = 100_000


class InconclusiveError(RuntimeError):
    """The sample around a test point is too thin to decide criticality."""


def _fms(space) -> FiniteMetricSpace:
    return space.base if isinstance(space, MeasuredSpace) else space


def default_curvature(space) -> float:
    """Generator's curvature lower bound, else a sampled estimate."""
    f = _fms(space)
    if f.analytic is not None:
        return float(f.analytic.curvature_lower_bound)
    return estimate_curvature_bound(f)


def comparison_angles_at(space, k: float, p: int, q: int, annulus_radius: float | None = None):
    """Comparison angles at ``q`` between ``p`` and each annulus point ``x``."""
    f = _fms(space)
    p, q = int(p), int(q)
    if p == q:
        raise ValueError("q must differ from p")
    rad = 3.0 * f.net_spacing if annulus_radius is None else float(annulus_radius)
    dq = f.row(q)
    xs = np.flatnonzero((dq > 0) & (dq <= rad))
    xs = xs[xs != p]
    if len(xs) < MIN_ANNULUS:
        raise InconclusiveError(f"annulus around {q} holds {len(xs)} < {MIN_ANNULUS} points")
    dp = f.row(p)
    ang = comparison_angle_array(k, dq[xs], np.full(len(xs), dq[p]), dp[xs])
    return xs, ang


def is_critical(
    space, k: float, p: int, q: int, annulus_radius: float | None = None, tol: float = ANGLE_TOL
) -> bool:
    """Whether ``q`` is a critical point of ``d(p, .)`` at sample resolution.

    Every sample point ``x`` with ``0 < d(q, x) <= annulus_radius`` (default
    ``3 * net_spacing``) must see ``p`` under a comparison angle at ``q`` of
    at most ``pi/2 + tol``; the annulus stands in for the directions at
    ``q``. Raises InconclusiveError when the annulus holds fewer than 8
    points. Angles undefined at curvature ``k`` are ignored.
    """
    _, ang = comparison_angles_at(space, k, p, q, annulus_radius)
    ang = ang[np.isfinite(ang)]
    return bool(np.all(ang <= math.pi / 2 + tol))


@dataclass
class CriticalScanReport:
    """Critical points of ``d(p, .)`` found near each radius of a grid."""

    center: int
    k: float
    radius_grid: list[float]
    critical: list[tuple[int, float]] = field(default_factory=list)
    largest_critical_radius: float | None = None
    tested_per_radius: list[int] = field(default_factory=list)
    critical_per_radius: list[int] = field(default_factory=list)
    inconclusive: int = 0
    verdict: str = ""
    band: float = 0.0
    annulus_radius: float = 0.0

    def critical_radii(self) -> list[float]:
        return [r for r, c in zip(self.radius_grid, self.critical_per_radius) if c > 0]

    def to_dict(self) -> dict[str, Any]:
        return _jsonable(
            {
                "center": self.center,
                "k": self.k,
                "radius_grid": self.radius_grid,
                "critical": [[int(i), float(r)] for i, r in self.critical],
                "largest_critical_radius": self.largest_critical_radius,
                "tested_per_radius": self.tested_per_radius,
                "critical_per_radius": self.critical_per_radius,
                "inconclusive": self.inconclusive,
                "band": self.band,
                "annulus_radius": self.annulus_radius,
                "verdict": self.verdict,
            }
        )


def critical_scan(
    space,
    k: float | None,
    p: int,
    radius_grid,
    *,
    band: float | None = None,
    annulus_radius: float | None = None,
    tol: float = ANGLE_TOL,
) -> CriticalScanReport:
    """Test every sample point within ``band`` of each grid radius for criticality.

    ``band`` defaults to ``net_spacing``. The verdict reports whether critical
    points stop beyond some grid radius; it is evidence for finite
    topological type, never a certificate.
    """
    f = _fms(space)
    k = default_curvature(space) if k is None else float(k)
    grid = [float(r) for r in radius_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("radius grid must be strictly increasing")
    band = f.net_spacing if band is None else float(band)
    rad = 3.0 * f.net_spacing if annulus_radius is None else float(annulus_radius)
    rep = CriticalScanReport(int(p), k, grid, band=band, annulus_radius=rad)
    dp = f.row(int(p))
    for r in grid:
        cand = np.flatnonzero((np.abs(dp - r) <= band) & (dp > 0))
        tested = found = 0
        for q in cand:
            try:
                crit = is_critical(f, k, p, int(q), rad, tol)
            except InconclusiveError:
                rep.inconclusive += 1
                continue
            tested += 1
            if crit:
                found += 1
                rep.critical.append((int(q), float(dp[q])))
        rep.tested_per_radius.append(tested)
        rep.critical_per_radius.append(found)
    if rep.critical:
        rep.largest_critical_radius = max(r for _, r in rep.critical)
    hits = rep.critical_per_radius
    if not rep.critical:
        rep.verdict = "no critical points found on the scanned grid"
    elif hits[-1] > 0:
        rep.verdict = "no finite-type evidence: critical points up to the last scanned radius"
    else:
        last = max(i for i, c in enumerate(hits) if c > 0)
        rep.verdict = f"no critical points beyond radius {grid[last]:.6g} (consistent with finite type, not certified)"
    return rep


# -- explicit thresholds ----------------------------------------------------------


def gamma_threshold(eps: float, C: float, n: int, Cbar: float | None = None) -> float:
    """Volume-ratio threshold of the geodesic placement lemma.

    Without ``Cbar``: ``1 / (1 + C^n / eps^n)``. With ``Cbar > C`` the
    intermediate bound ``1 / (1 + (1+Cbar)^n C^n / (eps^n (Cbar^n - C^n)))``,
    which tends to the former as ``Cbar`` grows.
    """
    if not eps > 0 or not C > 1 or n < 2:
        raise ValueError("need eps > 0, C > 1, n >= 2")
    ratio = (C / eps) ** n
    if Cbar is None:
        return 1.0 / (1.0 + ratio)
    if not Cbar > C:
        raise ValueError("Cbar must exceed C")
    # (1+Cbar)^n / (Cbar^n - C^n) in overflow-safe form
    factor = ((1.0 + Cbar) / Cbar) ** n / -math.expm1(n * math.log(C / Cbar))
    return 1.0 / (1.0 + factor * ratio)


@dataclass(frozen=True)
class TheoremConstants:
    n: int
    kappa: float
    epsilon_max: float
    alpha_min: float
    eps_hat: float


def epsilon_max(n: int, kappa: float) -> float:
    """``(ln 2 / (8 kappa))^{(n-1)/n}``."""
    if n < 2:
        raise DomainError("n must be >= 2")
    if not kappa > 0:
        raise DomainError("kappa must be positive")
    return (math.log(2.0) / (8.0 * kappa)) ** ((n - 1) / n)


def alpha_of(n: int, eps_hat: float) -> float:
    """``1 - 1 / (1 + 2^n / eps^n)``."""
    return 1.0 - 1.0 / (1.0 + (2.0 / eps_hat) ** n)


def theorem_constants(n: int, kappa: float, eps_hat: float | None = None) -> TheoremConstants:
    """Thresholds of the finite-type theorem for curvature ``>= -kappa^2``.

    ``eps_hat`` defaults to ``0.99 * epsilon_max`` and may not exceed
    ``epsilon_max``.
    """
    em = epsilon_max(n, kappa)
    e = 0.99 * em if eps_hat is None else float(eps_hat)
    if not 0 < e <= em:
        raise DomainError(f"eps_hat must lie in (0, {em}]")
    return TheoremConstants(int(n), float(kappa), em, alpha_of(n, e), e)


def contradiction_margin(n: int, kappa: float, eps: float, R: float) -> float:
    """Excess lower bound at distance ``R`` minus the bound ``8 eps^{n/(n-1)}``."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    return hyperbolic_excess_lower_bound(kappa, R) - 8.0 * eps ** (n / (n - 1))


def geodesic_placement_check(
    space,
    p: int,
    C: float,
    eps: float,
    r: float,
    *,
    tol: float | None = None,
    seed: int = 0,
    cap: int = PLACEMENT_CAP,
) -> VerificationReport:
    """For every ``a`` in ``B(p, r)`` look for a far ``b`` whose geodesic passes near ``a``.

    ``b`` ranges over sample points with ``d(p, b) >= C r``; ``a`` passes
    when some vertex of the shortest path ``p b`` lies within
    ``eps * r + tol`` of it (``tol`` defaults to ``net_spacing``). Beyond
    ``cap`` candidates a seeded subsample of far points is used.
    """
    f = _fms(space)
    p = int(p)
    tol = f.net_spacing if tol is None else float(tol)
    rep = VerificationReport(pipeline="geodesic-placement", tolerance=tol)
    dp = f.row(p)
    far = np.flatnonzero(dp >= C * r)
    rep.details = {"C": C, "eps": eps, "r": r, "seed": seed, "far_points": int(len(far))}
    if len(far) == 0:
        rep.verdict = INCONCLUSIVE
        rep.warnings.append("no sample point beyond C*r")
        return rep
    if len(far) > cap:
        far = np.sort(np.random.default_rng(seed).choice(far, size=cap, replace=False))
    _, pred = f.shortest_path_tree(p)
    on_paths = np.zeros(f.point_count, dtype=bool)
    for b in far:
        if on_paths[b]:
            continue
        on_paths[path_vertices(pred, p, int(b))] = True
    S = np.flatnonzero(on_paths)
    A = np.flatnonzero(dp <= r)
    limit = eps * r + tol
    dmin = np.array([float(np.min(f.row(int(a))[S])) for a in A])
    margins = limit - dmin
    rep.items_tested = len(A)
    rep.worst_margin = float(np.min(margins)) if len(A) else math.inf
    for a, dist, m in zip(A, dmin, margins):
        if m < 0:
            rep.violations.append({"a": int(a), "distance": float(dist), "limit": limit, "margin": float(m)})
    rep.violations.sort(key=lambda v: v["margin"])
    return rep.finalize()
