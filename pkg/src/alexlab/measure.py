"""Hausdorff-measure surrogates and volume comparison checks.

A MeasuredSpace attaches a positive weight to every sample point; ball
volumes, radial profiles ``a(r)`` and growth ratios are weighted counts.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import gamma as gamma_fn

from .metric_core import FiniteMetricSpace
from .quadrature import integrate
from .report import EXCLUDED, VerificationReport

MIN_BIN_POPULATION = 10
PROFILE_EXTENT = 0.8


def unit_ball_volume(n: int) -> float:
    """``omega_n = pi^{n/2} / Gamma(n/2 + 1)``."""
    return math.pi ** (n / 2) / gamma_fn(n / 2 + 1)


@dataclass(frozen=True)
class MeasuredSpace:
    """A finite metric space with per-point weights approximating ``H^n``."""

    base: FiniteMetricSpace
    weights: np.ndarray
    n: int

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.base.point_count,):
            raise ValueError("one weight per point required")
        if not np.all(w > 0):
            raise ValueError("weights must be positive")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def point_count(self) -> int:
        return self.base.point_count

    @property
    def analytic(self):
        return self.base.analytic


def ball_volume(ms: MeasuredSpace, p: int, r: float) -> float:
    """Total weight of the sample points within distance ``r`` of ``p``."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    d = ms.base.row(int(p))
    return float(ms.weights[d <= r].sum())


@dataclass
class RadialProfile:
    """Shell masses about ``center`` divided by the shell width."""

    center: int
    edges: np.ndarray
    a_estimates: np.ndarray
    counts: np.ndarray
    warnings: list[str] = field(default_factory=list)

    @property
    def r_mid(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def ratios(self, n: int) -> np.ndarray:
        """``a(r) / r^{n-1}`` at the shell midpoints."""
        return self.a_estimates / self.r_mid ** (n - 1)

    def write_csv(self, path, n: int) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r_mid", "a_estimate", "a_over_r_pow"])
            for row in zip(self.r_mid, self.a_estimates, self.ratios(n)):
                w.writerow([repr(float(v)) for v in row])


def radial_profile(
    ms: MeasuredSpace, p: int, bin_count: int = 8, max_radius: float | None = None
) -> RadialProfile:
    """Equal-width shells about ``p`` out to ``0.8`` of the farthest sample point.

    Shell ``0`` is the closed ball ``[0, e_1]``; later shells are half-open
    ``(e_j, e_{j+1}]``, so the shell masses sum to the ball volume at the
    last edge. Profiles averaging fewer than 10 points per shell carry a
    warning.
    """
    if bin_count < 4:
        raise ValueError("bin_count must be >= 4")
    d = ms.base.row(int(p))
    top = PROFILE_EXTENT * float(d.max()) if max_radius is None else float(max_radius)
    if not top > 0:
        raise ValueError("profile needs points at positive distance")
    edges = np.linspace(0.0, top, bin_count + 1)
    j = np.searchsorted(edges, d, side="left")
    j = np.maximum(j - 1, 0)
    inside = d <= edges[-1]
    mass = np.bincount(j[inside], weights=ms.weights[inside], minlength=bin_count)
    counts = np.bincount(j[inside], minlength=bin_count)
    prof = RadialProfile(int(p), edges, mass / np.diff(edges), counts)
    if counts.mean() < MIN_BIN_POPULATION:
        prof.warnings.append(
            f"average shell population {counts.mean():.1f} is below {MIN_BIN_POPULATION}"
        )
    return prof


def bg_profile_check(profile: RadialProfile, n: int, tol: float = 0.05) -> VerificationReport:
    """Monotonicity of ``a(r)/r^{n-1}`` across shells.

    Shell ``j`` violates when its ratio exceeds ``(1 + tol)`` times the
    smallest ratio among the earlier shells. The margin of shell ``j`` is
    ``1 + tol - ratio_j / min_{i<j} ratio_i``.
    """
    rep = VerificationReport(pipeline="check-bg", tolerance=tol)
    rep.warnings.extend(profile.warnings)
    ratios = profile.ratios(n)
    if len(ratios) < 2:
        rep.warnings.append("empty profile")
        return rep.finalize()
    run_min = np.minimum.accumulate(ratios)[:-1]
    arg = np.array([int(np.argmin(ratios[: j + 1])) for j in range(len(ratios) - 1)])
    with np.errstate(divide="ignore", invalid="ignore"):
        margins = 1 + tol - ratios[1:] / run_min
    margins = np.where(run_min > 0, margins, np.where(ratios[1:] > 0, -np.inf, 1 + tol))
    rep.items_tested = len(margins)
    rep.worst_margin = float(np.min(margins))
    for j in np.flatnonzero(margins < 0):
        rep.violations.append(
            {
                "bin_pair": [int(arg[j]), int(j + 1)],
                "r_mid": [float(profile.r_mid[arg[j]]), float(profile.r_mid[j + 1])],
                "ratio": [float(run_min[j]), float(ratios[j + 1])],
                "margin": float(margins[j]),
            }
        )
    rep.details = {"ratios": ratios.tolist(), "n": n}
    if rep.violations:
        rep.details["first_violation"] = rep.violations[0]["bin_pair"]
        with np.errstate(divide="ignore", invalid="ignore"):
            rep.details["worst_ratio"] = float(np.max(ratios[1:] / run_min))
    return rep.finalize()


def ball_ratio_check(
    ms: MeasuredSpace, p: int, r1: float, r2: float, n: int, tol: float = 0.01
) -> VerificationReport:
    """``V(p, r1) / V(p, r2) >= (r1/r2)^n - tol``."""
    if not 0 < r1 <= r2:
        raise ValueError("need 0 < r1 <= r2")
    v2 = ball_volume(ms, p, r2)
    if v2 <= 0:
        raise ValueError("zero volume at r2")
    ratio = ball_volume(ms, p, r1) / v2
    target = (r1 / r2) ** n
    rep = VerificationReport(pipeline="check-bg-ratio", items_tested=1, tolerance=tol)
    rep.worst_margin = ratio - target + tol
    rep.details = {"ratio": ratio, "model_ratio": target, "r1": r1, "r2": r2, "n": n}
    if rep.worst_margin < 0:
        rep.violations.append({"r1": r1, "r2": r2, "ratio": ratio, "model_ratio": target})
    return rep.finalize()


def volume_growth_ratio(ms: MeasuredSpace, p: int, r: float, n: int | None = None) -> float:
    """``V(p, r) / (omega_n r^n)``."""
    if not r > 0:
        raise ValueError("r must be positive")
    n = ms.n if n is None else n
    return ball_volume(ms, p, r) / (unit_ball_volume(n) * r**n)


def min_volume_growth_ratio(ms: MeasuredSpace, p: int, radii, n: int | None = None) -> float:
    """Smallest growth ratio over a radius grid."""
    return min(volume_growth_ratio(ms, p, float(r), n) for r in radii)


@dataclass(frozen=True)
class IntegrationLemmaResult:
    lhs: float
    rhs: float
    passed: bool
    tol: float


def integration_lemma_check(space, R: float, tol: float = 1e-9) -> IntegrationLemmaResult:
    """Ball volume versus polar integration up to the cut function.

    ``lhs`` is the analytic volume of the ball of radius ``R`` about the
    distinguished point. ``rhs`` integrates ``min(R, cut(v))^n / n`` over the
    link by adaptive quadrature (for ``n >= 3`` only round links with an
    infinite cut occur, so the link integral is its measure).
    """
    lhs = space.model_ball_volume(R) if hasattr(space, "model_ball_volume") else None
    if lhs is None:
        raise ValueError(f"{getattr(space, 'kind', space)!r} has no analytic ball volume")
    n = space.n
    if n == 2:
        length = space.link_length
        scale = space.link_measure / length

        def inner(psi):
            cut = np.array([space.cut(float(v)) for v in np.atleast_1d(psi)])
            return np.minimum(R, cut) ** n / n

        rhs = scale * integrate(inner, 0.0, length, abs_tol=1e-12)
    else:
        if not math.isinf(space.cut(0.0)):
            raise ValueError("finite cut functions are only supported in dimension 2")
        rhs = space.link_measure * R**n / n
    return IntegrationLemmaResult(float(lhs), float(rhs), bool(lhs <= rhs + tol), tol)


def radial_expansion(space, p, t: float, x, tol: float = 1e-9):
    """Image of ``x`` under the radial expansion about ``p`` with ratio ``t``.

    Returns the point ``y`` with ``x`` on a minimal geodesic from ``p`` to
    ``y`` and ``d(p, x) = t d(p, y)``, or ``None`` when the extended geodesic
    no longer minimises.
    """
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    dpx = float(space.distance(p, x))
    if dpx == 0:
        raise ValueError("x must differ from p")
    y = space.geodesic_point(p, x, 1.0 / t)
    if not bool(space.in_domain(y)):
        return None
    dpy = float(space.distance(p, y))
    if abs(dpy - dpx / t) > tol * max(1.0, dpx / t):
        return None
    return y


def radial_expansion_sample(fms: FiniteMetricSpace, p: int, t: float, x: int, tol: float | None = None):
    """Sample version: the index ``y`` best matching the expansion of ``x``.

    Candidates must satisfy ``|d(p,y) - d(p,x)/t| + e_{p,y}(x) <= tol``
    (default ``4 * net_spacing``); ``None`` if no sample point qualifies.
    """
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    tol = 4 * fms.net_spacing if tol is None else tol
    dp = fms.row(int(p))
    dx = fms.row(int(x))
    target = dp[int(x)] / t
    score = np.abs(dp - target) + (dp[int(x)] + dx - dp)
    y = int(np.argmin(score))
    return y if score[y] <= tol else None


def empty_report(pipeline: str, reason: str) -> VerificationReport:
    rep = VerificationReport(pipeline=pipeline, verdict=EXCLUDED)
    rep.warnings.append(reason)
    return rep


def profile_summary(profile: RadialProfile, n: int) -> dict[str, Any]:
    return {
        "r_mid": profile.r_mid.tolist(),
        "a_estimate": profile.a_estimates.tolist(),
        "a_over_r_pow": profile.ratios(n).tolist(),
        "counts": profile.counts.tolist(),
    }
