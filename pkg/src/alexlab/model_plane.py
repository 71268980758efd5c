"""Trigonometry of the constant-curvature comparison planes.

All functions are pure and accept plain floats; the ``*_array`` variants
broadcast over numpy arrays and signal invalid input with ``nan`` instead of
raising, which is what the batch checks in the other modules need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# |kappa| r^2 below this switches jacobi_s to its Taylor series
SERIES_CUTOFF = 1e-8
# relative slack on the triangle inequality before a triple is rejected
TRIANGLE_TOL = 1e-12


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a model-plane formula."""


@dataclass(frozen=True)
class ModelPlane:
    """The simply connected surface of constant curvature ``kappa``."""

    kappa: float

    @property
    def max_side(self) -> float:
        """Longest admissible side length (``pi/sqrt(kappa)`` when kappa > 0)."""
        if self.kappa > 0:
            return math.pi / math.sqrt(self.kappa)
        return math.inf

    def s(self, r: float) -> float:
        return jacobi_s(self.kappa, r)

    def angle(self, a: float, b: float, c: float) -> float:
        return comparison_angle(self.kappa, a, b, c)


def jacobi_s(kappa: float, r):
    """Solution of ``s'' + kappa s = 0`` with ``s(0) = 0, s'(0) = 1``.

    Works for scalars and numpy arrays. Near ``kappa = 0`` a short Taylor
    series is used so the function is continuous in ``kappa``.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0):
        raise DomainError("jacobi_s requires r >= 0")
    if kappa > 0 and np.any(arr > math.pi / math.sqrt(kappa) * (1 + 1e-15)):
        raise DomainError(f"r exceeds pi/sqrt(kappa) = {math.pi / math.sqrt(kappa)}")

    x = kappa * arr * arr
    with np.errstate(over="ignore", invalid="ignore"):
        if kappa > 0:
            k = math.sqrt(kappa)
            exact = np.sin(k * arr) / k
        elif kappa < 0:
            k = math.sqrt(-kappa)
            exact = np.sinh(k * arr) / k
        else:
            exact = arr.copy()
    series = arr * (1.0 - x / 6.0 + x * x / 120.0)
    out = np.where(np.abs(x) < SERIES_CUTOFF, series, exact)
    if np.ndim(r) == 0:
        return float(out)
    return out


def _half_angle_terms(kappa, a, b, c):
    # tangent half-angle formula; the "sine" of each half-perimeter term
    s = 0.5 * (a + b + c)
    if kappa == 0:
        f = lambda v: v  # noqa: E731
    elif kappa < 0:
        k = math.sqrt(-kappa)
        f = lambda v: np.sinh(k * v)  # noqa: E731
    else:
        k = math.sqrt(kappa)
        f = lambda v: np.sin(k * v)  # noqa: E731
    return s, f


def comparison_angle_array(kappa: float, a, b, c):
    """Vectorised comparison angle at the vertex between sides ``a`` and ``b``.

    ``c`` is the opposite side. Entries that violate the triangle inequality
    beyond a relative ``1e-12``, have a nonpositive adjacent side, or are too
    large for the sphere (``kappa > 0``) come back as ``nan``. Degenerate
    (collinear) triangles give exactly 0 or pi.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    s, f = _half_angle_terms(kappa, a, b, c)
    slack = TRIANGLE_TOL * np.maximum(s, 1.0)
    sa, sb, sc = s - a, s - b, s - c
    bad = (a <= 0) | (b <= 0) | (c < 0) | (sa < -slack) | (sb < -slack) | (sc < -slack)
    if kappa > 0:
        k = math.sqrt(kappa)
        lim = math.pi / k
        bad |= (a >= lim) | (b >= lim) | (c >= lim) | (2 * s * k >= 2 * math.pi)
    sa = np.clip(sa, 0.0, None)
    sb = np.clip(sb, 0.0, None)
    sc = np.clip(sc, 0.0, None)
    with np.errstate(invalid="ignore", over="ignore"):
        num = np.sqrt(np.clip(f(sa) * f(sb), 0.0, None))
        den = np.sqrt(np.clip(f(s) * f(sc), 0.0, None))
        ang = 2.0 * np.arctan2(num, den)
    ang = np.where(bad, np.nan, ang)
    if ang.ndim == 0:
        return float(ang)
    return ang


def comparison_angle(kappa: float, a: float, b: float, c: float) -> float:
    """Angle opposite side ``c`` in the ``kappa``-plane triangle with sides a, b, c.

    Raises
    ------
    DomainError
        If a side is nonpositive, the triangle inequality fails beyond a
        relative ``1e-12``, or (``kappa > 0``) the triangle does not fit on
        the sphere of curvature ``kappa``.
    """
    if a <= 0 or b <= 0 or c <= 0:
        raise DomainError(f"sides must be positive, got {(a, b, c)}")
    s = 0.5 * (a + b + c)
    slack = TRIANGLE_TOL * max(s, 1.0)
    if min(s - a, s - b, s - c) < -slack:
        raise DomainError(f"triangle inequality violated by {(a, b, c)}")
    if kappa > 0:
        lim = math.pi / math.sqrt(kappa)
        if max(a, b, c) >= lim or 2 * s >= 2 * lim:
            raise DomainError(f"triangle {(a, b, c)} too large for curvature {kappa}")
    return comparison_angle_array(kappa, a, b, c)


def hyperbolic_excess_lower_bound(kappa: float, R: float) -> float:
    """``(1/kappa) ln(2 / (1 - exp(-2 kappa R)))``.

    Lower bound used against the excess of a triangle with a non-obtuse
    angle at distance ``R`` from the base point in curvature ``-kappa^2``.
    Decreases to ``ln(2)/kappa`` as ``R`` grows.
    """
    if kappa <= 0 or R <= 0:
        raise DomainError("kappa and R must be positive")
    return -math.log(-math.expm1(-2.0 * kappa * R) / 2.0) / kappa
