"""Exact model spaces with closed-form metrics, measures and cut functions.

Coordinates per kind:

* ``euclidean``  -- Cartesian coordinates in R^n
* ``cone``       -- ``(r, theta)`` with ``theta`` in ``[0, 2 pi rho)`` (link coordinate)
* ``cylinder``   -- ``(theta, z)`` with ``theta`` in ``[0, 2 pi)``
* ``hyperbolic`` -- geodesic polar ``(r, theta)`` about the centre
* ``paraboloid`` -- embedded ``(x, y, a (x^2 + y^2))``; graph-backed only
"""

from __future__ import annotations

import math
from typing import Any, Mapping

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.spatial import cKDTree
from scipy.special import ndtri
from scipy.stats import qmc

from .metric_core import FiniteMetricSpace
from .measure import MeasuredSpace, unit_ball_volume

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
PARABOLOID_NEIGHBORS = 12
_SEGMENT_GRID = 257


def sphere_measure(n: int) -> float:
    """``H^{n-1}`` of the unit sphere in R^n."""
    return n * unit_ball_volume(n)


def _circ(delta, period):
    d = np.mod(delta, period)
    return np.minimum(d, period - d)


def _param(t):
    t = np.asarray(t, dtype=float)
    return np.atleast_1d(t), t.ndim == 0


def _wrap_signed(delta, period):
    # into (-period/2, period/2]
    return period / 2 - np.mod(period / 2 - delta, period)


class AnalyticSpace:
    """Base class for the model-space family.

    Subclasses provide the exact metric (elementwise, broadcasting over
    leading axes), area sampling, link measure and cut function at the
    distinguished point, and where available the exact ball volume and a
    parametrisation of minimal geodesics.
    """

    kind: str = ""
    n: int = 2
    backing = "exact"
    curvature_lower_bound: float = 0.0

    # -- interface -----------------------------------------------------------
    @property
    def distinguished_point(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def link_measure(self) -> float:
        raise NotImplementedError

    @property
    def link_length(self) -> float:
        """Length of the 1-d link parameter range (2-d kinds)."""
        return self.link_measure

    @property
    def total_area(self) -> float:
        raise NotImplementedError

    @property
    def truncation_radius(self) -> float:
        raise NotImplementedError

    def distance(self, X, Y):
        raise NotImplementedError

    def cut(self, direction: float) -> float:
        return math.inf

    def ball_volume_exact(self, point, radius: float) -> float | None:
        return None

    def model_ball_volume(self, radius: float) -> float | None:
        """Ball volume about the distinguished point in the untruncated model."""
        return None

    def geodesic_point(self, x, y, t):
        raise NotImplementedError(f"{self.kind} has no closed-form geodesics")

    def in_domain(self, X) -> np.ndarray:
        return np.all(np.isfinite(np.asarray(X, dtype=float)), axis=-1)

    def params(self) -> dict[str, Any]:
        raise NotImplementedError

    def unit_to_coords(self, U: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- shared helpers ------------------------------------------------------
    def spec(self) -> dict[str, Any]:
        return {"kind": self.kind, **self.params()}

    def segment_distance(self, X, p, q) -> np.ndarray:
        """Exact distance from each row of ``X`` to the minimal geodesic ``p q``.

        A dense parameter grid locates the nearest geodesic point, then a
        golden-section search refines it inside the bracketing cells.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ts = np.linspace(0.0, 1.0, _SEGMENT_GRID)
        G = self.geodesic_point(p, q, ts)
        D = self.distance(X[:, None, :], G[None, :, :])
        j = np.argmin(D, axis=1)
        best = D[np.arange(len(X)), j]
        a = ts[np.maximum(j - 1, 0)]
        b = ts[np.minimum(j + 1, _SEGMENT_GRID - 1)]

        def f(t):
            return self.distance(X, self.geodesic_point(p, q, t))

        for _ in range(60):
            c = b - GOLDEN * (b - a)
            d = a + GOLDEN * (b - a)
            left = f(c) < f(d)
            b = np.where(left, d, b)
            a = np.where(left, a, c)
        return np.minimum(best, f(0.5 * (a + b)))

    def sample_coords(self, N: int, seed: int) -> np.ndarray:
        """``N`` area-uniform points; row 0 is the distinguished point.

        Randomised quasi-Monte Carlo: a shifted rank-1 (golden-ratio) lattice
        in the unit square, stratified in the radial CDF, pushed through the
        inverse area CDF of the kind.
        """
        rng = np.random.default_rng(seed)
        shift = rng.random(2)
        i = np.arange(N, dtype=float)
        u = (i + shift[0]) / N
        v = np.mod(i * GOLDEN + shift[1], 1.0)
        pts = self.unit_to_coords(np.column_stack([u, v]))
        pts[0] = self.distinguished_point
        return pts

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.params() == other.params()

    def __hash__(self) -> int:
        return hash((type(self).__name__, tuple(sorted(self.params().items()))))


class EuclideanBall(AnalyticSpace):
    kind = "euclidean"

    def __init__(self, n: int = 2, R: float = 1.0):
        if int(n) != n or n < 2:
            raise ValueError("n must be an integer >= 2")
        if not R > 0:
            raise ValueError("R must be positive")
        self.n = int(n)
        self.R = float(R)

    def params(self):
        return {"n": self.n, "R": self.R}

    @property
    def distinguished_point(self):
        return np.zeros(self.n)

    @property
    def link_measure(self):
        return sphere_measure(self.n)

    @property
    def total_area(self):
        return unit_ball_volume(self.n) * self.R**self.n

    @property
    def truncation_radius(self):
        return self.R

    def distance(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        return np.sqrt(np.sum((X - Y) ** 2, axis=-1))

    def geodesic_point(self, x, y, t):
        t, scalar = _param(t)
        x = np.asarray(x, dtype=float)
        out = x + np.multiply.outer(t, np.asarray(y, dtype=float) - x)
        return out[0] if scalar else out

    def model_ball_volume(self, radius):
        return unit_ball_volume(self.n) * radius**self.n

    def ball_volume_exact(self, point, radius):
        c = float(np.linalg.norm(point))
        r, R = float(radius), self.R
        if r <= 0:
            return 0.0
        if c + r <= R:
            return unit_ball_volume(self.n) * r**self.n
        if self.n != 2:
            return None
        if c >= r + R:
            return 0.0
        if c <= abs(R - r):
            return math.pi * min(r, R) ** 2
        a1 = r * r * math.acos((c * c + r * r - R * R) / (2 * c * r))
        a2 = R * R * math.acos((c * c + R * R - r * r) / (2 * c * R))
        a3 = 0.5 * math.sqrt((-c + r + R) * (c + r - R) * (c - r + R) * (c + r + R))
        return a1 + a2 - a3

    def unit_to_coords(self, U):
        u, v = U[:, 0], U[:, 1]
        r = self.R * np.sqrt(u)
        return np.column_stack([r * np.cos(2 * math.pi * v), r * np.sin(2 * math.pi * v)])

    def sample_coords(self, N, seed):
        if self.n == 2:
            return super().sample_coords(N, seed)
        # scrambled Halton: first coordinate gives the radius, the rest a direction
        H = qmc.Halton(d=self.n + 1, scramble=True, seed=seed).random(N)
        H = np.clip(H, 1e-12, 1 - 1e-12)
        g = ndtri(H[:, 1:])
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        pts = g * (self.R * H[:, :1] ** (1.0 / self.n))
        pts[0] = 0.0
        return pts


class ConeOverCircle(AnalyticSpace):
    """Flat cone whose link is a circle of circumference ``2 pi rho``."""

    kind = "cone"

    def __init__(self, rho: float = 0.5, R: float = 4.0):
        if not 0 < rho <= 1:
            raise ValueError("rho must lie in (0, 1]; larger links have curvature < 0 at the apex")
        if not R > 0:
            raise ValueError("R must be positive")
        self.rho = float(rho)
        self.R = float(R)

    def params(self):
        return {"rho": self.rho, "R": self.R}

    @property
    def link_length(self):
        return 2 * math.pi * self.rho

    @property
    def distinguished_point(self):
        return np.zeros(2)

    @property
    def link_measure(self):
        return 2 * math.pi * self.rho

    @property
    def total_area(self):
        return math.pi * self.rho * self.R**2

    @property
    def truncation_radius(self):
        return self.R

    def in_domain(self, X):
        X = np.asarray(X, dtype=float)
        return (X[..., 0] >= 0) & (X[..., 1] >= 0) & (X[..., 1] < self.link_length)

    def distance(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        r1, r2 = X[..., 0], Y[..., 0]
        ang = np.minimum(_circ(X[..., 1] - Y[..., 1], self.link_length), math.pi)
        return np.sqrt((r1 - r2) ** 2 + 4 * r1 * r2 * np.sin(ang / 2) ** 2)

    def geodesic_point(self, x, y, t):
        # straight segment in the development of the cone around x
        t, scalar = _param(t)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = _wrap_signed(y[1] - x[1], self.link_length)
        P = np.array([x[0], 0.0])
        Q = np.array([y[0] * math.cos(d), y[0] * math.sin(d)])
        Z = P + np.multiply.outer(t, Q - P)
        r = np.hypot(Z[:, 0], Z[:, 1])
        th = np.mod(x[1] + np.arctan2(Z[:, 1], Z[:, 0]), self.link_length)
        out = np.column_stack([r, th])
        return out[0] if scalar else out

    def model_ball_volume(self, radius):
        return math.pi * self.rho * radius**2

    def ball_volume_exact(self, point, radius):
        if float(point[0]) != 0.0:
            return None
        return math.pi * self.rho * min(float(radius), self.R) ** 2

    def unit_to_coords(self, U):
        return np.column_stack([self.R * np.sqrt(U[:, 0]), self.link_length * U[:, 1]])

    def to_plane(self, X):
        """Embed a unit-link cone (``rho = 1``) point in R^2."""
        X = np.asarray(X, dtype=float)
        return np.stack([X[..., 0] * np.cos(X[..., 1]), X[..., 0] * np.sin(X[..., 1])], axis=-1)


class FlatCylinder(AnalyticSpace):
    """``S^1(rho) x [-H, H]`` with the flat product metric."""

    kind = "cylinder"

    def __init__(self, rho: float = 1.0, half_height: float = 10.0):
        if not rho > 0 or not half_height > 0:
            raise ValueError("rho and half_height must be positive")
        self.rho = float(rho)
        self.half_height = float(half_height)

    def params(self):
        return {"rho": self.rho, "half_height": self.half_height}

    @property
    def distinguished_point(self):
        return np.zeros(2)

    @property
    def link_measure(self):
        return 2 * math.pi

    @property
    def total_area(self):
        return 2 * math.pi * self.rho * 2 * self.half_height

    @property
    def truncation_radius(self):
        return self.half_height

    @property
    def circumference(self) -> float:
        return 2 * math.pi * self.rho

    def in_domain(self, X):
        X = np.asarray(X, dtype=float)
        return (X[..., 0] >= 0) & (X[..., 0] < 2 * math.pi) & np.isfinite(X[..., 1])

    def distance(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        du = self.rho * _circ(X[..., 0] - Y[..., 0], 2 * math.pi)
        return np.hypot(du, X[..., 1] - Y[..., 1])

    def cut(self, direction):
        # direction: angle from the circumferential axis in the unrolled plane
        c = abs(math.cos(direction))
        return math.inf if c < 1e-12 else math.pi * self.rho / c

    def geodesic_point(self, x, y, t):
        t, scalar = _param(t)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        step = np.array([_wrap_signed(y[0] - x[0], 2 * math.pi), y[1] - x[1]])
        out = x + np.multiply.outer(t, step)
        out[:, 0] = np.mod(out[:, 0], 2 * math.pi)
        return out[0] if scalar else out

    def _band_area(self, r):
        a = math.pi * self.rho
        if r <= a:
            return math.pi * r * r
        return 2 * (a * math.sqrt(r * r - a * a) + r * r * math.asin(a / r))

    def model_ball_volume(self, radius):
        return self._band_area(float(radius))

    def ball_volume_exact(self, point, radius):
        if abs(float(point[1])) + radius > self.half_height:
            return None
        return self._band_area(float(radius))

    def unit_to_coords(self, U):
        return np.column_stack([2 * math.pi * U[:, 1], self.half_height * (2 * U[:, 0] - 1)])


class HyperbolicDisk(AnalyticSpace):
    """Disk of radius ``R`` in the hyperbolic plane of curvature ``kappa < 0``."""

    kind = "hyperbolic"

    def __init__(self, kappa: float = -1.0, R: float = 6.0):
        if not kappa < 0:
            raise ValueError("HyperbolicDisk requires kappa < 0")
        if not R > 0:
            raise ValueError("R must be positive")
        self.kappa = float(kappa)
        self.R = float(R)
        self.curvature_lower_bound = self.kappa

    @property
    def k(self) -> float:
        return math.sqrt(-self.kappa)

    def params(self):
        return {"kappa": self.kappa, "R": self.R}

    @property
    def distinguished_point(self):
        return np.zeros(2)

    @property
    def link_measure(self):
        return 2 * math.pi

    @property
    def total_area(self):
        return self.model_ball_volume(self.R)

    @property
    def truncation_radius(self):
        return self.R

    def in_domain(self, X):
        X = np.asarray(X, dtype=float)
        return (X[..., 0] >= 0) & np.isfinite(X[..., 1])

    def distance(self, X, Y):
        # haversine form of the hyperbolic law of cosines
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        k = self.k
        r1, r2 = k * X[..., 0], k * Y[..., 0]
        h = np.sinh((r1 - r2) / 2) ** 2 + np.sinh(r1) * np.sinh(r2) * np.sin((X[..., 1] - Y[..., 1]) / 2) ** 2
        return 2 * np.arcsinh(np.sqrt(h)) / k

    def _hyperboloid(self, x):
        r = self.k * x[..., 0]
        return np.stack([np.cosh(r), np.sinh(r) * np.cos(x[..., 1]), np.sinh(r) * np.sin(x[..., 1])], axis=-1)

    def geodesic_point(self, x, y, t):
        # great-hyperbola interpolation on the hyperboloid
        t, scalar = _param(t)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        D = self.k * float(self.distance(x, y))
        if D < 1e-14:
            out = np.tile(x, (len(t), 1))
        else:
            a = np.sinh((1 - t) * D) / math.sinh(D)
            b = np.sinh(t * D) / math.sinh(D)
            V = np.outer(a, self._hyperboloid(x)) + np.outer(b, self._hyperboloid(y))
            r = np.arcsinh(np.hypot(V[:, 1], V[:, 2])) / self.k
            th = np.mod(np.arctan2(V[:, 2], V[:, 1]), 2 * math.pi)
            out = np.column_stack([r, th])
        return out[0] if scalar else out

    def model_ball_volume(self, radius):
        k = self.k
        return 2 * math.pi * 2 * math.sinh(k * radius / 2) ** 2 / k**2

    def ball_volume_exact(self, point, radius):
        c = float(self.distance(np.asarray(point, dtype=float), self.distinguished_point))
        if c + radius > self.R * (1 + 1e-12):
            return None if c > 0 else self.model_ball_volume(self.R)
        return self.model_ball_volume(float(radius))

    def unit_to_coords(self, U):
        k = self.k
        # inverse of F(r) = sinh^2(k r/2) / sinh^2(k R/2)
        r = 2 * np.arcsinh(np.sqrt(U[:, 0]) * math.sinh(k * self.R / 2)) / k
        return np.column_stack([r, 2 * math.pi * U[:, 1]])


class ParaboloidPatch(AnalyticSpace):
    """Graph of ``z = a (x^2 + y^2)`` over the disk of radius ``R``."""

    kind = "paraboloid"
    backing = "graph"

    def __init__(self, a: float = 0.25, R: float = 2.0):
        if not a > 0 or not R > 0:
            raise ValueError("a and R must be positive")
        self.a = float(a)
        self.R = float(R)

    def params(self):
        return {"a": self.a, "R": self.R}

    @property
    def distinguished_point(self):
        return np.zeros(3)

    @property
    def link_measure(self):
        return 2 * math.pi

    @property
    def total_area(self):
        a = self.a
        return math.pi / (6 * a * a) * ((1 + 4 * a * a * self.R**2) ** 1.5 - 1)

    @property
    def truncation_radius(self):
        return self.R

    def distance(self, X, Y):
        # chordal length; the intrinsic metric comes from the neighbour graph
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        return np.sqrt(np.sum((X - Y) ** 2, axis=-1))

    def unit_to_coords(self, U):
        a = self.a
        A = U[:, 0] * self.total_area
        r = np.sqrt(np.clip((6 * a * a * A / math.pi + 1) ** (2.0 / 3.0) - 1, 0, None)) / (2 * a)
        th = 2 * math.pi * U[:, 1]
        x, y = r * np.cos(th), r * np.sin(th)
        return np.column_stack([x, y, a * (x * x + y * y)])


KINDS = {
    "euclidean": EuclideanBall,
    "cone": ConeOverCircle,
    "cylinder": FlatCylinder,
    "hyperbolic": HyperbolicDisk,
    "paraboloid": ParaboloidPatch,
}


def make_space(spec: Mapping[str, Any] | str | None = None, **params) -> AnalyticSpace:
    """Build an AnalyticSpace from ``{"kind": ..., **params}`` or ``kind, **params``."""
    if isinstance(spec, Mapping):
        params = {**{k: v for k, v in spec.items() if k != "kind"}, **params}
        kind = spec.get("kind")
    else:
        kind = spec
    if kind not in KINDS:
        raise ValueError(f"unknown space kind {kind!r}; expected one of {sorted(KINDS)}")
    return KINDS[kind](**params)


def exact_distance(space: AnalyticSpace, x, y) -> float:
    """Closed-form distance between two coordinate points of ``space``."""
    if space.backing != "exact":
        raise ValueError(f"{space.kind} has no closed-form metric (graph-backed)")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (bool(space.in_domain(x)) and bool(space.in_domain(y))):
        raise ValueError("coordinates outside the domain of the space")
    return float(space.distance(x, y))


def sample(space: AnalyticSpace, N: int, seed: int = 0) -> MeasuredSpace:
    """Area-uniform sample of ``N`` points with equal weights ``total_area / N``.

    Point 0 is always the distinguished point (centre / apex / axis point).
    Distances are exact except for the paraboloid, whose metric is the
    shortest-path metric of a k-nearest-neighbour graph with chordal edges.
    """
    if N < 16:
        raise ValueError("N must be at least 16")
    coords = space.sample_coords(int(N), seed)
    name = f"{space.kind}-N{N}-seed{seed}"
    if space.backing == "exact":
        base = FiniteMetricSpace(
            points=coords,
            metric=space.distance,
            dimension_hint=space.n,
            name=name,
            analytic=space,
            base_index=0,
            seed=seed,
        )
    else:
        base = FiniteMetricSpace(
            points=coords,
            graph=knn_graph(coords, PARABOLOID_NEIGHBORS),
            dimension_hint=space.n,
            name=name,
            analytic=space,
            base_index=0,
            seed=seed,
        )
    weights = np.full(len(coords), space.total_area / len(coords))
    return MeasuredSpace(base, weights, space.n)


def knn_graph(coords: np.ndarray, k: int):
    """Symmetrised k-nearest-neighbour graph with chordal edge lengths."""
    tree = cKDTree(coords)
    n = len(coords)
    while True:
        d, j = tree.query(coords, k=k + 1)
        rows = np.repeat(np.arange(n), k)
        cols = j[:, 1:].ravel()
        vals = d[:, 1:].ravel()
        keep = vals > 0
        g = sparse.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
        g = g.maximum(g.T).tocsr()
        if csgraph.connected_components(g, directed=False)[0] == 1 or k >= n - 1:
            return g
        k = min(2 * k, n - 1)


def inner_indices(space: FiniteMetricSpace, fraction: float = 0.8) -> np.ndarray:
    """Sample points within ``fraction`` of the truncation radius of the base point."""
    if space.analytic is None or space.base_index is None:
        return np.arange(space.point_count)
    lim = fraction * space.analytic.truncation_radius
    return np.flatnonzero(space.row(space.base_index) <= lim)
