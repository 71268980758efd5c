"""Finite metric spaces, shortest-path geodesics and the quadruple curvature test."""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .model_plane import DomainError, comparison_angle, comparison_angle_array
from .report import VerificationReport

# spaces up to this size keep the full distance table in memory
ALL_PAIRS_LIMIT = 4000
EXACT_TOLERANCE = 1e-6
PATH_NEIGHBORS = 12
_TIE_RTOL = 1e-12

Metric = Callable[[np.ndarray, np.ndarray], np.ndarray]


class FiniteMetricSpace:
    """A finite point set with an exact or graph-induced distance.

    Parameters
    ----------
    points : array_like, optional
        Coordinates, shape ``(N, dim)``. Required for exact backing.
    metric : callable, optional
        Elementwise, broadcasting distance ``metric(X, Y)`` on coordinate
        arrays. Its presence makes the space exact-backed.
    graph : scipy.sparse matrix, optional
        Symmetric weighted adjacency. For graph-backed spaces it defines the
        distance; for exact-backed spaces it is built automatically (a
        symmetrised k-nearest-neighbour graph with exact edge lengths) and is
        only used to discretise geodesics into vertex paths.

    Notes
    -----
    The object is immutable after construction. ``net_spacing`` is the
    largest nearest-neighbour distance in the sample and serves as the net
    resolution (``delta_net``) throughout the package.
    """

    def __init__(
        self,
        *,
        points=None,
        metric: Metric | None = None,
        graph=None,
        dimension_hint: int = 2,
        name: str = "",
        labels: Sequence[Hashable] | None = None,
        analytic=None,
        base_index: int | None = None,
        validate: bool = True,
        seed: int = 0,
        path_neighbors: int = PATH_NEIGHBORS,
    ):
        if metric is None and graph is None:
            raise ValueError("need either an exact metric or a graph")
        if dimension_hint < 2:
            raise ValueError("dimension_hint must be >= 2")
        self.backing = "exact" if metric is not None else "graph"
        self.points = None if points is None else np.array(points, dtype=float)
        if self.points is not None and self.points.ndim == 1:
            self.points = self.points[:, None]
        if self.backing == "exact" and self.points is None:
            raise ValueError("exact backing requires coordinates")
        self.metric = metric
        self.dimension_hint = int(dimension_hint)
        self.name = name
        self.analytic = analytic
        self.base_index = base_index
        if self.points is not None:
            self.points.setflags(write=False)
            n_pts = len(self.points)
        else:
            n_pts = graph.shape[0]
        self.point_count = n_pts
        self.labels = list(labels) if labels is not None else None
        self._label_index = (
            {lab: i for i, lab in enumerate(self.labels)} if self.labels is not None else None
        )
        self._trees: OrderedDict[int, tuple[np.ndarray, np.ndarray]] = OrderedDict()

        self._dist = None
        if self.backing == "graph":
            self.graph = sparse.csr_matrix(graph, dtype=float)
            if n_pts <= ALL_PAIRS_LIMIT:
                self._dist = csgraph.dijkstra(self.graph, directed=False)
                if not np.all(np.isfinite(self._dist)):
                    raise ValueError("graph is disconnected")
        else:
            if n_pts <= ALL_PAIRS_LIMIT:
                self._dist = self._exact_table()
            self.graph = self._knn_graph(path_neighbors)
        if self._dist is not None:
            self._dist.setflags(write=False)

        self.net_spacing = self._nearest_neighbor_max()
        if validate:
            self._validate(seed)

    # -- construction helpers -------------------------------------------------

    def _exact_table(self) -> np.ndarray:
        n = len(self.points)
        out = np.empty((n, n))
        step = max(1, 2_000_000 // max(n, 1))
        for s in range(0, n, step):
            block = self.metric(self.points[s : s + step, None, :], self.points[None, :, :])
            out[s : s + step] = block
        np.fill_diagonal(out, 0.0)
        # exact formulas can differ by an ulp between (i, j) and (j, i)
        out = np.minimum(out, out.T)
        return out

    def _knn_graph(self, k: int):
        n = self.point_count
        k = min(k, n - 1)
        while True:
            rows, cols, vals = [], [], []
            for i in range(n):
                d = self.row(i).copy()
                d[i] = np.inf
                nb = np.argpartition(d, k - 1)[:k]
                rows.append(np.full(k, i))
                cols.append(nb)
                vals.append(d[nb])
            r = np.concatenate(rows)
            c = np.concatenate(cols)
            v = np.concatenate(vals)
            keep = v > 0
            g = sparse.coo_matrix((v[keep], (r[keep], c[keep])), shape=(n, n)).tocsr()
            g = g.maximum(g.T).tocsr()
            ncomp, _ = csgraph.connected_components(g, directed=False)
            if ncomp == 1 or k >= n - 1:
                return g
            k = min(2 * k, n - 1)

    def _nearest_neighbor_max(self) -> float:
        n = self.point_count
        if n < 2:
            return 0.0
        best = 0.0
        step = 512
        for s in range(0, n, step):
            idx = np.arange(s, min(n, s + step))
            block = self.rows(idx).copy()
            block[np.arange(len(idx)), idx] = np.inf
            best = max(best, float(np.max(np.min(block, axis=1))))
        return best

    def _validate(self, seed: int) -> None:
        n = self.point_count
        if n < 3:
            return
        rng = np.random.default_rng(seed)
        m = 10 * n
        i, j, k = rng.integers(0, n, size=(3, m))
        dij = self.pair_distances(i, j)
        djk = self.pair_distances(j, k)
        dik = self.pair_distances(i, k)
        if np.any(dij < 0) or not np.all(np.isfinite(dij)):
            raise ValueError("distances must be finite and nonnegative")
        slack = 1e-9 * np.maximum(1.0, dik)
        bad = dik > dij + djk + slack
        if np.any(bad):
            t = int(np.flatnonzero(bad)[0])
            raise ValueError(f"triangle inequality fails on triple {(i[t], j[t], k[t])}")

    # -- distance access ------------------------------------------------------

    def __len__(self) -> int:
        return self.point_count

    def index(self, label: Hashable) -> int:
        if self._label_index is None:
            return int(label)
        return self._label_index[label]

    @property
    def default_tolerance(self) -> float:
        """1e-6 for exact metrics, ``3 * net_spacing`` for graph metrics."""
        return EXACT_TOLERANCE if self.backing == "exact" else 3.0 * self.net_spacing

    @property
    def has_table(self) -> bool:
        return self._dist is not None

    def row(self, i: int) -> np.ndarray:
        """Distances from point ``i`` to every point."""
        if self._dist is not None:
            return self._dist[i]
        if self.backing == "exact":
            return self.metric(self.points[i][None, :], self.points)
        return csgraph.dijkstra(self.graph, directed=False, indices=int(i))

    def rows(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=int)
        if self._dist is not None:
            return self._dist[idx]
        return np.stack([self.row(i) for i in idx])

    def distance(self, i: int, j: int) -> float:
        if self._dist is not None:
            return float(self._dist[i, j])
        if self.backing == "exact":
            return float(self.metric(self.points[i], self.points[j]))
        return float(self.row(i)[j])

    def pair_distances(self, i, j) -> np.ndarray:
        """Elementwise ``d(i[k], j[k])``."""
        i = np.asarray(i, dtype=int)
        j = np.asarray(j, dtype=int)
        if self._dist is not None:
            return self._dist[i, j]
        if self.backing == "exact":
            out = self.metric(self.points[i], self.points[j])
            return np.where(i == j, 0.0, out)
        return np.array([self.row(a)[b] for a, b in zip(i, j)])

    def distance_matrix(self) -> np.ndarray:
        if self._dist is not None:
            return self._dist
        return self.rows(np.arange(self.point_count))

    # -- shortest-path trees ---------------------------------------------------

    def shortest_path_tree(self, source: int) -> tuple[np.ndarray, np.ndarray]:
        """Graph distances and predecessors from ``source``.

        Ties between equally short predecessors are broken toward the
        smallest vertex index, so the tree does not depend on heap order.
        """
        source = int(source)
        hit = self._trees.get(source)
        if hit is not None:
            return hit
        g = self.graph
        d = csgraph.dijkstra(g, directed=False, indices=source)
        coo = g.tocoo()
        u = np.concatenate([coo.row, coo.col])
        v = np.concatenate([coo.col, coo.row])
        w = np.concatenate([coo.data, coo.data])
        tight = np.abs(d[u] + w - d[v]) <= _TIE_RTOL * np.maximum(1.0, d[v])
        tight &= v != source
        n = self.point_count
        pred = np.full(n, n, dtype=np.int64)
        np.minimum.at(pred, v[tight], u[tight])
        pred[pred == n] = -9999
        pred[source] = -1
        d.setflags(write=False)
        pred.setflags(write=False)
        self._trees[source] = (d, pred)
        if len(self._trees) > 64:
            self._trees.popitem(last=False)
        return d, pred


@dataclass(frozen=True)
class Geodesic:
    """A distance-realising vertex path and its length."""

    vertices: tuple[int, ...]
    length: float

    @property
    def endpoints(self) -> tuple[int, int]:
        return self.vertices[0], self.vertices[-1]


def build_from_graph(
    vertices: Iterable[Hashable],
    weighted_edges: Iterable[tuple[Hashable, Hashable, float]],
    *,
    dimension_hint: int = 2,
    points=None,
    name: str = "",
    validate: bool = True,
) -> FiniteMetricSpace:
    """Shortest-path metric of a connected graph with positive edge weights."""
    labels = list(vertices)
    index = {lab: i for i, lab in enumerate(labels)}
    if len(index) != len(labels):
        raise ValueError("duplicate vertex labels")
    best: dict[tuple[int, int], float] = {}
    for u, v, w in weighted_edges:
        w = float(w)
        if not w > 0:
            raise ValueError(f"edge ({u}, {v}) has nonpositive weight {w}")
        i, j = index[u], index[v]
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        best[key] = min(w, best.get(key, math.inf))
    n = len(labels)
    if best:
        (ij, ws) = zip(*best.items())
        r, c = np.array(ij).T
        w = np.array(ws)
        g = sparse.coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([r, c]), np.concatenate([c, r]))), shape=(n, n)
        ).tocsr()
    else:
        g = sparse.csr_matrix((n, n))
    ncomp, _ = csgraph.connected_components(g, directed=False)
    if ncomp != 1:
        raise ValueError(f"graph is disconnected ({ncomp} components)")
    return FiniteMetricSpace(
        graph=g,
        points=points,
        dimension_hint=dimension_hint,
        name=name,
        labels=labels,
        validate=validate,
    )


def geodesic(space: FiniteMetricSpace, p: int, q: int) -> Geodesic:
    """Shortest vertex path from ``p`` to ``q`` (deterministic tie-breaking)."""
    p, q = int(p), int(q)
    if p == q:
        return Geodesic((p,), 0.0)
    _, pred = space.shortest_path_tree(p)
    path = [q]
    while path[-1] != p:
        nxt = int(pred[path[-1]])
        if nxt < 0:
            raise ValueError(f"{q} is unreachable from {p}")
        path.append(nxt)
    path.reverse()
    verts = np.asarray(path)
    length = float(np.sum(space.pair_distances(verts[:-1], verts[1:])))
    return Geodesic(tuple(path), length)


def path_vertices(pred: np.ndarray, p: int, q: int) -> np.ndarray:
    """Vertex indices on the tree path from ``p`` to ``q`` (inclusive)."""
    path = [int(q)]
    while path[-1] != p:
        nxt = int(pred[path[-1]])
        if nxt < 0:
            raise ValueError(f"{q} is unreachable from {p}")
        path.append(nxt)
    return np.asarray(path[::-1])


# -- quadruple curvature test --------------------------------------------------


def quadruple_defect(space: FiniteMetricSpace, kappa: float, p, a, b, c) -> float:
    """``2 pi`` minus the three comparison angles at ``p``.

    The space passes the quadruple test at ``p`` when the result is at least
    ``-tolerance``.
    """
    pts = [int(v) for v in (p, a, b, c)]
    if len(set(pts)) < 4:
        raise DomainError("quadruple points must be distinct")
    p, a, b, c = pts
    d = space.distance
    total = (
        comparison_angle(kappa, d(p, a), d(p, b), d(a, b))
        + comparison_angle(kappa, d(p, b), d(p, c), d(b, c))
        + comparison_angle(kappa, d(p, c), d(p, a), d(c, a))
    )
    return 2 * math.pi - total


def sample_quadruples(n_points: int, count: int, rng, pool=None) -> np.ndarray:
    """``count`` rows of four distinct indices drawn uniformly from ``pool``."""
    pool = np.arange(n_points) if pool is None else np.asarray(pool, dtype=int)
    if len(pool) < 4:
        raise ValueError("need at least 4 points")
    out = np.empty((0, 4), dtype=int)
    while len(out) < count:
        draw = pool[rng.integers(0, len(pool), size=(2 * (count - len(out)) + 8, 4))]
        s = np.sort(draw, axis=1)
        ok = np.all(s[:, 1:] != s[:, :-1], axis=1)
        out = np.vstack([out, draw[ok]])
    return out[:count]


class QuadrupleBatch:
    """Pairwise distances of a fixed set of quadruples ``(p; a, b, c)``."""

    def __init__(self, space: FiniteMetricSpace, quads: np.ndarray):
        self.quads = np.asarray(quads, dtype=int)
        p, a, b, c = self.quads.T
        pd = space.pair_distances
        self.pa, self.pb, self.pc = pd(p, a), pd(p, b), pd(p, c)
        self.ab, self.bc, self.ca = pd(a, b), pd(b, c), pd(c, a)

    def fits(self, kappa: float) -> np.ndarray:
        """Whether all three comparison triangles exist at a positive ``kappa``.

        A space with curvature ``>= kappa > 0`` has diameter at most
        ``pi/sqrt(kappa)``, so a quadruple that does not fit refutes ``kappa``.
        """
        if kappa <= 0:
            return np.ones(len(self.quads), dtype=bool)
        lim = math.pi / math.sqrt(kappa)
        sides = np.stack([self.pa, self.pb, self.pc, self.ab, self.bc, self.ca])
        per = np.stack([self.pa + self.pb + self.ab, self.pb + self.pc + self.bc, self.pc + self.pa + self.ca])
        return np.all(sides < lim, axis=0) & np.all(per < 2 * lim, axis=0)

    def defects(self, kappa: float) -> np.ndarray:
        """Defects at curvature ``kappa``; ``nan`` where a comparison triangle is undefined."""
        ang = (
            comparison_angle_array(kappa, self.pa, self.pb, self.ab)
            + comparison_angle_array(kappa, self.pb, self.pc, self.bc)
            + comparison_angle_array(kappa, self.pc, self.pa, self.ca)
        )
        return 2 * math.pi - ang


def estimate_curvature_bound(
    space: FiniteMetricSpace,
    sample_count: int = 2000,
    seed: int = 0,
    *,
    k_max: float = 4.0,
    tol: float | None = None,
    iterations: int = 60,
    pool=None,
) -> float:
    """Largest ``k`` in ``[-k_max, k_max]`` passing the quadruple test on a sample.

    Bisection is valid because comparison angles increase with the model
    curvature, so defects decrease in ``k``. A quadruple whose comparison
    triangles do not fit at a positive ``k`` refutes that ``k``.
    """
    if space.point_count < 4:
        raise ValueError("need at least 4 points")
    tol = space.default_tolerance if tol is None else tol
    rng = np.random.default_rng(seed)
    batch = QuadrupleBatch(space, sample_quadruples(space.point_count, sample_count, rng, pool))

    def ok(k):
        if not np.all(batch.fits(k)):
            return False
        d = batch.defects(k)
        d = d[np.isfinite(d)]
        return bool(np.all(d >= -tol))

    if ok(k_max):
        return k_max
    if not ok(-k_max):
        return -k_max
    lo, hi = -k_max, k_max
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def check_quadruples(
    space: FiniteMetricSpace,
    kappa: float,
    sample_count: int = 2000,
    seed: int = 0,
    *,
    tol: float | None = None,
    pool=None,
) -> VerificationReport:
    """Evaluate the quadruple condition at curvature ``kappa`` on sampled quadruples."""
    tol = space.default_tolerance if tol is None else tol
    rng = np.random.default_rng(seed)
    quads = sample_quadruples(space.point_count, sample_count, rng, pool)
    batch = QuadrupleBatch(space, quads)
    d = batch.defects(kappa)
    # too large for the model sphere: refutes kappa outright
    d = np.where(batch.fits(kappa), d, -math.inf)
    valid = ~np.isnan(d)
    rep = VerificationReport(pipeline="check-curvature", tolerance=tol)
    rep.items_tested = int(valid.sum())
    if rep.items_tested:
        rep.worst_margin = float(np.min(d[valid]) + tol)
    bad = np.flatnonzero(valid & (d < -tol))
    order = bad[np.argsort(d[bad], kind="stable")]
    rep.violations = [
        {"quadruple": quads[i].tolist(), "defect": float(d[i])} for i in order
    ]
    rep.details = {"kappa": kappa, "skipped": int((~valid).sum()), "seed": seed}
    return rep.finalize()
