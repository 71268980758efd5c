"""Excess and height of triangles, the functions phi and G, and the excess estimate.

For points ``p, q`` and a third point ``x`` the excess is
``e(x) = d(x,p) + d(x,q) - d(p,q)``, the height ``h(x)`` is the distance from
``x`` to a minimal geodesic ``p q`` and ``s(x) = min(d(p,x), d(q,x))``. The
estimate under test is ``e <= 8 (h^n / s)^{1/(n-1)}`` whenever
``h <= s/2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .generators import inner_indices
from .measure import MeasuredSpace
from .metric_core import FiniteMetricSpace, geodesic
from .model_plane import jacobi_s
from .quadrature import integrate_batch
from .report import EXCLUDED, VerificationReport

CHAIN_TOL = 1e-12
EXACT_HEIGHT_SLACK = 1e-9
LIPSCHITZ_PAIRS = 2000


def _fms(space) -> FiniteMetricSpace:
    return space.base if isinstance(space, MeasuredSpace) else space


def _is_sampled(space) -> bool:
    return isinstance(space, (MeasuredSpace, FiniteMetricSpace))


def excess(space, p, q, x) -> float:
    """``d(x,p) + d(x,q) - d(p,q)``.

    ``space`` is either a sampled space (``p, q, x`` are indices) or an
    analytic space (``p, q, x`` are coordinates).
    """
    if _is_sampled(space):
        f = _fms(space)
        if int(p) == int(q):
            raise ValueError("p and q must be distinct")
        d = f.distance
        return d(x, p) + d(x, q) - d(p, q)
    d = space.distance
    p, q, x = (np.asarray(v, dtype=float) for v in (p, q, x))
    if float(d(p, q)) == 0:
        raise ValueError("p and q must be distinct")
    return float(d(x, p) + d(x, q) - d(p, q))


def height(space, p, q, x, method: str = "vertices") -> float:
    """Distance from ``x`` to the minimal geodesic ``p q``.

    ``"vertices"`` takes the minimum over the vertices of the deterministic
    shortest path between ``p`` and ``q``; ``"exact"`` uses the closed-form
    geodesic of the generating model space. Analytic spaces given by
    coordinates always use the exact segment.
    """
    if not _is_sampled(space):
        return float(space.segment_distance(np.asarray(x, dtype=float)[None, :], p, q)[0])
    f = _fms(space)
    if int(p) == int(q):
        raise ValueError("p and q must be distinct")
    if method == "exact":
        if f.analytic is None or f.backing != "exact":
            raise ValueError("exact heights need an exact generator-backed space")
        P = f.points
        return float(f.analytic.segment_distance(P[int(x)][None, :], P[int(p)], P[int(q)])[0])
    if method != "vertices":
        raise ValueError(f"unknown height method {method!r}")
    verts = np.asarray(geodesic(f, p, q).vertices)
    return float(np.min(f.row(int(x))[verts]))


def ag_bound(h, s, n: int):
    """``8 (h^n / s)^{1/(n-1)}``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    h = np.asarray(h, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(h < 0) or np.any(s <= 0):
        raise ValueError("need h >= 0 and s > 0")
    out = 8.0 * (h**n / s) ** (1.0 / (n - 1))
    return float(out) if out.ndim == 0 else out


# -- phi and G ----------------------------------------------------------------


def phi_closed_form(n: int, r, l):
    """Flat closed form of ``phi``; vectorised over ``r`` and ``l``."""
    r = np.asarray(r, dtype=float)
    l = np.asarray(l, dtype=float)
    if n == 2:
        out = 0.5 * l * l * np.log(l / r) - 0.25 * (l * l - r * r)
    else:
        out = (r * r - n / (n - 2) * l * l + 2.0 / (n - 2) * l**n * r ** (2 - n)) / (2 * n)
    out = np.where(r == l, 0.0, out)
    return float(out) if out.ndim == 0 else out


def phi_quadrature(
    n: int, kappa: float, r, l, *, abs_tol: float = 1e-9, rel_tol: float = 1e-8
) -> np.ndarray:
    """Nested adaptive quadrature of ``phi`` for arrays of ``(r, l)``.

    The outer integrand at ``t`` is ``s(t)^{1-n}`` times the inner integral
    of ``s^{n-1}`` over ``[t, l]``; all inner integrals requested by one
    sweep of the outer integration are computed as a single batch. The
    inner integrals are resolved 100 times more tightly than the outer one so
    that their error stays below the outer acceptance threshold.
    """
    r, l = np.broadcast_arrays(np.atleast_1d(np.asarray(r, dtype=float)), np.atleast_1d(np.asarray(l, dtype=float)))
    r, l = r.ravel(), l.ravel()
    m = n - 1

    def inner(tau, _j):
        return jacobi_s(kappa, tau) ** m

    def outer(t, idx):
        lim = l[idx]
        vals = integrate_batch(
            inner, t, lim, abs_tol=abs_tol * 1e-2, rel_tol=rel_tol * 1e-2, floor=rel_tol * 1e-3
        )
        return vals / jacobi_s(kappa, t) ** m

    out = integrate_batch(outer, r, l, abs_tol=abs_tol, rel_tol=rel_tol, floor=rel_tol * 0.1)
    out[r == l] = 0.0
    return out


def phi(n: int, kappa: float, r: float, l: float, method: str = "quadrature") -> float:
    """``phi_{n,kappa}(r, l) = integral over r <= t <= tau <= l of (s(tau)/s(t))^{n-1}``.

    Parameters
    ----------
    method : {"quadrature", "closed_form"}
        ``closed_form`` is available for ``kappa = 0`` only.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0 < r <= l:
        raise ValueError("need 0 < r <= l")
    if kappa > 0 and l >= math.pi / math.sqrt(kappa):
        raise ValueError("l must stay below pi/sqrt(kappa)")
    if r == l:
        return 0.0
    if method == "closed_form":
        if kappa != 0:
            raise ValueError("closed_form requires kappa = 0")
        return phi_closed_form(n, r, l)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    return float(phi_quadrature(n, kappa, r, l)[0])


def g_function(d, h, s, n: int, eps: float = 0.0, method: str = "closed_form"):
    """``G(d) = 2 (n-1) / s * phi_{n,0}(d, h + eps)``."""
    d = np.asarray(d, dtype=float)
    top = h + eps
    if np.any(d <= 0) or np.any(d > top) or s <= 0 or eps < 0:
        raise ValueError("need 0 < d <= h + eps, s > 0, eps >= 0")
    if method == "closed_form":
        val = phi_closed_form(n, d, top)
    else:
        val = phi_quadrature(n, 0.0, d, np.full_like(np.atleast_1d(d), top))
        val = float(val[0]) if d.ndim == 0 else val
    return 2.0 * (n - 1) / s * val


def chain_terms(h, s, n: int):
    """``c = 2 h^n / s``, ``2c + G(c)`` and the bound, vectorised; nan where ``c > h``."""
    h = np.asarray(h, dtype=float)
    s = np.asarray(s, dtype=float)
    c = 2.0 * h**n / s
    ok = (c > 0) & (c <= h) & (h <= s / 2)
    cc = np.where(ok, c, h)
    lhs = 2 * cc + 2.0 * (n - 1) / s * phi_closed_form(n, cc, h)
    lhs = np.where(ok, lhs, np.nan)
    return c, lhs, ag_bound(h, s, n)


def chain_bound_check(h: float, s: float, n: int) -> VerificationReport:
    """``2c + G(c) <= 8 (h^n/s)^{1/(n-1)}`` at ``c = 2 h^n / s``.

    Outside ``h <= s/2`` and ``0 < c <= h`` the report is domain-excluded.
    """
    rep = VerificationReport(pipeline="chain-bound", tolerance=CHAIN_TOL)
    c = 2.0 * h**n / s
    rep.details = {"h": h, "s": s, "n": n, "c": c}
    if not (h > 0 and s > 0 and h <= s / 2 and 0 < c <= h):
        rep.verdict = EXCLUDED
        rep.warnings.append("c = 2h^n/s outside (0, h] or h > s/2")
        return rep
    lhs = 2 * c + float(g_function(c, h, s, n))
    bound = ag_bound(h, s, n)
    rep.items_tested = 1
    rep.worst_margin = bound - lhs
    rep.details.update({"lhs": lhs, "bound": bound})
    if rep.worst_margin < -CHAIN_TOL:
        rep.violations.append({"h": h, "s": s, "n": n, "lhs": lhs, "bound": bound})
    return rep.finalize()


# -- verification on spaces -----------------------------------------------------


@dataclass(frozen=True)
class ExcessTriple:
    p: int
    q: int
    x: int
    e: float
    h: float
    s: float
    bound: float

    @property
    def margin(self) -> float:
        return self.bound - self.e


@dataclass
class ExcessSampleConfig:
    """Sampling plan for :func:`verify_excess_on_space`.

    ``pair_pool`` and ``x_pool`` default to the inner region (points within
    ``inner_fraction`` of the truncation radius of the base point). Triples
    are admissible when ``h <= s/2`` and ``2 h^{n-1} <= s``; ``min_s`` and
    ``h_range`` narrow the family further.
    """

    triple_count: int = 10_000
    seed: int = 0
    pair_count: int = 200
    pair_pool: list[int] | None = None
    x_pool: list[int] | None = None
    min_s: float = 0.0
    h_range: tuple[float, float] | None = None
    height_method: str = "vertices"
    inner_fraction: float = 0.8
    slack: float | None = None
    extra: dict = field(default_factory=dict)


def verify_excess_on_space(
    ms, config: ExcessSampleConfig | None = None, *, triples_out: list | None = None
) -> VerificationReport:
    """Check ``e <= ag_bound(h, s, n) + delta`` on seeded admissible triples.

    ``delta`` is ``4 * net_spacing`` for vertex heights and ``1e-9`` for
    exact heights unless ``config.slack`` is given. The triangle-inequality
    consequences ``0 <= e <= 2h`` and the 2-Lipschitz property of ``e`` in
    ``x`` are checked on the same triples and reported as violations of
    their own kind.
    """
    cfg = config or ExcessSampleConfig()
    f = _fms(ms)
    n = ms.n if isinstance(ms, MeasuredSpace) else f.dimension_hint
    if f.point_count < 3:
        raise ValueError("need at least 3 points")
    exact = cfg.height_method == "exact"
    if cfg.height_method not in ("vertices", "exact"):
        raise ValueError(f"unknown height method {cfg.height_method!r}")
    if exact and (f.analytic is None or f.backing != "exact"):
        raise ValueError("exact heights need an exact generator-backed space")
    delta = cfg.slack
    if delta is None:
        delta = EXACT_HEIGHT_SLACK if exact else 4.0 * f.net_spacing

    inner = inner_indices(f, cfg.inner_fraction)
    pair_pool = np.asarray(cfg.pair_pool if cfg.pair_pool is not None else inner, dtype=int)
    x_pool = np.asarray(cfg.x_pool if cfg.x_pool is not None else inner, dtype=int)
    rng = np.random.default_rng(cfg.seed)

    rep = VerificationReport(pipeline="check-excess", tolerance=delta)
    per_pair = max(1, math.ceil(cfg.triple_count / max(cfg.pair_count, 1)))
    collected: list[ExcessTriple] = []
    worst_rel = math.inf
    pairs_used = 0
    lip_fail = 0
    attempts = 0
    while len(collected) < cfg.triple_count and attempts < 20 * cfg.pair_count:
        attempts += 1
        p, q = (int(v) for v in rng.choice(pair_pool, size=2, replace=False))
        dp, dq = f.row(p)[x_pool], f.row(q)[x_pool]
        dpq = f.distance(p, q)
        e = dp + dq - dpq
        s = np.minimum(dp, dq)
        if exact:
            P = f.points
            h = f.analytic.segment_distance(P[x_pool], P[p], P[q])
        else:
            verts = np.asarray(geodesic(f, p, q).vertices)
            h = np.min(f.rows(verts)[:, x_pool], axis=0)
        ok = (x_pool != p) & (x_pool != q) & (s > 0) & (s >= cfg.min_s)
        ok &= (h <= s / 2) & (2 * h ** (n - 1) <= s)
        if cfg.h_range is not None:
            ok &= (h >= cfg.h_range[0]) & (h <= cfg.h_range[1])
        cand = np.flatnonzero(ok)
        if len(cand) == 0:
            continue
        pairs_used += 1
        take = min(per_pair, len(cand), cfg.triple_count - len(collected))
        sel = np.sort(rng.choice(cand, size=take, replace=False))
        bound = ag_bound(h[sel], s[sel], n)
        for k, j in enumerate(sel):
            collected.append(
                ExcessTriple(p, q, int(x_pool[j]), float(e[j]), float(h[j]), float(s[j]), float(bound[k]))
            )
        margin = bound + delta - e[sel]
        rel = margin / (bound + delta)
        worst_rel = min(worst_rel, float(np.min(rel)))
        rep.worst_margin = min(rep.worst_margin, float(np.min(margin)))
        for k in np.flatnonzero(margin < 0):
            j = sel[k]
            rep.violations.append(
                {
                    "kind": "excess_bound",
                    "p": p,
                    "q": q,
                    "x": int(x_pool[j]),
                    "e": float(e[j]),
                    "h": float(h[j]),
                    "s": float(s[j]),
                    "bound": float(bound[k]),
                    "margin": float(margin[k]),
                }
            )
        # triangle-inequality consequences
        bad = (e[sel] < -delta) | (e[sel] > 2 * h[sel] + delta)
        for j in sel[bad]:
            rep.violations.append(
                {"kind": "height_bound", "p": p, "q": q, "x": int(x_pool[j]), "e": float(e[j]), "h": float(h[j])}
            )
        if len(sel) > 1:
            a, b = np.triu_indices(len(sel), 1)
            if len(a) > LIPSCHITZ_PAIRS:
                keep = rng.choice(len(a), size=LIPSCHITZ_PAIRS, replace=False)
                a, b = a[keep], b[keep]
            xs = x_pool[sel]
            dxx = f.pair_distances(xs[a], xs[b])
            lip = np.abs(e[sel][a] - e[sel][b]) > 2 * dxx + 1e-9 * (1 + dxx)
            lip_fail += int(lip.sum())

    if lip_fail:
        rep.violations.append({"kind": "lipschitz", "count": lip_fail})
    rep.violations.sort(key=lambda v: v.get("margin", -math.inf))
    rep.items_tested = len(collected)
    rep.details = {
        "seed": cfg.seed,
        "n": n,
        "height_method": cfg.height_method,
        "delta_discrete": delta,
        "net_spacing": f.net_spacing,
        "pairs_used": pairs_used,
        "worst_relative_margin": worst_rel,
        "geodesic_choice": "shortest path with smallest-index predecessors",
    }
    if not collected:
        rep.warnings.append("no admissible triples found")
    if triples_out is not None:
        triples_out.extend(collected)
    return rep.finalize()


def write_triples_csv(triples, path) -> None:
    """CSV dump with columns p, q, x, e, h, s, bound, margin."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "q", "x", "e", "h", "s", "bound", "margin"])
        for t in triples:
            row = asdict(t)
            w.writerow([row[k] for k in ("p", "q", "x")] + [repr(row[k]) for k in ("e", "h", "s", "bound")] + [repr(t.margin)])
