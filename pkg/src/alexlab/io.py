"""JSON space files.

Layout::

    {"name": ..., "n": 2, "backing": "exact" | "graph",
     "points": [[...], ...], "edges": [[i, j, w], ...],   # edges: graph only
     "weights": [...], "generator": {"kind": ..., "params": {...}},
     "base_index": 0}

Exact-backed files without a generator use the Euclidean norm of the
coordinates as their metric.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np
from scipy import sparse

from .generators import make_space
from .measure import MeasuredSpace
from .metric_core import FiniteMetricSpace


class SpaceFormatError(ValueError):
    """Malformed space file."""


def _euclidean(X, Y):
    return np.sqrt(np.sum((np.asarray(X) - np.asarray(Y)) ** 2, axis=-1))


def space_to_dict(ms: MeasuredSpace) -> dict[str, Any]:
    f = ms.base
    out: dict[str, Any] = {
        "name": f.name,
        "n": int(ms.n),
        "backing": f.backing,
        "points": f.points.tolist() if f.points is not None else [],
        "weights": ms.weights.tolist(),
    }
    if f.backing == "graph":
        g = sparse.triu(f.graph, k=1).tocoo()
        order = np.lexsort((g.col, g.row))
        out["edges"] = [[int(g.row[i]), int(g.col[i]), float(g.data[i])] for i in order]
    if f.analytic is not None:
        out["generator"] = {"kind": f.analytic.kind, "params": f.analytic.params()}
    if f.base_index is not None:
        out["base_index"] = int(f.base_index)
    return out


def space_from_dict(doc: dict[str, Any], *, validate: bool = True) -> MeasuredSpace:
    try:
        n = int(doc["n"])
        backing = doc["backing"]
        points = np.asarray(doc.get("points", []), dtype=float)
        weights = np.asarray(doc["weights"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise SpaceFormatError(f"malformed space document: {exc}") from exc
    name = str(doc.get("name", ""))
    gen = doc.get("generator")
    analytic = None
    if gen is not None:
        try:
            analytic = make_space({"kind": gen["kind"], **gen.get("params", {})})
        except (KeyError, TypeError, ValueError) as exc:
            raise SpaceFormatError(f"bad generator block: {exc}") from exc
    base_index = doc.get("base_index")
    if backing == "exact":
        if points.ndim != 2 or len(points) == 0:
            raise SpaceFormatError("exact backing needs a points array")
        metric = analytic.distance if analytic is not None and analytic.backing == "exact" else _euclidean
        f = FiniteMetricSpace(
            points=points, metric=metric, dimension_hint=n, name=name,
            analytic=analytic, base_index=base_index, validate=validate,
        )
    elif backing == "graph":
        try:
            E = np.asarray(doc["edges"], dtype=float).reshape(-1, 3)
        except (KeyError, ValueError) as exc:
            raise SpaceFormatError(f"graph backing needs edges: {exc}") from exc
        m = len(weights)
        if np.any(E[:, 2] <= 0):
            raise SpaceFormatError("edge weights must be positive")
        i, j = E[:, 0].astype(int), E[:, 1].astype(int)
        if len(E) and (i.min() < 0 or j.min() < 0 or max(i.max(), j.max()) >= m):
            raise SpaceFormatError("edge endpoint out of range")
        g = sparse.coo_matrix((np.r_[E[:, 2], E[:, 2]], (np.r_[i, j], np.r_[j, i])), shape=(m, m)).tocsr()
        try:
            f = FiniteMetricSpace(
                points=points if points.size else None, graph=g, dimension_hint=n,
                name=name, analytic=analytic, base_index=base_index, validate=validate,
            )
        except ValueError as exc:
            raise SpaceFormatError(str(exc)) from exc
    else:
        raise SpaceFormatError(f"unknown backing {backing!r}")
    try:
        return MeasuredSpace(f, weights, n)
    except ValueError as exc:
        raise SpaceFormatError(str(exc)) from exc


def save_space(ms: MeasuredSpace, path) -> None:
    with open(path, "w") as fh:
        json.dump(space_to_dict(ms), fh, sort_keys=True)
        fh.write("\n")


def load_space(path, *, validate: bool = True) -> MeasuredSpace:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpaceFormatError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise SpaceFormatError("space file must hold a JSON object")
    return space_from_dict(doc, validate=validate)
