"""
JSON formats.

Space file::

    {"kind": "finite_metric" | "graph" | "interval_grid",
     "points": [...], "dist": [[...]], "weights": [...],
     "edges": [[i, j], ...], "breakpoints": [...]}

Field file::

    {"space_ref": ..., "values": [...]}          # finite model, or nodal
                                                 # values on the grid
    {"space_ref": ..., "cells": [{"coeffs": [...]}, ...]}

Cell coefficients are ascending powers of the global coordinate ``x``.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .space import (
    CellField,
    CellSet,
    FiniteMetricSpace,
    IntervalGridSpace,
    PiecewiseLinearMap,
    PiecewisePolyField,
    pl_field,
)


def space_to_json(space) -> dict:
    if isinstance(space, IntervalGridSpace):
        return {"kind": "interval_grid", "breakpoints": space.breakpoints.tolist()}
    out = {"kind": "graph" if space.has_adjacency else "finite_metric",
           "points": list(space.point_ids),
           "dist": space.dist.tolist(),
           "weights": space.weights.tolist()}
    if space.has_adjacency:
        out["edges"] = [list(e) for e in space.edges]
    return out


def space_from_json(obj: dict, drop_null_points: bool = True):
    """Build a space; zero-weight points are dropped when ``drop_null_points``."""
    kind = obj.get("kind")
    if kind == "interval_grid":
        return IntervalGridSpace(obj["breakpoints"])
    if kind not in ("finite_metric", "graph"):
        raise ValueError(f"unknown space kind {kind!r}")
    points = obj.get("points")
    n = len(points) if points is not None else len(obj["weights"])
    weights = np.asarray(obj.get("weights", np.ones(n)), dtype=float)
    edges = obj.get("edges")
    if "dist" in obj:
        space = FiniteMetricSpace(obj["dist"], weights, points,
                                  None if edges is None else tuple(map(tuple, edges)))
    elif edges is not None:
        space = FiniteMetricSpace.from_graph(n, edges, weights, points)
    else:
        raise ValueError("finite space needs 'dist' or 'edges'")
    if drop_null_points and np.any(space.weights == 0):
        keep = np.nonzero(space.weights != 0)[0]
        remap = {int(k): i for i, k in enumerate(keep)}
        new_edges = None
        if space.edges is not None:
            new_edges = tuple((remap[i], remap[j]) for i, j in space.edges
                              if i in remap and j in remap)
        space = FiniteMetricSpace(space.dist[np.ix_(keep, keep)], space.weights[keep],
                                  tuple(space.point_ids[k] for k in keep), new_edges)
    return space


def field_from_json(obj: dict, space):
    if isinstance(space, IntervalGridSpace):
        bp = obj.get("breakpoints", space.breakpoints)
        if "cells" in obj:
            coeffs = [c["coeffs"] for c in obj["cells"]]
            width = max(len(c) for c in coeffs)
            mat = np.array([list(c) + [0.0] * (width - len(c)) for c in coeffs])
            return PiecewisePolyField(bp, mat)
        return pl_field(bp, obj["values"])
    return np.asarray(obj["values"], dtype=float)


def field_to_json(u, space_ref=None) -> dict:
    if isinstance(u, CellField):
        out = u.to_json()
    else:
        out = {"values": np.asarray(u, dtype=float).tolist()}
    if space_ref is not None:
        out["space_ref"] = space_ref
    return out


# -- tagged values used inside witnesses ---------------------------------------


def encode(value):
    if isinstance(value, PiecewisePolyField):
        return {"type": "poly_field", **value.to_json()}
    if isinstance(value, CellField):
        return {"type": "cell_field", **value.to_json()}
    if isinstance(value, CellSet):
        return {"type": "cell_set", **value.to_json()}
    if isinstance(value, PiecewiseLinearMap):
        return {"type": "pl_map", **value.to_json()}
    if isinstance(value, np.ndarray):
        return {"type": "array", "values": value.tolist()}
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [encode(v) for v in value]
    return value


def decode(obj):
    if isinstance(obj, list):
        return [decode(v) for v in obj]
    if not isinstance(obj, dict) or "type" not in obj:
        return obj
    t = obj["type"]
    if t in ("poly_field", "cell_field"):
        coeffs = [c["coeffs"] for c in obj["cells"]]
        cls = PiecewisePolyField if t == "poly_field" else CellField
        return cls(obj["breakpoints"], np.array(coeffs, dtype=float))
    if t == "cell_set":
        return CellSet(frozenset(obj["indices"]), obj.get("grid"))
    if t == "pl_map":
        return PiecewiseLinearMap(obj["breakpoints"], obj["slopes"], obj["intercepts"])
    if t == "array":
        return np.asarray(obj["values"], dtype=float)
    raise ValueError(f"unknown tagged value {t!r}")


def dumps(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_atomic(path, payload) -> None:
    """Write JSON via a temporary file in the target directory and rename."""
    text = dumps(payload)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
