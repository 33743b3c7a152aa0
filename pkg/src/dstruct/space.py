"""
Spaces and fields
=================

Two desk-scale models of a metric measure space:

* :class:`FiniteMetricSpace` -- finitely many points, a distance matrix and
  strictly positive point weights (optionally a graph adjacency).
* :class:`IntervalGridSpace` -- ``[0, 1]`` with Lebesgue measure, split into
  cells by a strictly increasing list of breakpoints.

Functions on the finite model are plain 1-D arrays (or :class:`ScalarField`).
Functions on the interval model are :class:`CellField` objects: one polynomial
per cell, with coefficients in ascending powers of the *global* coordinate
``x``.  Refining a grid therefore never touches coefficients, it only repeats
rows.  :class:`PiecewisePolyField` is the continuous subclass used for Sobolev
functions; plain :class:`CellField` holds a.e.-defined objects such as
pseudo-gradients and slope forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate

TAU_EQ = 1e-9
MAX_DEGREE = 8

# breakpoints closer than this are merged when refining
_SNAP = 1e-12


class DegreeOverflowError(ValueError):
    pass


class NotPiecewiseLinearError(ValueError):
    pass


# ---------------------------------------------------------------------------
# finite model
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """Finite metric measure space ``(X, d, m)``.

    Construction only normalises shapes; invariants (metric axioms, positive
    weights, valid edges) are reported by :func:`validate_space`.
    """

    dist: np.ndarray
    weights: np.ndarray
    point_ids: tuple = None
    edges: tuple = None

    def __post_init__(self):
        dist = np.array(self.dist, dtype=float)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise ValueError("dist must be a square matrix")
        if dist.shape[0] != weights.size:
            raise ValueError("weights must have one entry per point")
        dist.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "weights", weights)
        ids = self.point_ids
        if ids is None:
            ids = tuple(range(weights.size))
        object.__setattr__(self, "point_ids", tuple(ids))
        if self.edges is not None:
            edges = tuple((int(i), int(j)) for i, j in self.edges)
            object.__setattr__(self, "edges", edges)

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def has_adjacency(self) -> bool:
        return self.edges is not None

    @classmethod
    def from_graph(cls, n: int, edges, weights=None, point_ids=None):
        """Graph with the shortest-path metric; counting measure by default."""
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import shortest_path

        edges = [(int(i), int(j)) for i, j in edges]
        if edges:
            rows = [i for i, j in edges] + [j for i, j in edges]
            cols = [j for i, j in edges] + [i for i, j in edges]
            adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
            dist = shortest_path(adj, directed=False, unweighted=True)
        else:
            dist = np.full((n, n), np.inf)
            np.fill_diagonal(dist, 0.0)
        if weights is None:
            weights = np.ones(n)
        return cls(dist=dist, weights=weights, point_ids=point_ids, edges=tuple(edges))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One finite real per point of a :class:`FiniteMetricSpace`."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def as_values(u) -> np.ndarray:
    if isinstance(u, ScalarField):
        return u.values
    return np.asarray(u, dtype=float).reshape(-1)


# ---------------------------------------------------------------------------
# interval model
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IntervalGridSpace:
    """``[0, 1]`` with Lebesgue measure and a finite cell decomposition."""

    breakpoints: np.ndarray

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float).reshape(-1)
        bp.flags.writeable = False
        object.__setattr__(self, "breakpoints", bp)

    @classmethod
    def uniform(cls, n_cells: int) -> "IntervalGridSpace":
        return cls(np.linspace(0.0, 1.0, n_cells + 1))

    @property
    def n_cells(self) -> int:
        return self.breakpoints.size - 1

    @property
    def cell_measures(self) -> np.ndarray:
        return np.diff(self.breakpoints)


def _as_coeff_matrix(coeffs, n_cells):
    c = np.array(coeffs, dtype=float)
    if c.ndim == 1:
        c = c.reshape(n_cells, -1)
    if c.shape[0] != n_cells:
        raise ValueError(f"expected {n_cells} coefficient rows, got {c.shape[0]}")
    if c.shape[1] == 0:
        c = np.zeros((n_cells, 1))
    return c


class CellField:
    """Per-cell polynomial function on a subdivision of ``[0, 1]``.

    ``coeffs[j]`` are the ascending coefficients, in the global variable ``x``,
    of the polynomial used on ``[breakpoints[j], breakpoints[j+1]]``.  No
    continuity is assumed; values are meaningful up to null sets.
    """

    continuous = False

    def __init__(self, breakpoints, coeffs, max_degree: int = MAX_DEGREE):
        bp = np.array(breakpoints, dtype=float).reshape(-1)
        if bp.size < 2 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        c = _as_coeff_matrix(coeffs, bp.size - 1)
        c = _trim(c)
        if c.shape[1] - 1 > max_degree:
            raise DegreeOverflowError(
                f"degree {c.shape[1] - 1} exceeds the bound {max_degree}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        bp.flags.writeable = False
        c.flags.writeable = False
        self.breakpoints = bp
        self.coeffs = c
        self.max_degree = max_degree

    # -- construction helpers ------------------------------------------------
    @classmethod
    def constant(cls, value: float, breakpoints=(0.0, 1.0)):
        bp = np.asarray(breakpoints, dtype=float)
        return cls(bp, np.full((bp.size - 1, 1), float(value)))

    @classmethod
    def from_nodal(cls, breakpoints, values):
        """Piecewise linear interpolant of nodal values."""
        bp = np.asarray(breakpoints, dtype=float)
        v = np.asarray(values, dtype=float)
        if v.size != bp.size:
            raise ValueError("need one nodal value per breakpoint")
        slope = np.diff(v) / np.diff(bp)
        intercept = v[:-1] - slope * bp[:-1]
        return cls(bp, np.column_stack([intercept, slope]))

    @classmethod
    def piecewise_constant(cls, breakpoints, values):
        return cls(breakpoints, np.asarray(values, dtype=float).reshape(-1, 1))

    def _new(self, bp, coeffs):
        return type(self)(bp, coeffs, self.max_degree)

    def as_cellfield(self) -> "CellField":
        return CellField(self.breakpoints, self.coeffs, self.max_degree)

    # -- basic queries -------------------------------------------------------
    @property
    def n_cells(self) -> int:
        return self.breakpoints.size - 1

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def is_piecewise_linear(self) -> bool:
        return self.degree <= 1

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.breakpoints[:-1] + self.breakpoints[1:])

    def cell_of(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.clip(np.searchsorted(self.breakpoints, x, side="right") - 1,
                       0, self.n_cells - 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = self.cell_of(x)
        return _horner(self.coeffs[idx], x)

    def values_at(self, cells, x):
        """Evaluate the polynomial of ``cells`` at ``x`` (one-sided values)."""
        return _horner(self.coeffs[np.asarray(cells)], np.asarray(x, dtype=float))

    def left_values(self):
        return _horner(self.coeffs, self.breakpoints[:-1])

    def right_values(self):
        return _horner(self.coeffs, self.breakpoints[1:])

    def derivative(self) -> "CellField":
        c = self.coeffs
        if c.shape[1] == 1:
            d = np.zeros((self.n_cells, 1))
        else:
            d = c[:, 1:] * np.arange(1, c.shape[1])
        return CellField(self.breakpoints, d, self.max_degree)

    def refine(self, breakpoints) -> "CellField":
        """Same function on a grid containing the current breakpoints."""
        bp = np.asarray(breakpoints, dtype=float)
        if bp.size == self.breakpoints.size and np.array_equal(bp, self.breakpoints):
            return self
        mids = 0.5 * (bp[:-1] + bp[1:])
        return self._new(bp, self.coeffs[self.cell_of(mids)])

    def sup_abs(self) -> float:
        return float(max(_poly_max_abs(c, a, b) for c, a, b in self._cells()))

    def _cells(self):
        bp = self.breakpoints
        for j in range(self.n_cells):
            yield self.coeffs[j], bp[j], bp[j + 1]

    def allclose(self, other: "CellField", tol: float = TAU_EQ) -> bool:
        return coefficient_residual(self, other) <= tol

    def to_json(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(),
                "cells": [{"coeffs": row.tolist()} for row in self.coeffs]}

    def __repr__(self):
        return (f"{type(self).__name__}(n_cells={self.n_cells}, "
                f"degree={self.degree})")


class PiecewisePolyField(CellField):
    """Continuous piecewise polynomial on ``[0, 1]``."""

    continuous = True

    def __init__(self, breakpoints, coeffs, max_degree: int = MAX_DEGREE,
                 tol: float = TAU_EQ):
        super().__init__(breakpoints, coeffs, max_degree)
        if self.n_cells > 1:
            jump = np.abs(self.right_values()[:-1] - self.left_values()[1:])
            scale = max(1.0, float(np.max(np.abs(self.coeffs))))
            if np.any(jump > tol * scale):
                k = int(np.argmax(jump))
                raise ValueError(
                    f"discontinuity {jump[k]:.3e} at x={self.breakpoints[k + 1]}")


def _trim(c: np.ndarray) -> np.ndarray:
    # drop trailing all-zero columns (never below one column)
    k = c.shape[1]
    while k > 1 and not np.any(c[:, k - 1]):
        k -= 1
    return c[:, :k]


def _horner(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros(np.broadcast(coeffs[..., 0], x).shape)
    for k in range(coeffs.shape[-1] - 1, -1, -1):
        out = out * x + coeffs[..., k]
    return out


def _pad(c: np.ndarray, width: int) -> np.ndarray:
    if c.shape[1] >= width:
        return c
    return np.pad(c, ((0, 0), (0, width - c.shape[1])))


def merge_breakpoints(*arrays) -> np.ndarray:
    """Sorted union of breakpoint arrays, merging near-duplicates."""
    allbp = np.sort(np.concatenate([np.asarray(a, dtype=float).reshape(-1)
                                    for a in arrays]))
    keep = np.concatenate([[True], np.diff(allbp) > _SNAP])
    bp = allbp[keep]
    # snapped endpoints stay exactly 0 and 1
    bp[0], bp[-1] = allbp[0], allbp[-1]
    return bp


def common_refinement(*fields: CellField):
    bp = merge_breakpoints(*[f.breakpoints for f in fields])
    return bp, [f.refine(bp) for f in fields]


def coefficient_residual(a: CellField, b: CellField) -> float:
    """Largest coefficient difference after common refinement."""
    _, (ra, rb) = common_refinement(a, b)
    w = max(ra.coeffs.shape[1], rb.coeffs.shape[1])
    return float(np.max(np.abs(_pad(ra.coeffs, w) - _pad(rb.coeffs, w))))


# -- polynomial helpers on a single cell -------------------------------------


def _strip(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    scale = max(1.0, float(np.max(np.abs(c)))) if c.size else 1.0
    k = c.size
    while k > 1 and abs(c[k - 1]) <= 1e-14 * scale:
        k -= 1
    return c[:k]


def roots_in(c, a: float, b: float) -> np.ndarray:
    """Real roots of the polynomial ``c`` strictly inside ``(a, b)``."""
    c = _strip(c)
    if c.size <= 1:
        return np.empty(0)
    if c.size == 2:
        r = np.array([-c[0] / c[1]])
    else:
        r = np.roots(c[::-1])
        r = r[np.abs(r.imag) <= 1e-9 * max(1.0, float(np.max(np.abs(r))))].real
        # polish against the polynomial itself
        dc = P.polyder(c)
        for _ in range(3):
            d = P.polyval(r, dc)
            ok = np.abs(d) > 1e-14
            r = np.where(ok, r - P.polyval(r, c) / np.where(ok, d, 1.0), r)
    eps = _SNAP * max(1.0, abs(a), abs(b))
    r = np.unique(r[(r > a + eps) & (r < b - eps)])
    return r


def _linear_roots(f: CellField) -> np.ndarray:
    """Interior roots of affine cells, vectorised."""
    bp = f.breakpoints
    if f.coeffs.shape[1] < 2:
        return np.empty(0)
    c0, c1 = f.coeffs[:, 0], f.coeffs[:, 1]
    scale = np.maximum(1.0, np.maximum(np.abs(c0), np.abs(c1)))
    live = np.abs(c1) > 1e-14 * scale
    r = -c0[live] / c1[live]
    a, b = bp[:-1][live], bp[1:][live]
    eps = _SNAP * np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return r[(r > a + eps) & (r < b - eps)]


def _poly_extremes(c, a, b):
    pts = np.concatenate([[a, b], roots_in(P.polyder(_strip(c)), a, b)])
    return P.polyval(pts, c)


def poly_min_on(c, a: float, b: float) -> float:
    return float(np.min(_poly_extremes(c, a, b)))


def _poly_max_abs(c, a, b) -> float:
    return float(np.max(np.abs(_poly_extremes(c, a, b))))


def subdivide_at_roots(f: CellField, polys=None) -> CellField:
    """Refine ``f`` at interior roots of its cell polynomials (or of ``polys``)."""
    src = f if polys is None else polys
    if src.coeffs.shape[1] <= 2:
        extra = [_linear_roots(src)]
    else:
        extra = [roots_in(c, a, b) for c, a, b in src._cells()]
    if not any(e.size for e in extra):
        return f
    return f.refine(merge_breakpoints(f.breakpoints, *extra))


def field_abs(f: CellField) -> CellField:
    """``|f|`` as a per-cell polynomial (sign-split at interior roots)."""
    g = subdivide_at_roots(f)
    sign = np.where(g.values_at(np.arange(g.n_cells), g.midpoints) < 0, -1.0, 1.0)
    return type(g)(g.breakpoints, g.coeffs * sign[:, None], g.max_degree)


def positive_indicator(f: CellField) -> CellField:
    """``chi_{f > 0}`` as a piecewise constant field (split at roots of ``f``)."""
    g = subdivide_at_roots(f)
    vals = g.values_at(np.arange(g.n_cells), g.midpoints)
    flat = np.all(np.abs(g.coeffs) <= TAU_EQ, axis=1)
    chi = np.where((vals > 0) & ~flat, 1.0, 0.0)
    return CellField.piecewise_constant(g.breakpoints, chi)


def _extremum(u: CellField, v: CellField, take_max: bool) -> CellField:
    bp, (ru, rv) = common_refinement(u, v)
    w = max(ru.coeffs.shape[1], rv.coeffs.shape[1])
    cu, cv = _pad(ru.coeffs, w), _pad(rv.coeffs, w)
    diff = CellField(bp, cu - cv, max(u.max_degree, v.max_degree))
    bp2 = subdivide_at_roots(diff).breakpoints
    ru, rv, rd = ru.refine(bp2), rv.refine(bp2), diff.refine(bp2)
    mids = rd.midpoints
    d = rd.values_at(np.arange(rd.n_cells), mids)
    pick_u = d >= 0 if take_max else d <= 0
    cu, cv = _pad(ru.coeffs, w), _pad(rv.coeffs, w)
    out = np.where(pick_u[:, None], cu, cv)
    cls = PiecewisePolyField if (u.continuous and v.continuous) else CellField
    return cls(bp2, out, max(u.max_degree, v.max_degree))


def cell_max(u: CellField, v: CellField) -> CellField:
    return _extremum(u, v, True)


def cell_min(u: CellField, v: CellField) -> CellField:
    return _extremum(u, v, False)


def _result_class(u, v=None):
    if u.continuous and (v is None or v.continuous):
        return PiecewisePolyField
    return CellField


def cell_add(u: CellField, v: CellField, alpha: float = 1.0, beta: float = 1.0):
    bp, (ru, rv) = common_refinement(u, v)
    w = max(ru.coeffs.shape[1], rv.coeffs.shape[1])
    c = alpha * _pad(ru.coeffs, w) + beta * _pad(rv.coeffs, w)
    return _result_class(u, v)(bp, c, max(u.max_degree, v.max_degree))


def cell_mul(u: CellField, v: CellField, max_degree: int | None = None):
    md = max(u.max_degree, v.max_degree) if max_degree is None else max_degree
    if u.degree + v.degree > md:
        raise DegreeOverflowError(
            f"product degree {u.degree + v.degree} exceeds the bound {md}")
    bp, (ru, rv) = common_refinement(u, v)
    w = ru.coeffs.shape[1] + rv.coeffs.shape[1] - 1
    c = np.zeros((ru.n_cells, w))
    for k, (a, b) in enumerate(zip(ru.coeffs, rv.coeffs)):
        prod = np.atleast_1d(P.polymul(a, b))[:w]
        c[k, :prod.size] = prod
    return _result_class(u, v)(bp, c, md)


def cell_scale(u: CellField, alpha: float):
    return type(u)(u.breakpoints, alpha * u.coeffs, u.max_degree)


def piecewise_constant_times(h: np.ndarray, u: CellField, bp) -> CellField:
    """Multiply ``u`` (refined to ``bp``) by per-cell constants ``h``."""
    r = u.refine(bp)
    return CellField(bp, r.coeffs * np.asarray(h, dtype=float)[:, None], u.max_degree)


# ---------------------------------------------------------------------------
# sets, simple functions and Lipschitz maps of the real line
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellSet:
    """A set ``B`` up to null sets.

    Finite model: ``grid is None`` and ``indices`` are point indices.
    Interval model: ``indices`` select cells of the grid ``grid``.
    """

    indices: frozenset
    grid: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "indices", frozenset(int(i) for i in self.indices))
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(float(t) for t in self.grid))
            n = len(self.grid) - 1
            if any(i < 0 or i >= n for i in self.indices):
                raise ValueError("cell index out of range")

    @classmethod
    def points(cls, indices) -> "CellSet":
        return cls(frozenset(indices))

    @classmethod
    def cells(cls, breakpoints, indices) -> "CellSet":
        return cls(frozenset(indices), tuple(np.asarray(breakpoints, dtype=float)))

    @classmethod
    def interval(cls, a: float, b: float, breakpoints=(0.0, 1.0)) -> "CellSet":
        """The union of cells covering ``[a, b]`` after inserting ``a`` and ``b``."""
        bp = merge_breakpoints(breakpoints, [a, b])
        mids = 0.5 * (bp[:-1] + bp[1:])
        idx = np.nonzero((mids > a) & (mids < b))[0]
        return cls.cells(bp, idx)

    @classmethod
    def whole(cls, space) -> "CellSet":
        if isinstance(space, FiniteMetricSpace):
            return cls.points(range(space.n))
        return cls.cells(space.breakpoints, range(space.n_cells))

    @property
    def is_interval_model(self) -> bool:
        return self.grid is not None

    def mask(self, target) -> np.ndarray:
        """Boolean mask over points (int size) or over cells of ``target`` bp."""
        if self.grid is None:
            m = np.zeros(int(target), dtype=bool)
            m[list(self.indices)] = True
            return m
        bp = np.asarray(target, dtype=float)
        mids = 0.5 * (bp[:-1] + bp[1:])
        g = np.asarray(self.grid)
        idx = np.clip(np.searchsorted(g, mids, side="right") - 1, 0, len(g) - 2)
        inside = (mids > g[0]) & (mids < g[-1])
        sel = np.zeros(len(g) - 1, dtype=bool)
        sel[list(self.indices)] = True
        return sel[idx] & inside

    def on_grid(self, bp) -> "CellSet":
        return CellSet.cells(bp, np.nonzero(self.mask(bp))[0])

    def intersect(self, other: "CellSet") -> "CellSet":
        if self.grid is None:
            return CellSet(self.indices & other.indices)
        bp = merge_breakpoints(self.grid, other.grid)
        return CellSet.cells(bp, np.nonzero(self.mask(bp) & other.mask(bp))[0])

    def complement(self, space_or_n) -> "CellSet":
        if self.grid is None:
            n = space_or_n.n if isinstance(space_or_n, FiniteMetricSpace) else int(space_or_n)
            return CellSet(frozenset(range(n)) - self.indices)
        n = len(self.grid) - 1
        return CellSet(frozenset(range(n)) - self.indices, self.grid)

    def measure(self, space=None) -> float:
        if self.grid is None:
            return float(np.sum(space.weights[list(self.indices)]))
        g = np.diff(np.asarray(self.grid))
        return float(np.sum(g[list(self.indices)]))

    def is_empty(self) -> bool:
        return not self.indices

    def to_json(self) -> dict:
        out = {"indices": sorted(self.indices)}
        if self.grid is not None:
            out["grid"] = list(self.grid)
        return out


@dataclass(frozen=True)
class SimpleField:
    """``h = sum_j lambda_j chi_{C_j}`` over a partition ``(C_j)``."""

    parts: tuple  # of (CellSet, float)

    def __post_init__(self):
        object.__setattr__(self, "parts",
                           tuple((s, float(v)) for s, v in self.parts))

    def check_partition(self, space) -> list[str]:
        problems = []
        sets = [s for s, _ in self.parts]
        if isinstance(space, FiniteMetricSpace):
            count = np.zeros(space.n, dtype=int)
            for s in sets:
                count[s.mask(space.n)] += 1
        else:
            bp = merge_breakpoints(space.breakpoints, *[s.grid for s in sets])
            count = np.zeros(bp.size - 1, dtype=int)
            for s in sets:
                count[s.mask(bp)] += 1
        if np.any(count > 1):
            problems.append("parts overlap")
        if np.any(count == 0):
            problems.append("parts do not cover the space")
        return problems

    def on_grid(self, bp) -> np.ndarray:
        """Per-cell values on a grid refining every part's grid."""
        out = np.zeros(len(bp) - 1)
        for s, v in self.parts:
            out[s.mask(bp)] = v
        return out

    @property
    def breakpoints(self) -> np.ndarray:
        return merge_breakpoints(*[s.grid for s, _ in self.parts])


@dataclass(frozen=True, eq=False)
class PiecewiseLinearMap:
    """Continuous piecewise affine map of the real line.

    ``len(slopes) == len(breakpoints) + 1``; piece ``k`` lives between
    ``breakpoints[k-1]`` and ``breakpoints[k]``.
    """

    breakpoints: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float).reshape(-1)
        s = np.array(self.slopes, dtype=float).reshape(-1)
        c = np.array(self.intercepts, dtype=float).reshape(-1)
        if s.size != bp.size + 1 or c.size != s.size:
            raise ValueError("need len(breakpoints) + 1 affine pieces")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        left = s[:-1] * bp + c[:-1]
        right = s[1:] * bp + c[1:]
        scale = np.maximum.reduce([np.ones_like(bp), np.abs(s[:-1] * bp), np.abs(c[:-1]),
                                   np.abs(s[1:] * bp), np.abs(c[1:])])
        if np.any(np.abs(left - right) > TAU_EQ * scale):
            raise ValueError("piecewise linear map must be continuous")
        for a in (bp, s, c):
            a.flags.writeable = False
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "slopes", s)
        object.__setattr__(self, "intercepts", c)

    @classmethod
    def affine(cls, slope: float, intercept: float = 0.0):
        return cls([], [slope], [intercept])

    @classmethod
    def identity(cls):
        return cls.affine(1.0, 0.0)

    @classmethod
    def absolute(cls):
        return cls([0.0], [-1.0, 1.0], [0.0, 0.0])

    @classmethod
    def from_points(cls, ts, ys, left_slope=None, right_slope=None):
        """Interpolate ``(ts, ys)``; outer slopes default to the end segments."""
        ts = np.asarray(ts, dtype=float)
        ys = np.asarray(ys, dtype=float)
        inner = np.diff(ys) / np.diff(ts)
        ls = inner[0] if left_slope is None else left_slope
        rs = inner[-1] if right_slope is None else right_slope
        slopes = np.concatenate([[ls], inner, [rs]])
        anchors = np.concatenate([[ts[0]], ts])
        vals = np.concatenate([[ys[0]], ys])
        intercepts = vals - slopes * anchors
        return cls(ts, slopes, intercepts)

    @property
    def is_affine(self) -> bool:
        return self.breakpoints.size == 0

    @property
    def lipschitz(self) -> float:
        return float(np.max(np.abs(self.slopes)))

    def piece_of(self, t) -> np.ndarray:
        return np.searchsorted(self.breakpoints, np.asarray(t, dtype=float), side="right")

    def __call__(self, t):
        k = self.piece_of(t)
        return self.slopes[k] * np.asarray(t, dtype=float) + self.intercepts[k]

    def derivative(self, t):
        """``phi'`` (right derivative at breakpoints, irrelevant a.e.)."""
        return self.slopes[self.piece_of(t)]

    def to_json(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(),
                "slopes": self.slopes.tolist(),
                "intercepts": self.intercepts.tolist()}


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def validate_space(space) -> list[str]:
    """List the violated invariants of ``space`` (empty list means valid)."""
    problems = []
    if isinstance(space, IntervalGridSpace):
        bp = space.breakpoints
        if bp.size < 2:
            problems.append("need at least one cell")
            return problems
        if np.any(np.diff(bp) <= 0):
            problems.append("breakpoints not strictly increasing")
        if bp[0] != 0.0 or bp[-1] != 1.0:
            problems.append("breakpoints must start at 0 and end at 1")
        if abs(float(np.sum(np.diff(bp))) - 1.0) > TAU_EQ:
            problems.append("cell measures do not sum to 1")
        return problems

    d, w, n = space.dist, space.weights, space.n
    if n == 0:
        problems.append("space has no points")
    if len(set(space.point_ids)) != n:
        problems.append("point ids not unique")
    if np.any(~np.isfinite(d)):
        problems.append("distance matrix has non-finite entries")
    for i in range(n):
        if d[i, i] != 0:
            problems.append(f"dist({i},{i}) = {d[i, i]} is not 0")
        for j in range(i + 1, n):
            if d[i, j] != d[j, i]:
                problems.append(f"dist not symmetric at ({i},{j})")
            if not d[i, j] > 0:
                problems.append(f"dist({i},{j}) = {d[i, j]} is not positive")
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if d[i, k] > d[i, j] + d[j, k] + TAU_EQ * max(1.0, d[i, k]):
                    problems.append(
                        f"triangle inequality fails: d({i},{k})={d[i, k]} > "
                        f"d({i},{j})+d({j},{k})={d[i, j] + d[j, k]}")
    for i in np.nonzero(~(w > 0))[0]:
        problems.append(f"weight of point {i} is {w[i]}, must be > 0")
    if space.edges is not None:
        for i, j in space.edges:
            if not (0 <= i < n and 0 <= j < n):
                problems.append(f"edge ({i},{j}) references an unknown point")
            elif i == j:
                problems.append(f"self-loop at {i}")
    return problems


def lipschitz_constant(space, u) -> float:
    """``Lip(u)``: pair maximum on finite spaces, ``ess sup |u'|`` on the grid."""
    if isinstance(u, CellField):
        return u.derivative().sup_abs()
    v = as_values(u)
    if v.size < 2:
        return 0.0
    d = space.dist
    diff = np.abs(v[:, None] - v[None, :])
    off = ~np.eye(v.size, dtype=bool)
    return float(np.max(diff[off] / d[off]))


def _check_p(p):
    if not (np.isfinite(p) and p >= 1):
        raise ValueError(f"p must lie in [1, inf), got {p}")


def _abs_power_integral(c, a, b, p) -> float:
    if float(p).is_integer() and int(p) % 2 == 0:
        q = P.polyint(P.polypow(_strip(c), int(p)))
        return float(P.polyval(b, q) - P.polyval(a, q))
    total = 0.0
    pts = np.concatenate([[a], roots_in(c, a, b), [b]])
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(lambda x: abs(P.polyval(x, c)) ** p, lo, hi,
                                epsabs=0.0, epsrel=1e-10, limit=200)
        total += val
    return total


def lp_norm(space, u, p: float, B: CellSet | None = None) -> float:
    """``(int_B |u|^p dm)^(1/p)``; ``B`` defaults to the whole space."""
    _check_p(p)
    if isinstance(u, CellField):
        f = u
        if B is not None:
            bp = merge_breakpoints(u.breakpoints, B.grid)
            f = u.refine(bp)
            sel = B.mask(bp)
        else:
            sel = np.ones(f.n_cells, dtype=bool)
        bp = f.breakpoints
        if p == 2 and f.coeffs.shape[1] <= 2:
            # affine cells: exact Simpson-type closed form
            fa, fb = f.left_values(), f.right_values()
            cells = np.diff(bp) * (fa * fa + fa * fb + fb * fb) / 3.0
            total = float(np.sum(cells[sel]))
        else:
            total = sum(_abs_power_integral(f.coeffs[j], bp[j], bp[j + 1], p)
                        for j in np.nonzero(sel)[0])
        return float(max(total, 0.0) ** (1.0 / p))
    v = as_values(u)
    m = space.weights
    sel = np.ones(v.size, dtype=bool) if B is None else B.mask(v.size)
    return float(np.sum(m[sel] * np.abs(v[sel]) ** p) ** (1.0 / p))


_OPS = ("add", "sub", "scale", "mul", "max", "min")


def field_combine(u, v, op: str, alpha: float = 1.0):
    """Pointwise combination of two fields (``v`` ignored for ``scale``)."""
    if op not in _OPS:
        raise ValueError(f"unknown op {op!r}")
    if isinstance(u, CellField):
        if op == "scale":
            return cell_scale(u, alpha)
        if op == "add":
            return cell_add(u, v)
        if op == "sub":
            return cell_add(u, v, 1.0, -1.0)
        if op == "mul":
            return cell_mul(u, v)
        if not (u.is_piecewise_linear and v.is_piecewise_linear):
            raise NotPiecewiseLinearError("max/min need piecewise linear fields")
        return cell_max(u, v) if op == "max" else cell_min(u, v)

    a = as_values(u)
    b = None if op == "scale" else as_values(v)
    if op == "scale":
        out = alpha * a
    elif op == "add":
        out = a + b
    elif op == "sub":
        out = a - b
    elif op == "mul":
        out = a * b
    elif op == "max":
        out = np.maximum(a, b)
    else:
        out = np.minimum(a, b)
    return ScalarField(out) if isinstance(u, ScalarField) else out


def compose_pl(phi: PiecewiseLinearMap, u):
    """``phi o u``; interval fields are split where ``u`` crosses a kink of ``phi``."""
    if not isinstance(u, CellField):
        out = phi(as_values(u))
        return ScalarField(out) if isinstance(u, ScalarField) else out
    if phi.is_affine:
        c = u.coeffs * phi.slopes[0]
        c[:, 0] += phi.intercepts[0]
        return type(u)(u.breakpoints, c, u.max_degree)
    if not u.is_piecewise_linear:
        raise NotPiecewiseLinearError(
            "composition with a kinked map needs a piecewise linear field")
    extra = []
    for c, a, b in u._cells():
        for t in phi.breakpoints:
            extra.append(roots_in([c[0] - t, c[1] if c.size > 1 else 0.0], a, b))
    bp = merge_breakpoints(u.breakpoints, *extra) if extra else u.breakpoints
    r = u.refine(bp)
    k = phi.piece_of(r.values_at(np.arange(r.n_cells), r.midpoints))
    c = _pad(r.coeffs, 2) * phi.slopes[k][:, None]
    c[:, 0] += phi.intercepts[k]
    return type(u)(bp, c, u.max_degree)


def pl_field(breakpoints, values) -> PiecewisePolyField:
    """Continuous piecewise linear field from nodal values."""
    f = CellField.from_nodal(breakpoints, values)
    return PiecewisePolyField(f.breakpoints, f.coeffs)


def poly_field(breakpoints, coeffs) -> PiecewisePolyField:
    return PiecewisePolyField(breakpoints, coeffs)
