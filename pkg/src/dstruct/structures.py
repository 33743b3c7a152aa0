"""
D-structures as convex bodies of pseudo-gradients.

``D[u]`` is never enumerated.  :func:`describe` returns a machine description
of it, either a list of linear inequalities ``sum_x c_x g(x) >= b`` with
``c, b >= 0`` (graph and Hajlasz structures) or a pointwise floor
``g >= l`` a.e. (interval derivative and trivial structures).  Membership and
optimisation are the only ways in.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .space import (
    CellField,
    FiniteMetricSpace,
    IntervalGridSpace,
    as_values,
    cell_add,
    common_refinement,
    field_abs,
    poly_min_on,
    _pad,
)

KINDS = ("graph", "hajlasz", "interval_derivative", "trivial")
MEMBERSHIP_TOL = 1e-9


class IncompatibleStructureError(ValueError):
    pass


class NotPointwiseLocalError(ValueError):
    pass


@dataclass(frozen=True)
class DStructureDescriptor:
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown structure kind {self.kind!r}; "
                             f"expected one of {KINDS}")

    @property
    def claims_pointwise_local(self) -> bool:
        # a declaration only; the checker has to confirm it
        return self.kind in ("interval_derivative", "trivial")

    def check_compatible(self, space) -> None:
        if self.kind == "graph":
            if not isinstance(space, FiniteMetricSpace) or not space.has_adjacency:
                raise IncompatibleStructureError(
                    "graph structure needs a finite space with adjacency")
        elif self.kind == "hajlasz":
            if not isinstance(space, FiniteMetricSpace):
                raise IncompatibleStructureError(
                    "hajlasz structure needs a finite metric space")
        elif self.kind == "interval_derivative":
            if not isinstance(space, IntervalGridSpace):
                raise IncompatibleStructureError(
                    "interval_derivative needs an IntervalGridSpace")

    def to_json(self) -> dict:
        return {"kind": self.kind, "pointwise_local": self.claims_pointwise_local}

    @classmethod
    def from_json(cls, obj) -> "DStructureDescriptor":
        if isinstance(obj, str):
            return cls(obj)
        return cls(obj["kind"])


GRAPH = DStructureDescriptor("graph")
HAJLASZ = DStructureDescriptor("hajlasz")
INTERVAL_DERIVATIVE = DStructureDescriptor("interval_derivative")
TRIVIAL = DStructureDescriptor("trivial")


def as_structure(s) -> DStructureDescriptor:
    return s if isinstance(s, DStructureDescriptor) else DStructureDescriptor(s)


@dataclass(frozen=True, eq=False)
class LinearConstraints:
    """``D[u] = {g >= 0 : A g >= b}`` with ``A, b >= 0``.

    ``supports[k]`` is ``(indices, coefficients)`` of row ``k``; ``labels[k]``
    names the pair of points the row came from.
    """

    n: int
    supports: tuple
    bounds: np.ndarray
    labels: tuple

    @property
    def n_constraints(self) -> int:
        return len(self.supports)

    def matrix(self) -> np.ndarray:
        A = np.zeros((self.n_constraints, self.n))
        for k, (idx, coef) in enumerate(self.supports):
            A[k, idx] += coef
        return A

    def slacks(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        lhs = np.array([coef @ g[idx] for idx, coef in self.supports], dtype=float)
        return lhs - self.bounds

    def to_json(self) -> dict:
        return {"variant": "linear_constraints", "n": self.n,
                "constraints": [
                    {"support": [[int(i), float(c)] for i, c in zip(idx, coef)],
                     "bound": float(b), "label": list(lab)}
                    for (idx, coef), b, lab in zip(self.supports, self.bounds,
                                                   self.labels)]}


@dataclass(frozen=True, eq=False)
class PointwiseLowerBound:
    """``D[u] = {g : g >= floor a.e.}``."""

    floor: object  # ndarray on finite spaces, CellField on the interval

    def to_json(self) -> dict:
        f = self.floor
        payload = f.to_json() if isinstance(f, CellField) else np.asarray(f).tolist()
        return {"variant": "pointwise_lower_bound", "floor": payload}


ConvexGradientBody = LinearConstraints | PointwiseLowerBound


def _pair_constraints(u, pairs, coeffs):
    supports, bounds, labels = [], [], []
    for (i, j), c in zip(pairs, coeffs):
        supports.append((np.array([i, j]), np.array([c, c], dtype=float)))
        bounds.append(abs(u[i] - u[j]))
        labels.append((i, j))
    return supports, np.array(bounds, dtype=float), tuple(labels)


def interval_floor(u: CellField) -> CellField:
    """``|u'|`` per cell, split where ``u'`` changes sign."""
    return field_abs(u.derivative())


def describe(structure, space, u) -> ConvexGradientBody:
    """Machine description of ``D[u]``."""
    s = as_structure(structure)
    s.check_compatible(space)
    if s.kind == "interval_derivative":
        if not isinstance(u, CellField):
            raise IncompatibleStructureError("u must be a field on the interval grid")
        return PointwiseLowerBound(interval_floor(u))
    if s.kind == "trivial":
        if isinstance(u, CellField):
            return PointwiseLowerBound(CellField.constant(0.0, u.breakpoints))
        return PointwiseLowerBound(np.zeros(as_values(u).size))

    v = as_values(u)
    if v.size != space.n:
        raise IncompatibleStructureError("u does not live on this space")
    if s.kind == "graph":
        pairs = [(min(i, j), max(i, j)) for i, j in space.edges]
        supports, bounds, labels = _pair_constraints(v, pairs, [1.0] * len(pairs))
    else:
        pairs = list(itertools.combinations(range(space.n), 2))
        coeffs = [space.dist[i, j] for i, j in pairs]
        supports, bounds, labels = _pair_constraints(v, pairs, coeffs)
    return LinearConstraints(space.n, tuple(supports), bounds, labels)


@dataclass(frozen=True)
class Membership:
    member: bool
    violation: float
    witness: dict

    def __bool__(self):
        return self.member


def body_membership(body: ConvexGradientBody, g, tol: float = MEMBERSHIP_TOL) -> Membership:
    """Is ``g`` in the body?  Returns the worst violation as witness."""
    if isinstance(body, LinearConstraints):
        gv = np.asarray(g, dtype=float)
        worst = float(np.max(-gv, initial=0.0))
        wit = {"kind": "negativity", "point": int(np.argmin(gv))} if worst > 0 else {}
        if body.n_constraints:
            sl = body.slacks(gv)
            k = int(np.argmin(sl))
            if -sl[k] > worst:
                idx, coef = body.supports[k]
                worst = float(-sl[k])
                wit = {"kind": "constraint", "index": k, "label": list(body.labels[k]),
                       "lhs": float(coef @ gv[idx]), "bound": float(body.bounds[k])}
        return Membership(worst <= tol, max(worst, 0.0), wit)

    floor = body.floor
    if isinstance(floor, CellField):
        if not isinstance(g, CellField):
            raise TypeError("g must be a CellField on the interval model")
        bp, (rg, rf) = common_refinement(g, floor)
        w = max(rg.coeffs.shape[1], rf.coeffs.shape[1])
        diff = _pad(rg.coeffs, w) - _pad(rf.coeffs, w)
        if w <= 2:
            # affine cells: the minimum sits at an endpoint
            c1 = diff[:, 1] if w == 2 else 0.0
            mins = np.minimum(diff[:, 0] + c1 * bp[:-1], diff[:, 0] + c1 * bp[1:])
        else:
            mins = np.array([poly_min_on(diff[j], bp[j], bp[j + 1])
                             for j in range(bp.size - 1)])
        j = int(np.argmin(mins))
        worst = float(-mins[j])
        wit = {"kind": "floor", "cell": [float(bp[j]), float(bp[j + 1])],
               "min_gap": float(mins[j])} if worst > 0 else {}
        return Membership(worst <= tol, max(worst, 0.0), wit)

    gv = np.asarray(g, dtype=float)
    gap = gv - np.asarray(floor, dtype=float)
    x = int(np.argmin(gap))
    worst = float(-gap[x])
    wit = {"kind": "floor", "point": x, "g": float(gv[x]),
           "floor": float(floor[x])} if worst > 0 else {}
    return Membership(worst <= tol, max(worst, 0.0), wit)


def membership(structure, space, u, g, tol: float = MEMBERSHIP_TOL) -> Membership:
    return body_membership(describe(structure, space, u), g, tol)


def floor_of(structure, space, u):
    """The floor ``l`` with ``D[u] = {g >= l}`` (pointwise kinds only)."""
    s = as_structure(structure)
    if not s.claims_pointwise_local:
        raise NotPointwiseLocalError(
            f"{s.kind} structure is described by constraints, not by a floor")
    return describe(s, space, u).floor


def greedy_feasible(body: LinearConstraints) -> np.ndarray:
    """``g(x) = max over rows k through x of b_k / c_kx``: always feasible."""
    g = np.zeros(body.n)
    for (idx, coef), b in zip(body.supports, body.bounds):
        for i, c in zip(idx, coef):
            if c > 0:
                g[i] = max(g[i], b / c)
    return g


def extreme_feasible(body: LinearConstraints, order, pick) -> np.ndarray:
    """Feasible point that loads each unmet row onto one chosen variable.

    ``order`` is the row visiting order, ``pick(k, idx)`` returns the position
    within row ``k``'s support to raise.
    """
    g = np.zeros(body.n)
    for k in order:
        idx, coef = body.supports[k]
        short = body.bounds[k] - coef @ g[idx]
        if short > 0:
            pos = pick(k, idx)
            g[idx[pos]] += short / coef[pos]
    return g


def add_floor_perturbation(g: CellField, h: CellField) -> CellField:
    return cell_add(g, h).as_cellfield()
