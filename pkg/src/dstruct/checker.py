"""
Seeded property checks for D-structures.

Every property is split into a *sampler*, which draws the inputs the property
quantifies over, and an *evaluator*, which turns those inputs into a margin:
the amount by which the conclusion is violated (``<= tol`` means it holds).
A failing trial keeps its inputs as the witness, so replaying a witness is just
running the evaluator again (:func:`recheck`).

Trial ``k`` draws from ``default_rng([seed, code(prop), k])``; verdicts do not
depend on how trials are scheduled.  ``DSTRUCT_THREADS`` caps the thread pool
used to run them.

Defaults: 100 trials, random connected graphs with 2..8 vertices (finite
kinds), random grids with 1..16 cells and nodal values in ``[-2, 2]``
(interval kinds).  On finite spaces, trial 0 of each locality property is a
fixed probe built on one edge ``x ~ y``: ``u = chi_{y}``, ``B = {x}``, with
pseudo-gradients loaded onto a single endpoint.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import io
from .generators import path_graph, random_connected_graph, random_interval_grid
from .solver import minimal_pseudo_gradient, restricted_minimizer
from .space import (
    TAU_EQ,
    CellField,
    CellSet,
    FiniteMetricSpace,
    IntervalGridSpace,
    PiecewiseLinearMap,
    PiecewisePolyField,
    cell_add,
    cell_max,
    cell_min,
    cell_mul,
    cell_scale,
    coefficient_residual,
    compose_pl,
    field_abs,
    lipschitz_constant,
    lp_norm,
    merge_breakpoints,
    pl_field,
    positive_indicator,
    subdivide_at_roots,
    _pad,
)
from .structures import (
    LinearConstraints,
    NotPointwiseLocalError,
    PointwiseLowerBound,
    as_structure,
    body_membership,
    describe,
    extreme_feasible,
    greedy_feasible,
)

HOLDS = "holds-on-sample"
FAILS = "fails-with-witness"
SKIPPED = "skipped"

AXIOMS = ("A1", "A2", "A3", "A4", "A5")
LOCALITY = ("L1", "L2", "L3", "L4", "L5", "timoshin", "shanmugalingam")
CALCULUS_DU = ("null_preimage", "chain_rule", "leibniz")

# finite constraint kinds go through the iterative solver
SOLVER_TOL = 1e-10
FINITE_TOL = 1e-7
EXACT_TOL = 1e-9
VALUE_RANGE = 2.0


@dataclass
class CheckReport:
    property: str
    structure: str
    trials: int
    passes: int
    verdict: str
    witness: dict | None = None
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.witness is not None) != (self.verdict == FAILS):
            raise ValueError("witness must be present exactly when the check fails")

    @property
    def ok(self) -> bool:
        return self.verdict == HOLDS

    def to_json(self) -> dict:
        return {"property": self.property, "structure": self.structure,
                "trials": self.trials, "passes": self.passes, "verdict": self.verdict,
                "witness": self.witness, "seed": self.seed, "details": self.details}


# ---------------------------------------------------------------------------
# context and random inputs
# ---------------------------------------------------------------------------


@dataclass
class _Ctx:
    structure: object
    space: object
    p: float
    tol: float

    @property
    def interval(self) -> bool:
        return isinstance(self.space, IntervalGridSpace)

    @property
    def constrained(self) -> bool:
        return self.structure.kind in ("graph", "hajlasz")

    def body(self, u):
        return describe(self.structure, self.space, u)

    def violation(self, u, g) -> float:
        return body_membership(self.body(u), g, 0.0).violation

    def minimal(self, u):
        return minimal_pseudo_gradient(self.space, self.structure, u, self.p,
                                       tol=SOLVER_TOL, seed=0).g_star


def _make_ctx(structure, space, p):
    s = as_structure(structure)
    s.check_compatible(space)
    tol = FINITE_TOL if s.kind in ("graph", "hajlasz") else EXACT_TOL
    return _Ctx(s, space, p, tol)


def _random_space(structure, rng):
    if structure.kind == "interval_derivative":
        return random_interval_grid(int(rng.integers(1, 17)), rng)
    space = random_connected_graph(int(rng.integers(2, 9)), rng)
    if rng.random() < 0.5:
        space = FiniteMetricSpace(space.dist, rng.uniform(0.5, 2.0, space.n),
                                  space.point_ids, space.edges)
    return space


def _rand_u(ctx, rng):
    if ctx.interval:
        bp = ctx.space.breakpoints
        return pl_field(bp, rng.uniform(-VALUE_RANGE, VALUE_RANGE, bp.size))
    return rng.uniform(-VALUE_RANGE, VALUE_RANGE, ctx.space.n)


def _rand_nonneg(ctx, rng):
    u = _rand_u(ctx, rng)
    if ctx.interval:
        return cell_max(u, _zero_like(u))
    return np.maximum(u, 0.0)


def _zero_like(u):
    return PiecewisePolyField(u.breakpoints, np.zeros((u.n_cells, 1)))


def _rand_subset(ctx, rng) -> CellSet:
    if ctx.interval:
        n = ctx.space.n_cells
        k = int(rng.integers(1, n + 1))
        return CellSet.cells(ctx.space.breakpoints, rng.choice(n, k, replace=False))
    n = ctx.space.n
    k = int(rng.integers(1, n + 1))
    return CellSet.points(rng.choice(n, k, replace=False).tolist())


def _constant_on(ctx, B: CellSet, rng):
    """Random ``u`` that is constant on ``B``."""
    if ctx.interval:
        bp = ctx.space.breakpoints
        slopes = rng.uniform(-4.0, 4.0, bp.size - 1)
        slopes[B.mask(bp)] = 0.0
        vals = np.concatenate([[0.0], np.cumsum(slopes * np.diff(bp))])
        vals += rng.uniform(-1.0, 1.0)
        top = np.max(np.abs(vals))
        if top > VALUE_RANGE:
            vals *= VALUE_RANGE / top
        return pl_field(bp, vals)
    u = _rand_u(ctx, rng)
    u[B.mask(u.size)] = rng.uniform(-VALUE_RANGE, VALUE_RANGE)
    return u


def _perturbation(ctx, rng, like=None):
    """Random nonnegative field (possibly zero, possibly sparse)."""
    mode = int(rng.integers(0, 4))
    if ctx.interval:
        bp = ctx.space.breakpoints if like is None else like.breakpoints
        if mode == 0:
            return CellField.constant(0.0, bp)
        if mode == 1:
            return CellField.piecewise_constant(bp, rng.random(bp.size - 1))
        if mode == 2:
            vals = rng.random(bp.size) * (rng.random(bp.size) < 0.5)
            return CellField.from_nodal(bp, vals)
        return CellField.from_nodal(bp, rng.random(bp.size))
    n = ctx.space.n
    if mode == 0:
        return np.zeros(n)
    if mode == 1:
        return rng.random(n) * (rng.random(n) < 0.5)
    return rng.random(n) * rng.choice([0.1, 1.0])


def _sample_g(ctx, u, rng):
    """A pseudo-gradient of ``u``: minimal, vertex-like or greedy, plus noise."""
    body = ctx.body(u)
    if isinstance(body, PointwiseLowerBound):
        floor = body.floor
        if ctx.interval:
            return cell_add(floor, _perturbation(ctx, rng, floor)).as_cellfield()
        return floor + _perturbation(ctx, rng)
    mode = int(rng.integers(0, 3))
    if mode == 0:
        g = ctx.minimal(u)
    elif mode == 1:
        order = rng.permutation(body.n_constraints)
        g = extreme_feasible(body, order, lambda k, idx: int(rng.integers(len(idx))))
    else:
        g = greedy_feasible(body)
    return g + _perturbation(ctx, rng)


def _probe_pair(ctx):
    if ctx.structure.kind == "graph" and ctx.space.edges:
        i, j = ctx.space.edges[0]
        return min(i, j), max(i, j)
    return 0, 1


def _loaded_on(ctx, u, vertex):
    body = ctx.body(u)
    if isinstance(body, PointwiseLowerBound):
        return np.asarray(body.floor, dtype=float)

    def pick(k, idx):
        hit = np.nonzero(idx == vertex)[0]
        return int(hit[0]) if hit.size else 0

    return extreme_feasible(body, range(body.n_constraints), pick)


def _indicator(n, j, scale=1.0):
    u = np.zeros(n)
    u[j] = scale
    return u


# ---------------------------------------------------------------------------
# field helpers shared by the evaluators
# ---------------------------------------------------------------------------


def _pos_part(ctx, u):
    return cell_max(u, _zero_like(u)) if ctx.interval else np.maximum(u, 0.0)


def _chi_pos_times(ctx, u, g):
    if ctx.interval:
        return cell_mul(positive_indicator(u), g).as_cellfield()
    return np.where(u > 0, g, 0.0)


def _combine(ctx, u1, u2, a1, a2):
    if ctx.interval:
        return cell_add(u1, u2, a1, a2)
    return a1 * u1 + a2 * u2


def _gmax(ctx, g1, g2):
    return cell_max(g1, g2).as_cellfield() if ctx.interval else np.maximum(g1, g2)


def _gmin(ctx, g1, g2):
    return cell_min(g1, g2).as_cellfield() if ctx.interval else np.minimum(g1, g2)


def _umax(ctx, u1, u2):
    return cell_max(u1, u2) if ctx.interval else np.maximum(u1, u2)


def _umin(ctx, u1, u2):
    return cell_min(u1, u2) if ctx.interval else np.minimum(u1, u2)


def _restrict(ctx, g, B: CellSet, inside: bool):
    """``chi_B g`` (``inside``) or ``chi_{X \\ B} g``."""
    if ctx.interval:
        bp = merge_breakpoints(g.breakpoints, B.grid)
        r = g.refine(bp)
        keep = B.mask(bp) if inside else ~B.mask(bp)
        return CellField(bp, r.coeffs * keep[:, None], r.max_degree)
    keep = B.mask(np.asarray(g).size)
    return np.where(keep if inside else ~keep, g, 0.0)


def _sup_on(ctx, g, B: CellSet) -> float:
    if ctx.interval:
        r = _restrict(ctx, g, B, True)
        return r.sup_abs()
    return float(np.max(np.asarray(g)[B.mask(np.asarray(g).size)], initial=0.0))


def _excess(ctx, lower, g) -> float:
    """``ess sup (lower - g)^+``."""
    if ctx.interval:
        return body_membership(PointwiseLowerBound(lower), g, 0.0).violation
    return float(np.max(np.asarray(lower) - np.asarray(g), initial=0.0))


def _norm(ctx, f) -> float:
    return lp_norm(ctx.space, f, ctx.p)


def _diff(ctx, a, b):
    return cell_add(a, b, 1.0, -1.0) if ctx.interval else np.asarray(a) - np.asarray(b)


# ---------------------------------------------------------------------------
# axioms
# ---------------------------------------------------------------------------


def _sample_A1(ctx, rng, trial):
    return {"u": _rand_nonneg(ctx, rng)}


def _eval_A1(ctx, u):
    lip = lipschitz_constant(ctx.space, u)
    if ctx.interval:
        cand = cell_scale(positive_indicator(u), lip)
    else:
        cand = lip * (np.asarray(u) > 0)
    return ctx.violation(u, cand), "Lip(u) chi_{u>0} in D[u]"


def _sample_A2(ctx, rng, trial):
    u1, u2 = _rand_u(ctx, rng), _rand_u(ctx, rng)
    a1, a2 = rng.uniform(-2, 2, 2) * (rng.random(2) < 0.85)
    return {"u1": u1, "u2": u2, "g1": _sample_g(ctx, u1, rng), "g2": _sample_g(ctx, u2, rng),
            "a1": float(a1), "a2": float(a2), "extra": _perturbation(ctx, rng)}


def _eval_A2(ctx, u1, u2, g1, g2, a1, a2, extra):
    g = _combine(ctx, g1, g2, abs(a1), abs(a2))
    g = cell_add(g, extra).as_cellfield() if ctx.interval else g + extra
    target = _combine(ctx, u1, u2, a1, a2)
    return ctx.violation(target, g), "g >= |a1| g1 + |a2| g2 implies g in D[a1 u1 + a2 u2]"


def _sample_A3(ctx, rng, trial):
    u = _rand_u(ctx, rng)
    return {"u": u, "g": _sample_g(ctx, u, rng), "phi": _rand_u(ctx, rng)}


def _eval_A3(ctx, u, g, phi):
    sup_phi = phi.sup_abs() if ctx.interval else float(np.max(np.abs(phi)))
    lip_phi = lipschitz_constant(ctx.space, phi)
    if ctx.interval:
        cand = cell_add(cell_scale(g, sup_phi), field_abs(u).as_cellfield(), 1.0, lip_phi)
        target = cell_mul(phi, u)
    else:
        cand = sup_phi * g + lip_phi * np.abs(u)
        target = phi * u
    return ctx.violation(target, cand), "g sup|phi| + Lip(phi) |u| in D[phi u]"


def _sample_A4(ctx, rng, trial):
    u1, u2 = _rand_u(ctx, rng), _rand_u(ctx, rng)
    return {"u1": u1, "u2": u2, "g1": _sample_g(ctx, u1, rng), "g2": _sample_g(ctx, u2, rng)}


def _eval_A4(ctx, u1, u2, g1, g2):
    g = _gmax(ctx, g1, g2)
    m = max(ctx.violation(_umax(ctx, u1, u2), g), ctx.violation(_umin(ctx, u1, u2), g))
    return m, "max(g1, g2) in D[max(u1, u2)] and D[min(u1, u2)]"


_A5_TERMS = 12


def _sample_A5(ctx, rng, trial):
    u, w = _rand_u(ctx, rng), _rand_u(ctx, rng)
    return {"u": u, "w": w, "g": _sample_g(ctx, u, rng), "h": _sample_g(ctx, w, rng)}


def _a5_sequence(ctx, u, w, g, h):
    for n in range(1, _A5_TERMS + 1):
        if ctx.interval:
            yield n, cell_add(u, w, 1.0, 1.0 / n), cell_add(g, h, 1.0, 1.0 / n).as_cellfield()
        else:
            yield n, u + w / n, g + h / n


def _eval_A5(ctx, u, w, g, h):
    premise, u_err, g_err = 0.0, [], []
    for n, un, gn in _a5_sequence(ctx, u, w, g, h):
        premise = max(premise, ctx.violation(un, gn))
        u_err.append(_norm(ctx, _diff(ctx, un, u)))
        g_err.append(_norm(ctx, _diff(ctx, gn, g)))
    # the premise has to hold for the implication to be tested at all
    converging = (u_err[-1] <= u_err[0] / _A5_TERMS * (1 + 1e-9) + 1e-12
                  and g_err[-1] <= g_err[0] / _A5_TERMS * (1 + 1e-9) + 1e-12)
    if premise > ctx.tol or not converging:
        raise _BadSample(f"A5 premise not met (violation {premise:.3e})")
    return ctx.violation(u, g), "g_n in D[u_n], u_n -> u, g_n -> g implies g in D[u]"


# ---------------------------------------------------------------------------
# locality
# ---------------------------------------------------------------------------


def _probe_u_B(ctx):
    i, j = _probe_pair(ctx)
    return _indicator(ctx.space.n, j), CellSet.points([i]), i, j


def _finite_probe(ctx, trial):
    return trial == 0 and not ctx.interval


def _sample_L1(ctx, rng, trial):
    if _finite_probe(ctx, trial):
        u, B, _, _ = _probe_u_B(ctx)
        return {"u": u, "B": B}
    B = _rand_subset(ctx, rng)
    return {"u": _constant_on(ctx, B, rng), "B": B}


def _eval_L1(ctx, u, B):
    energy, _ = restricted_minimizer(ctx.space, ctx.structure, u, ctx.p, B, tol=SOLVER_TOL)
    margin = energy
    if ctx.structure.kind == "graph":
        # the explicit pseudo-gradient: 0 on B, |c| + |u| off B
        c = float(np.asarray(u)[sorted(B.indices)][0])
        g = np.where(B.mask(ctx.space.n), 0.0, abs(c) + np.abs(u))
        margin = max(margin, ctx.violation(u, g))
    return margin, "u constant on B implies E_p(u|B) = 0"


_sample_L2 = _sample_L1


def _eval_L2(ctx, u, B):
    return _sup_on(ctx, ctx.minimal(u), B), "u constant on B implies Du = 0 on B"


def _sample_L3(ctx, rng, trial):
    if _finite_probe(ctx, trial):
        u, _, i, _ = _probe_u_B(ctx)
        return {"u": u, "g": _loaded_on(ctx, u, i)}
    u = _rand_u(ctx, rng)
    return {"u": u, "g": _sample_g(ctx, u, rng)}


def _eval_L3(ctx, u, g):
    return (ctx.violation(_pos_part(ctx, u), _chi_pos_times(ctx, u, g)),
            "g in D[u] implies chi_{u>0} g in D[u^+]")


def _sample_L4(ctx, rng, trial):
    if _finite_probe(ctx, trial):
        u, _, i, j = _probe_u_B(ctx)
        return {"u": u, "g1": _loaded_on(ctx, u, i), "g2": _loaded_on(ctx, u, j)}
    u = _rand_u(ctx, rng)
    return {"u": u, "g1": _sample_g(ctx, u, rng), "g2": _sample_g(ctx, u, rng)}


def _eval_L4(ctx, u, g1, g2):
    return ctx.violation(u, _gmin(ctx, g1, g2)), "g1, g2 in D[u] implies min(g1, g2) in D[u]"


_sample_L5 = _sample_L3


def _eval_L5(ctx, u, g):
    return _excess(ctx, ctx.minimal(u), g), "Du <= g a.e. for every g in D[u]"


def _sample_timoshin(ctx, rng, trial):
    if _finite_probe(ctx, trial):
        u1, _, i, j = _probe_u_B(ctx)
        u2 = 2.0 * u1
        return {"u1": u1, "u2": u2, "g1": _loaded_on(ctx, u1, i), "g2": _loaded_on(ctx, u2, j)}
    u1 = _rand_u(ctx, rng)
    if rng.random() < 0.3:
        # share a piece so that the {u1 = u2} term is exercised
        u2 = _umax(ctx, u1, _rand_u(ctx, rng))
    else:
        u2 = _rand_u(ctx, rng)
    return {"u1": u1, "u2": u2, "g1": _sample_g(ctx, u1, rng), "g2": _sample_g(ctx, u2, rng)}


def _timoshin_candidate(ctx, u1, u2, g1, g2):
    if not ctx.interval:
        u1, u2 = np.asarray(u1), np.asarray(u2)
        return np.where(u1 < u2, g1, np.where(u2 < u1, g2, np.minimum(g1, g2)))
    gm = cell_min(g1, g2)
    diff = subdivide_at_roots(cell_add(u1, u2, 1.0, -1.0).as_cellfield())
    bp = merge_breakpoints(diff.breakpoints, g1.breakpoints, g2.breakpoints, gm.breakpoints)
    d, r1, r2, rm = diff.refine(bp), g1.refine(bp), g2.refine(bp), gm.refine(bp)
    w = max(r1.coeffs.shape[1], r2.coeffs.shape[1], rm.coeffs.shape[1])
    dm = d.values_at(np.arange(d.n_cells), d.midpoints)
    equal = np.all(np.abs(d.coeffs) <= TAU_EQ, axis=1)
    out = np.where(equal[:, None], _pad(rm.coeffs, w),
                   np.where((dm < 0)[:, None], _pad(r1.coeffs, w), _pad(r2.coeffs, w)))
    return CellField(bp, out)


def _eval_timoshin(ctx, u1, u2, g1, g2):
    cand = _timoshin_candidate(ctx, u1, u2, g1, g2)
    return (ctx.violation(_umin(ctx, u1, u2), cand),
            "chi_{u1<u2} g1 + chi_{u2<u1} g2 + chi_{u1=u2} min(g1, g2) in D[min(u1, u2)]")


def _sample_shanmugalingam(ctx, rng, trial):
    if _finite_probe(ctx, trial):
        u2, B, _, _ = _probe_u_B(ctx)
        u1 = np.zeros(ctx.space.n)
        return {"u1": u1, "u2": u2, "B": B, "g1": np.zeros(ctx.space.n),
                "g2": ctx.minimal(u2)}
    B = _rand_subset(ctx, rng)
    u1 = _rand_u(ctx, rng)
    if ctx.interval:
        bp = ctx.space.breakpoints
        vals = rng.uniform(-VALUE_RANGE, VALUE_RANGE, bp.size)
        cells = np.nonzero(B.mask(bp))[0]
        vals[cells] = 0.0
        vals[cells + 1] = 0.0
        u2 = cell_add(u1, pl_field(bp, vals))
    else:
        u2 = _rand_u(ctx, rng)
        m = B.mask(ctx.space.n)
        u2[m] = u1[m]
    return {"u1": u1, "u2": u2, "B": B, "g1": _sample_g(ctx, u1, rng),
            "g2": _sample_g(ctx, u2, rng)}


def _eval_shanmugalingam(ctx, u1, u2, B, g1, g2):
    if ctx.interval:
        cand = cell_add(_restrict(ctx, g1, B, True), _restrict(ctx, g2, B, False))
    else:
        cand = _restrict(ctx, g1, B, True) + _restrict(ctx, g2, B, False)
    return ctx.violation(u2, cand), "u1 = u2 on B implies chi_B g1 + chi_{X\\B} g2 in D[u2]"


# ---------------------------------------------------------------------------
# calculus rules for Du (pointwise local structures on the interval)
# ---------------------------------------------------------------------------


def _rand_pl_map(rng) -> PiecewiseLinearMap:
    k = int(rng.integers(1, 5))
    ts = np.sort(rng.uniform(-VALUE_RANGE, VALUE_RANGE, k + 1))
    ys = rng.uniform(-VALUE_RANGE, VALUE_RANGE, k + 1)
    return PiecewiseLinearMap.from_points(ts, ys, rng.uniform(-2, 2), rng.uniform(-2, 2))


def _sample_null_preimage(ctx, rng, trial):
    B = _rand_subset(ctx, rng)
    u = _constant_on(ctx, B, rng)
    flat_vals = u.values_at(np.arange(u.n_cells), u.midpoints)[B.mask(u.breakpoints)]
    N = np.unique(np.concatenate([flat_vals[:1], rng.uniform(-2, 2, 2)]))
    return {"u": u, "N": N}


def _eval_null_preimage(ctx, u, N):
    floor = ctx.minimal(u)
    bp = merge_breakpoints(floor.breakpoints, u.breakpoints)
    r, ur = floor.refine(bp), u.refine(bp)
    vals = ur.values_at(np.arange(ur.n_cells), ur.midpoints)
    flat = np.all(np.abs(ur.coeffs[:, 1:]) <= TAU_EQ, axis=1)
    hit = flat & np.any(np.abs(vals[:, None] - np.asarray(N)[None, :]) <= TAU_EQ, axis=1)
    margin = float(np.max(np.abs(r.coeffs[hit]), initial=0.0))
    return margin, "Du = 0 a.e. on u^{-1}(N) for a null set N"


def _sample_chain_rule(ctx, rng, trial):
    return {"u": _rand_u(ctx, rng), "phi": _rand_pl_map(rng)}


def _eval_chain_rule(ctx, u, phi):
    comp = compose_pl(phi, u)
    lhs = ctx.minimal(comp)
    du = ctx.minimal(u).refine(merge_breakpoints(lhs.breakpoints, comp.breakpoints))
    ur = u.refine(du.breakpoints)
    factor = np.abs(phi.derivative(ur.values_at(np.arange(ur.n_cells), ur.midpoints)))
    rhs = CellField(du.breakpoints, du.coeffs * factor[:, None])
    return coefficient_residual(lhs, rhs), "D(phi o u) = |phi'| o u Du"


def _sample_leibniz(ctx, rng, trial):
    return {"u": _rand_u(ctx, rng), "v": _rand_u(ctx, rng)}


def _eval_leibniz(ctx, u, v):
    lhs = ctx.minimal(cell_mul(u, v))
    rhs = cell_add(cell_mul(field_abs(u), ctx.minimal(v)),
                   cell_mul(field_abs(v), ctx.minimal(u))).as_cellfield()
    # relative: products of steep pieces carry large coefficients
    return _excess(ctx, lhs, rhs) / max(1.0, rhs.sup_abs()), "D(uv) <= |u| Dv + |v| Du"


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------


class _BadSample(Exception):
    pass


_PROPS = {name: (globals()[f"_sample_{name}"], globals()[f"_eval_{name}"])
          for name in AXIOMS + LOCALITY + CALCULUS_DU}


def register_property(name: str, sampler, evaluator) -> None:
    """Add a property to the engine.

    ``sampler(ctx, rng, trial) -> dict`` draws JSON-encodable inputs and
    ``evaluator(ctx, **inputs) -> (margin, text)`` scores them.
    """
    if name in _PROPS and _PROPS[name] != (sampler, evaluator):
        raise ValueError(f"property {name!r} already registered")
    _PROPS[name] = (sampler, evaluator)


def run_property(structure, space, prop: str, trials: int = 100, seed: int = 42,
                 p: float = 2.0) -> CheckReport:
    if prop not in _PROPS:
        raise ValueError(f"unknown property {prop!r}")
    return _run(structure, space, prop, trials, seed, p)


def _code(prop: str) -> int:
    return zlib.crc32(prop.encode())


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("DSTRUCT_THREADS", "1")))
    except ValueError:
        return 1


def _run_trial(structure, space, prop, p, seed, trial):
    rng = np.random.default_rng([seed, _code(prop), trial])
    sp = space if space is not None else _random_space(structure, rng)
    if trial == 0 and space is None and structure.kind in ("graph", "hajlasz", "trivial") \
            and prop in LOCALITY:
        sp = path_graph(2)
    ctx = _make_ctx(structure, sp, p)
    sampler, evaluator = _PROPS[prop]
    for _ in range(10):
        inputs = sampler(ctx, rng, trial)
        try:
            margin, text = evaluator(ctx, **inputs)
        except _BadSample:
            continue
        return trial, sp, inputs, float(margin), text, ctx.tol
    raise RuntimeError(f"could not draw valid inputs for {prop}")  # pragma: no cover


def _run(structure, space, prop, trials, seed, p) -> CheckReport:
    s = as_structure(structure)
    if space is not None:
        s.check_compatible(space)
    args = [(s, space, prop, p, seed, k) for k in range(trials)]
    if _threads() > 1 and trials > 1:
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            results = list(pool.map(lambda a: _run_trial(*a), args))
    else:
        results = [_run_trial(*a) for a in args]
    results.sort(key=lambda r: r[0])

    passes, witness, worst = 0, None, 0.0
    for trial, sp, inputs, margin, text, tol in results:
        worst = max(worst, margin)
        if margin <= tol:
            passes += 1
        elif witness is None:
            witness = {"trial": trial, "inequality": text, "margin": margin, "tol": tol,
                       "inputs": {k: io.encode(v) for k, v in inputs.items()},
                       "space": io.space_to_json(sp), "p": p}
    verdict = HOLDS if witness is None else FAILS
    report = CheckReport(prop, s.kind, trials, passes, verdict, witness, seed,
                         {"max_margin": worst, "p": p})
    if witness is not None:
        # replay from the serialised payload before reporting
        again = recheck(report, s)
        if again <= witness["tol"]:
            raise RuntimeError(f"{prop} witness did not replay (margin {again:.3e})")
        witness["rechecked_margin"] = again
    return report


def recheck(report: CheckReport | dict, structure=None) -> float:
    """Replay a witness; returns the recomputed margin."""
    rep = report.to_json() if isinstance(report, CheckReport) else report
    wit = rep["witness"]
    if wit is None:
        raise ValueError("report has no witness")
    s = as_structure(structure if structure is not None else rep["structure"])
    space = io.space_from_json(wit["space"])
    ctx = _make_ctx(s, space, wit["p"])
    inputs = {k: io.decode(v) for k, v in wit["inputs"].items()}
    return float(_PROPS[rep["property"]][1](ctx, **inputs)[0])


def check_axiom(structure, space=None, axiom: str = "A1", trials: int = 100,
                seed: int = 42, p: float = 2.0) -> CheckReport:
    """Sample the D-structure axiom ``axiom`` (``A1`` .. ``A5``).

    With ``space=None`` every trial draws its own random space.
    """
    if axiom not in AXIOMS:
        raise ValueError(f"unknown axiom {axiom!r}")
    return _run(structure, space, axiom, trials, seed, p)


def check_locality(structure, space=None, prop: str = "L1", trials: int = 100,
                   seed: int = 42, p: float = 2.0) -> CheckReport:
    """Sample one of ``L1`` .. ``L5``, ``timoshin``, ``shanmugalingam``."""
    if prop not in LOCALITY:
        raise ValueError(f"unknown locality property {prop!r}")
    return _run(structure, space, prop, trials, seed, p)


def check_calculus_Du(structure="interval_derivative", trials: int = 100, seed: int = 42,
                      p: float = 2.0, space=None) -> dict:
    """Null-preimage, chain and Leibniz rules for ``Du``; one report per rule."""
    s = as_structure(structure)
    if not s.claims_pointwise_local or s.kind != "interval_derivative":
        raise NotPointwiseLocalError(
            f"calculus rules are checked on the pointwise local interval structure, "
            f"not {s.kind}")
    return {rule: _run(s, space, rule, trials, seed, p) for rule in CALCULUS_DU}


def check_property(structure, space, prop, trials=100, seed=42, p=2.0):
    if prop in AXIOMS:
        return check_axiom(structure, space, prop, trials, seed, p)
    if prop in LOCALITY:
        return check_locality(structure, space, prop, trials, seed, p)
    return run_property(structure, space, prop, trials, seed, p)


# ---------------------------------------------------------------------------
# implication lattice
# ---------------------------------------------------------------------------

# (premises, conclusion): every verdict set must respect these
IMPLICATIONS = (
    (("L3",), "L2"),
    (("L2",), "L1"),
    (("L4",), "L5"),
    (("L5",), "L4"),
    (("L1", "L5"), "L2"),
    (("L1", "L5"), "L3"),
    (("L1", "L5"), "shanmugalingam"),
    (("L1", "L5"), "timoshin"),
    (("shanmugalingam",), "L1"),
    (("shanmugalingam",), "L4"),
    (("timoshin",), "L1"),
    (("timoshin",), "L4"),
)


@dataclass
class AuditReport:
    structure: str
    reports: dict
    contradictions: list

    @property
    def consistent(self) -> bool:
        return not self.contradictions

    def verdicts(self) -> dict:
        return {k: r.verdict for k, r in self.reports.items()}

    def to_json(self) -> dict:
        return {"structure": self.structure, "consistent": self.consistent,
                "contradictions": self.contradictions,
                "reports": {k: r.to_json() for k, r in self.reports.items()}}


def lattice_contradictions(verdicts: dict) -> list:
    out = []
    for premises, conclusion in IMPLICATIONS:
        if all(verdicts.get(q) == HOLDS for q in premises) and verdicts.get(conclusion) == FAILS:
            out.append({"premises": list(premises), "conclusion": conclusion})
    return out


def audit_implications(structure, space=None, trials: int = 100, seed: int = 42,
                       p: float = 2.0) -> AuditReport:
    """Run all seven locality checks and test the verdicts against the lattice."""
    s = as_structure(structure)
    reports = {prop: check_locality(s, space, prop, trials, seed, p) for prop in LOCALITY}
    verdicts = {k: r.verdict for k, r in reports.items()}
    return AuditReport(s.kind, reports, lattice_contradictions(verdicts))


# ---------------------------------------------------------------------------
# L1 without L2 on graphs
# ---------------------------------------------------------------------------


def reproduce_counterexample(p: float = 2.0, n_vertices: int = 2) -> CheckReport:
    """Graph structure on a path with counting measure: L1 holds, L2 fails.

    ``u`` is the indicator of vertex 1 and ``B = {0}``.  The explicit
    pseudo-gradient ``0`` on ``B``, ``|c| + |u|`` off ``B`` gives
    ``E_p(u|B) = 0`` while the minimal pseudo-gradient is positive at 0.
    """
    name = "L1-not-L2"
    if n_vertices < 2:
        return CheckReport(name, "graph", 0, 0, SKIPPED, None, None,
                           {"note": "V must contain more than one vertex"})
    space = path_graph(n_vertices)
    u = _indicator(n_vertices, 1)
    B = CellSet.points([0])
    c = float(u[0])
    g_explicit = np.where(B.mask(n_vertices), 0.0, abs(c) + np.abs(u))
    member = body_membership(describe("graph", space, u), g_explicit, 0.0)
    energy_explicit = float(np.sum(space.weights[B.mask(n_vertices)]
                                   * g_explicit[B.mask(n_vertices)] ** p))
    energy_solver = restricted_minimizer(space, "graph", u, p, B, tol=SOLVER_TOL)[0]
    du = minimal_pseudo_gradient(space, "graph", u, p, tol=SOLVER_TOL).g_star
    l1 = member.member and energy_explicit <= 1e-8 and energy_solver <= 1e-8
    l2_fails = du[0] > FINITE_TOL
    ok = l1 and l2_fails
    details = {"u": u.tolist(), "B": sorted(B.indices), "p": p,
               "explicit_g": g_explicit.tolist(),
               "explicit_g_violation": member.violation,
               "energy_on_B_explicit": energy_explicit,
               "energy_on_B_solver": energy_solver,
               "Du": du.tolist(), "Du_on_B": float(du[0]),
               "L1_confirmed": bool(l1), "L2_refuted": bool(l2_fails)}
    witness = None
    if not ok:
        witness = {"inequality": "E_p(u|B) = 0 and Du > 0 on B", "margin": 0.0,
                   "inputs": details}
    return CheckReport(name, "graph", 1, int(ok), HOLDS if ok else FAILS, witness, None,
                       details)
