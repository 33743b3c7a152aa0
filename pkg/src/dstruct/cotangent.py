"""
The cotangent module of a pointwise local D-structure on the interval model.

A pre-cotangent element is a finite family ``[(B_i, u_i)]`` where the ``B_i``
partition ``[0, 1]`` (up to null sets) and each ``u_i`` is a continuous
piecewise polynomial.  Two elements are equivalent when ``D(u_i - v_j) = 0``
a.e. on every ``B_i & C_j``; on the interval model this says that the slope of
``u_i - v_j`` vanishes there.

On a fixed grid the quotient is finite dimensional, so no completion is taken.
:meth:`CotangentModule.canonical_iso` maps a class to its signed slope field
``sum_i chi_{B_i} u_i'`` (a :class:`CotangentElement`).

Examples
--------
>>> from dstruct.space import IntervalGridSpace, pl_field
>>> M = CotangentModule(IntervalGridSpace.uniform(2))
>>> hat = pl_field([0.0, 0.5, 1.0], [0.0, 0.5, 0.0])
>>> M.canonical_iso(M.differential(hat)).slopes.tolist()
[1.0, -1.0]
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np
from numpy.polynomial import polynomial as P

from . import checker
from .checker import FAILS, HOLDS, SKIPPED, CheckReport
from .space import (
    TAU_EQ,
    CellField,
    CellSet,
    IntervalGridSpace,
    PiecewiseLinearMap,
    PiecewisePolyField,
    SimpleField,
    cell_add,
    cell_mul,
    cell_scale,
    coefficient_residual,
    compose_pl,
    field_abs,
    lp_norm,
    merge_breakpoints,
    pl_field,
    _pad,
)
from .structures import NotPointwiseLocalError, as_structure, floor_of

GATE_PROPS = ("L1", "L2", "L3", "L4", "L5")


# ---------------------------------------------------------------------------
# elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PcmElement:
    """Pre-cotangent element ``[(B_i, u_i)]_i``; empty parts are dropped."""

    parts: tuple

    def __post_init__(self):
        clean = []
        for B, u in self.parts:
            if not isinstance(B, CellSet) or B.grid is None:
                raise TypeError("parts need CellSets on an interval grid")
            if not isinstance(u, PiecewisePolyField):
                raise TypeError("parts need continuous piecewise polynomial fields")
            if not B.is_empty():
                clean.append((B, u))
        object.__setattr__(self, "parts", tuple(clean))

    @classmethod
    def from_labels(cls, breakpoints, labels, fields) -> "PcmElement":
        """Part ``k`` is the set of cells with ``labels == k``."""
        labels = np.asarray(labels).astype(int)
        return cls(tuple((CellSet.cells(breakpoints, np.nonzero(labels == k)[0]), fields[k])
                         for k in range(len(fields))))

    def to_json(self) -> dict:
        return {"parts": [{"set": B.to_json(), "field": u.to_json()} for B, u in self.parts]}


@dataclass(frozen=True, eq=False)
class CotangentElement:
    """Signed slope field; one polynomial per cell (a real for linear data)."""

    field: CellField

    @property
    def breakpoints(self) -> np.ndarray:
        return self.field.breakpoints

    @property
    def slopes(self) -> np.ndarray:
        """Per-cell values; only defined for piecewise constant slope fields."""
        if self.field.degree > 0:
            raise ValueError("slope field is not piecewise constant")
        return self.field.coeffs[:, 0].copy()

    def __add__(self, other: "CotangentElement") -> "CotangentElement":
        return CotangentElement(cell_add(self.field, other.field).as_cellfield())

    def scale(self, alpha: float) -> "CotangentElement":
        return CotangentElement(cell_scale(self.field, alpha).as_cellfield())

    def smul(self, h: SimpleField) -> "CotangentElement":
        bp = merge_breakpoints(self.breakpoints, h.breakpoints)
        r = self.field.refine(bp)
        return CotangentElement(CellField(bp, r.coeffs * h.on_grid(bp)[:, None]))

    def abs(self) -> CellField:
        return field_abs(self.field).as_cellfield()

    def residual(self, other: "CotangentElement") -> float:
        return coefficient_residual(self.field, other.field)

    def allclose(self, other: "CotangentElement", tol: float = TAU_EQ) -> bool:
        return self.residual(other) <= tol

    def to_json(self) -> dict:
        out = {"breakpoints": self.breakpoints.tolist()}
        if self.field.degree == 0:
            out["slopes"] = self.slopes.tolist()
        else:
            out["cells"] = [row.tolist() for row in self.field.coeffs]
        return out


def _rel(a: CellField, b: CellField) -> float:
    """Coefficient residual relative to the size of the coefficients."""
    scale = max(1.0, float(np.max(np.abs(a.coeffs))), float(np.max(np.abs(b.coeffs))))
    return coefficient_residual(a, b) / scale


# ---------------------------------------------------------------------------
# the module
# ---------------------------------------------------------------------------

_GATE_LOCK = threading.Lock()
_GATE_CACHE: dict = {}


def pointwise_local_gate(structure, space, p: float = 2.0, trials: int = 100,
                         seed: int = 42):
    """Run L1 .. L5 once per (structure, space, p, trials, seed); cached.

    Returns a read-only mapping ``prop -> CheckReport``.
    """
    s = as_structure(structure)
    grid = tuple(np.asarray(space.breakpoints).tolist()) \
        if isinstance(space, IntervalGridSpace) else id(space)
    key = (s.kind, grid, float(p), trials, seed)
    with _GATE_LOCK:
        if key not in _GATE_CACHE:
            _GATE_CACHE[key] = MappingProxyType(
                {prop: checker.check_locality(s, space, prop, trials, seed, p)
                 for prop in GATE_PROPS})
        return _GATE_CACHE[key]


class CotangentModule:
    """``L^p(T^*X; D)`` on an interval grid.

    Construction fails with :class:`NotPointwiseLocalError` unless the
    L1 .. L5 checks hold on sample for ``structure`` on ``space``.
    """

    def __init__(self, space, structure="interval_derivative", p: float = 2.0,
                 gate_trials: int = 100, gate_seed: int = 42):
        s = as_structure(structure)
        if p <= 1:
            raise ValueError("p must lie in (1, inf)")
        gate = pointwise_local_gate(s, space, p, gate_trials, gate_seed)
        failed = [k for k, r in gate.items() if r.verdict != HOLDS]
        if failed:
            raise NotPointwiseLocalError(
                f"{s.kind} structure is not pointwise local on this space "
                f"(failed: {', '.join(failed)})")
        if not isinstance(space, IntervalGridSpace):
            raise TypeError("the cotangent module is built on an IntervalGridSpace")
        self.space = space
        self.structure = s
        self.p = float(p)
        self.gate = gate

    # -- bookkeeping -------------------------------------------------------

    def _grid(self, *elements) -> np.ndarray:
        arrays = [self.space.breakpoints]
        for a in elements:
            for B, u in a.parts:
                arrays += [B.grid, u.breakpoints]
        return merge_breakpoints(*arrays)

    def labels(self, a: PcmElement, bp=None) -> np.ndarray:
        """Index of the part governing each cell of ``bp``."""
        bp = self._grid(a) if bp is None else bp
        lab = -np.ones(bp.size - 1, dtype=int)
        count = np.zeros(bp.size - 1, dtype=int)
        for k, (B, _) in enumerate(a.parts):
            m = B.mask(bp)
            lab[m] = k
            count += m
        if np.any(count != 1):
            raise ValueError("parts do not partition the interval")
        return lab

    # -- elements ----------------------------------------------------------

    def differential(self, u) -> PcmElement:
        if not isinstance(u, PiecewisePolyField):
            raise TypeError("u must be a continuous piecewise polynomial field")
        return PcmElement(((CellSet.whole(self.space), u),))

    def zero(self) -> PcmElement:
        return self.differential(PiecewisePolyField(self.space.breakpoints,
                                                    np.zeros((self.space.n_cells, 1))))

    def slope_field(self, a: PcmElement, bp=None) -> CellField:
        """``sum_i chi_{B_i} u_i'`` on the common refinement."""
        bp = self._grid(a) if bp is None else bp
        lab = self.labels(a, bp)
        rows = [u.derivative().refine(bp).coeffs for _, u in a.parts]
        w = max(r.shape[1] for r in rows)
        out = np.zeros((bp.size - 1, w))
        for k, r in enumerate(rows):
            out[lab == k] = _pad(r, w)[lab == k]
        return CellField(bp, out)

    def equivalent(self, a: PcmElement, b: PcmElement, tol: float = TAU_EQ) -> bool:
        return self.equivalence_gap(a, b) <= tol

    def equivalence_gap(self, a: PcmElement, b: PcmElement) -> float:
        """Largest slope coefficient of ``u_i - v_j`` over all ``B_i & C_j``."""
        bp = self._grid(a, b)
        return coefficient_residual(self.slope_field(a, bp), self.slope_field(b, bp))

    def add(self, a: PcmElement, b: PcmElement) -> PcmElement:
        bp = self._grid(a, b)
        parts = []
        for B, u in a.parts:
            mb = B.mask(bp)
            for C, v in b.parts:
                m = mb & C.mask(bp)
                if m.any():
                    parts.append((CellSet.cells(bp, np.nonzero(m)[0]), cell_add(u, v)))
        return PcmElement(tuple(parts))

    def scale(self, alpha: float, a: PcmElement) -> PcmElement:
        return PcmElement(tuple((B, cell_scale(u, alpha)) for B, u in a.parts))

    def smul(self, h: SimpleField, a: PcmElement) -> PcmElement:
        """``h [B_i, u_i] = [B_i & C_j, lambda_j u_i]`` for ``h = sum lambda_j chi_{C_j}``."""
        if not isinstance(h, SimpleField):
            raise TypeError("h must be a SimpleField")
        problems = h.check_partition(self.space)
        if problems:
            raise ValueError("h is not simple on X: " + "; ".join(problems))
        bp = merge_breakpoints(self._grid(a), h.breakpoints)
        parts = []
        for B, u in a.parts:
            mb = B.mask(bp)
            for C, lam in h.parts:
                m = mb & C.mask(bp)
                if m.any():
                    parts.append((CellSet.cells(bp, np.nonzero(m)[0]), cell_scale(u, lam)))
        return PcmElement(tuple(parts))

    # -- norms -------------------------------------------------------------

    def pointwise_norm(self, a: PcmElement) -> CellField:
        """``|[B_i, u_i]| = sum_i chi_{B_i} Du_i``."""
        floors = [floor_of(self.structure, self.space, u) for _, u in a.parts]
        bp = merge_breakpoints(self._grid(a), *[f.breakpoints for f in floors])
        lab = self.labels(a, bp)
        rows = [f.refine(bp).coeffs for f in floors]
        w = max(r.shape[1] for r in rows)
        out = np.zeros((bp.size - 1, w))
        for k, r in enumerate(rows):
            out[lab == k] = _pad(r, w)[lab == k]
        return CellField(bp, out)

    def module_norm(self, a: PcmElement, p: float | None = None) -> float:
        """``|| |a| ||_{L^p}``."""
        return lp_norm(self.space, self.pointwise_norm(a), self.p if p is None else p)

    def partwise_norm(self, a: PcmElement, p: float | None = None) -> float:
        """``(sum_i int_{B_i} (Du_i)^p)^(1/p)``, computed part by part."""
        p = self.p if p is None else p
        total = sum(lp_norm(self.space, floor_of(self.structure, self.space, u), p, B) ** p
                    for B, u in a.parts)
        return float(total ** (1.0 / p))

    def partwise_norm_sum(self, a: PcmElement, p: float | None = None) -> float:
        """``sum_i (int_{B_i} (Du_i)^p)^(1/p)``: an equivalent norm, kept for comparison."""
        p = self.p if p is None else p
        return float(sum(lp_norm(self.space, floor_of(self.structure, self.space, u), p, B)
                         for B, u in a.parts))

    # -- canonical representation ------------------------------------------

    def _require_slopes(self):
        if self.structure.kind != "interval_derivative":
            raise ValueError("the slope representation belongs to interval_derivative")

    def canonical_iso(self, a: PcmElement) -> CotangentElement:
        self._require_slopes()
        return CotangentElement(self.slope_field(a))

    def canonical_derivative(self, u) -> CotangentElement:
        return CotangentElement(u.derivative().as_cellfield())

    def preimage(self, s: CotangentElement) -> PcmElement:
        """``sum_j chi_{cell_j} d(U_j)`` with ``U_j' = s`` on cell ``j``."""
        self._require_slopes()
        bp = s.breakpoints
        parts = []
        for j, row in enumerate(s.field.coeffs):
            U = np.atleast_1d(P.polyint(row))
            parts.append((CellSet.cells(bp, [j]),
                          PiecewisePolyField(bp, np.tile(U, (bp.size - 1, 1)))))
        return PcmElement(tuple(parts))

    # -- audits ------------------------------------------------------------

    def uniqueness_audit(self, trials: int = 200, seed: int = 7) -> CheckReport:
        """Well-definedness, linearity, isometry, ``Phi o d`` and surjectivity of Phi."""
        self._require_slopes()
        return checker.run_property(self.structure, self.space, "uniqueness", trials,
                                    seed, self.p)

    def verify_calculus_d(self, trials: int = 200, seed: int = 7) -> dict:
        self._require_slopes()
        return {name: checker.run_property(self.structure, self.space, name, trials,
                                           seed, self.p)
                for name in CALCULUS_D}

    def verify_closure(self, u_seq, u, omega: PcmElement) -> CheckReport:
        """Closedness of ``d`` along one sequence.

        The premise ``u_n -> u`` and ``Phi(du_n) -> Phi(omega)`` is judged by
        fitting ``e_n = L + c/n + c'/n^2`` to each error sequence and asking ``L ~ 0``.
        When the premise fails the report is ``skipped``.
        """
        u_err = [lp_norm(self.space, cell_add(un, u, 1.0, -1.0), self.p) for un in u_seq]
        target = self.canonical_iso(omega)
        w_err = [lp_norm(self.space, (self.canonical_iso(self.differential(un))
                                      + target.scale(-1.0)).field, self.p)
                 for un in u_seq]
        lu, lw = _limit_estimate(u_err), _limit_estimate(w_err)
        premise = lu <= PREMISE_TOL * max(1.0, u_err[0]) and \
            lw <= PREMISE_TOL * max(1.0, w_err[0])
        details = {"terms": len(u_seq), "u_limit_error": lu, "du_limit_error": lw,
                   "premise": bool(premise)}
        if not premise:
            details["note"] = "premise not satisfied; nothing to conclude"
            return CheckReport("closure", self.structure.kind, 1, 0, SKIPPED, None, None,
                               details)
        gap = self.equivalence_gap(self.differential(u), omega)
        details["margin"] = gap
        if gap <= TAU_EQ:
            return CheckReport("closure", self.structure.kind, 1, 1, HOLDS, None, None,
                               details)
        witness = {"inequality": "du equivalent to omega", "margin": gap, "tol": TAU_EQ,
                   "inputs": {"u_seq": [s.to_json() for s in u_seq], "u": u.to_json(),
                              "omega": omega.to_json()}}
        return CheckReport("closure", self.structure.kind, 1, 0, FAILS, witness, None,
                           details)

    def closure_suite(self, n_sequences: int = 20, seed: int = 7,
                      terms: int = 16) -> CheckReport:
        """``verify_closure`` on constructed sequences that satisfy the premise."""
        rng = np.random.default_rng([seed, 0xC105])
        bp = self.space.breakpoints
        passes, witness, notes = 0, None, []
        for k in range(n_sequences):
            u = _rand_pl(rng, bp)
            kind = ("linear", "constant", "shifted", "quadratic")[k % 4]
            w = _rand_pl(rng, bp)
            if kind == "constant":
                seq = [u] * terms
            elif kind == "quadratic":
                seq = [cell_add(u, w, 1.0, 1.0 / n ** 2) for n in range(1, terms + 1)]
            else:
                seq = [cell_add(u, w, 1.0, 1.0 / n) for n in range(1, terms + 1)]
            shift = float(rng.uniform(-5, 5)) if kind == "shifted" else 0.0
            omega = self.differential(cell_add(u, PiecewisePolyField(
                bp, np.full((bp.size - 1, 1), shift))))
            rep = self.verify_closure(seq, u, omega)
            notes.append({"sequence": k, "kind": kind, "verdict": rep.verdict})
            if rep.verdict == HOLDS:
                passes += 1
            elif witness is None:
                witness = rep.witness or {"inequality": "premise of constructed sequence",
                                          "margin": float("inf"), "inputs": rep.details}
        verdict = HOLDS if witness is None else FAILS
        return CheckReport("closure", self.structure.kind, n_sequences, passes, verdict,
                           witness, seed, {"sequences": notes})


PREMISE_TOL = 1e-7


def _limit_estimate(errors) -> float:
    """Least-squares ``L`` in ``e_n = L + c/n + c'/n^2``."""
    e = np.asarray(errors, dtype=float)
    n = np.arange(1, e.size + 1, dtype=float)
    if e.size < 3:
        return float(abs(e[-1]))
    A = np.column_stack([np.ones_like(n), 1.0 / n, 1.0 / n ** 2])
    (L, _, _), *_ = np.linalg.lstsq(A, e, rcond=None)
    return float(abs(L))


# ---------------------------------------------------------------------------
# randomised properties (run through the checker engine)
# ---------------------------------------------------------------------------


def _rand_pl(rng, bp):
    return pl_field(bp, rng.uniform(-2.0, 2.0, len(bp)))


def _rand_field(rng, bp):
    if rng.random() < 0.7:
        return _rand_pl(rng, bp)
    c = rng.uniform(-2.0, 2.0, int(rng.integers(1, 4)) + 1)
    return PiecewisePolyField(bp, np.tile(c, (len(bp) - 1, 1)))


def _rand_labels(rng, n_cells, k_max=4):
    k = int(rng.integers(1, k_max + 1))
    lab = rng.integers(0, k, n_cells)
    _, lab = np.unique(lab, return_inverse=True)
    return lab


def _rand_element_inputs(rng, bp, tag):
    lab = _rand_labels(rng, len(bp) - 1)
    fields = [_rand_field(rng, bp) for _ in range(int(lab.max()) + 1)]
    return {f"{tag}_labels": lab.astype(float), f"{tag}_fields": fields}


def _element(bp, labels, fields):
    return PcmElement.from_labels(bp, labels, fields)


def _equivalent_variant(bp, labels, fields, split, shifts):
    """Split every part by ``split`` and add a constant per new part."""
    lab = np.asarray(labels).astype(int) * 2 + np.asarray(split).astype(int)
    new = []
    for k in range(2 * len(fields)):
        c = PiecewisePolyField(bp, np.full((len(bp) - 1, 1), shifts[k]))
        new.append(cell_add(fields[k // 2], c))
    return PcmElement.from_labels(bp, lab, new)


def _rand_simple(rng, bp):
    lab = _rand_labels(rng, len(bp) - 1)
    return {"h_labels": lab.astype(float),
            "h_values": rng.uniform(-3.0, 3.0, int(lab.max()) + 1)}


def _simple(bp, labels, values) -> SimpleField:
    labels = np.asarray(labels).astype(int)
    return SimpleField(tuple((CellSet.cells(bp, np.nonzero(labels == k)[0]), v)
                             for k, v in enumerate(values)))


def _module(ctx) -> CotangentModule:
    # the engine only runs these after the gate has passed for the suite
    m = CotangentModule.__new__(CotangentModule)
    m.space, m.structure, m.p, m.gate = ctx.space, ctx.structure, ctx.p, None
    return m


def _sample_uniqueness(ctx, rng, trial):
    bp = ctx.space.breakpoints
    n = len(bp) - 1
    out = {**_rand_element_inputs(rng, bp, "a"), **_rand_element_inputs(rng, bp, "b"),
           **_rand_simple(rng, bp)}
    k = len(out["a_fields"])
    out.update({"split": rng.integers(0, 2, n).astype(float),
                "shifts": rng.uniform(-5.0, 5.0, 2 * k),
                "alpha": float(rng.uniform(-3, 3)), "beta": float(rng.uniform(-3, 3)),
                "s": CellField.piecewise_constant(bp, rng.uniform(-4.0, 4.0, n)),
                "u": _rand_field(rng, bp)})
    return out


def _eval_uniqueness(ctx, a_labels, a_fields, b_labels, b_fields, h_labels, h_values,
                     split, shifts, alpha, beta, s, u):
    M = _module(ctx)
    bp = ctx.space.breakpoints
    a = _element(bp, a_labels, a_fields)
    b = _element(bp, b_labels, b_fields)
    a2 = _equivalent_variant(bp, a_labels, a_fields, split, shifts)
    h = _simple(bp, h_labels, h_values)
    Pa, Pb = M.canonical_iso(a), M.canonical_iso(b)
    margins = {
        "well_defined": max(M.equivalence_gap(a, a2), _rel(Pa.field,
                                                           M.canonical_iso(a2).field)),
        "linear": _rel(M.canonical_iso(M.add(M.scale(alpha, a), M.scale(beta, b))).field,
                       (Pa.scale(alpha) + Pb.scale(beta)).field),
        "module": _rel(M.canonical_iso(M.smul(h, a)).field, Pa.smul(h).field),
        "isometric": max(_rel(Pa.abs(), M.pointwise_norm(a)),
                         abs(lp_norm(ctx.space, Pa.abs(), ctx.p) - M.module_norm(a))
                         / max(1.0, M.module_norm(a))),
        "phi_d": _rel(M.canonical_iso(M.differential(u)).field,
                      M.canonical_derivative(u).field),
        "surjective": _rel(M.canonical_iso(M.preimage(CotangentElement(s))).field, s),
    }
    worst = max(margins, key=margins.get)
    return margins[worst], f"Phi is {worst.replace('_', ' ')}"


def _sample_norm_identity(ctx, rng, trial):
    return {"u": _rand_field(rng, ctx.space.breakpoints)}


def _eval_norm_identity(ctx, u):
    M = _module(ctx)
    return (coefficient_residual(M.pointwise_norm(M.differential(u)),
                                 floor_of(ctx.structure, ctx.space, u)),
            "|du| = Du per cell")


def _sample_module_identities(ctx, rng, trial):
    bp = ctx.space.breakpoints
    return {**_rand_element_inputs(rng, bp, "a"), **_rand_element_inputs(rng, bp, "b"),
            **_rand_simple(rng, bp)}


def _eval_module_identities(ctx, a_labels, a_fields, b_labels, b_fields, h_labels,
                            h_values):
    M = _module(ctx)
    bp = ctx.space.breakpoints
    a, b = _element(bp, a_labels, a_fields), _element(bp, b_labels, b_fields)
    h = _simple(bp, h_labels, h_values)
    na = M.pointwise_norm(a)
    r = na.refine(merge_breakpoints(na.breakpoints, h.breakpoints))
    h_times = CellField(r.breakpoints, r.coeffs * np.abs(h.on_grid(r.breakpoints))[:, None])
    norm_a = M.module_norm(a)
    margins = {
        "|h w| = |h| |w|": _rel(M.pointwise_norm(M.smul(h, a)), h_times),
        "||w|| = || |w| ||": abs(norm_a - M.partwise_norm(a)) / max(1.0, norm_a),
        "triangle inequality": max(0.0, M.module_norm(M.add(a, b)) - norm_a
                                   - M.module_norm(b)) / max(1.0, norm_a),
    }
    worst = max(margins, key=margins.get)
    return margins[worst], worst


def _sample_well_posedness(ctx, rng, trial):
    out = _sample_uniqueness(ctx, rng, trial)
    n = ctx.space.n_cells
    kb = len(out["b_fields"])
    out.update({"split_b": rng.integers(0, 2, n).astype(float),
                "shifts_b": rng.uniform(-5.0, 5.0, 2 * kb)})
    for key in ("h_labels", "h_values", "alpha", "beta", "s", "u"):
        out.pop(key)
    return out


def _eval_well_posedness(ctx, a_labels, a_fields, b_labels, b_fields, split, shifts,
                         split_b, shifts_b):
    M = _module(ctx)
    bp = ctx.space.breakpoints
    a, b = _element(bp, a_labels, a_fields), _element(bp, b_labels, b_fields)
    a2 = _equivalent_variant(bp, a_labels, a_fields, split, shifts)
    b2 = _equivalent_variant(bp, b_labels, b_fields, split_b, shifts_b)
    return (M.equivalence_gap(M.add(a, b), M.add(a2, b2)),
            "a ~ a', b ~ b' implies a + b ~ a' + b'")


def _sample_linearity_d(ctx, rng, trial):
    bp = ctx.space.breakpoints
    return {"u": _rand_field(rng, bp), "v": _rand_field(rng, bp),
            "alpha": float(rng.uniform(-3, 3)), "beta": float(rng.uniform(-3, 3))}


def _eval_linearity_d(ctx, u, v, alpha, beta):
    M = _module(ctx)
    lhs = M.differential(cell_add(u, v, alpha, beta))
    rhs = M.add(M.scale(alpha, M.differential(u)), M.scale(beta, M.differential(v)))
    return M.equivalence_gap(lhs, rhs), "d(au + bv) ~ a du + b dv"


def _sample_null_preimage_d(ctx, rng, trial):
    bp = ctx.space.breakpoints
    n = len(bp) - 1
    slopes = rng.uniform(-4.0, 4.0, n)
    slopes[rng.random(n) < 0.4] = 0.0
    vals = np.concatenate([[0.0], np.cumsum(slopes * np.diff(bp))]) + rng.uniform(-1, 1)
    u = pl_field(bp, vals)
    flat = np.nonzero(slopes == 0.0)[0]
    levels = vals[flat] if flat.size else np.zeros(0)
    pick = levels[rng.random(levels.size) < 0.5]
    return {"u": u, "N": np.concatenate([pick, rng.uniform(-2, 2, 1)])}


def _eval_null_preimage_d(ctx, u, N):
    M = _module(ctx)
    sf = M.canonical_iso(M.differential(u)).field
    ur = u.refine(sf.breakpoints)
    vals = ur.values_at(np.arange(ur.n_cells), ur.midpoints)
    flat = np.all(np.abs(ur.coeffs[:, 1:]) <= TAU_EQ, axis=1)
    hit = flat & np.any(np.abs(vals[:, None] - np.asarray(N)[None, :]) <= TAU_EQ, axis=1)
    return float(np.max(np.abs(sf.coeffs[hit]), initial=0.0)), "chi_{u^-1(N)} du = 0"


def _sample_chain_rule_d(ctx, rng, trial):
    bp = ctx.space.breakpoints
    k = int(rng.integers(1, 5))
    ts = np.sort(rng.uniform(-2.0, 2.0, k + 1))
    phi = PiecewiseLinearMap.from_points(ts, rng.uniform(-2.0, 2.0, k + 1),
                                         rng.uniform(-2, 2), rng.uniform(-2, 2))
    return {"u": _rand_pl(rng, bp), "phi": phi}


def _eval_chain_rule_d(ctx, u, phi):
    M = _module(ctx)
    comp = compose_pl(phi, u)
    lhs = M.canonical_iso(M.differential(comp)).field
    du = M.canonical_iso(M.differential(u)).field.refine(lhs.breakpoints)
    ur = u.refine(lhs.breakpoints)
    factor = phi.derivative(ur.values_at(np.arange(ur.n_cells), ur.midpoints))
    rhs = CellField(lhs.breakpoints, du.coeffs * factor[:, None])
    return _rel(lhs, rhs), "d(phi o u) = phi'(u) du"


def _sample_leibniz_d(ctx, rng, trial):
    bp = ctx.space.breakpoints
    return {"u": _rand_field(rng, bp), "v": _rand_field(rng, bp)}


def _eval_leibniz_d(ctx, u, v):
    M = _module(ctx)
    lhs = M.canonical_iso(M.differential(cell_mul(u, v))).field
    du = M.canonical_iso(M.differential(u)).field
    dv = M.canonical_iso(M.differential(v)).field
    rhs = cell_add(cell_mul(u, dv), cell_mul(v, du)).as_cellfield()
    return _rel(lhs, rhs), "d(uv) = u dv + v du"


CALCULUS_D = ("null_preimage_d", "chain_rule_d", "leibniz_d")
SUITE = ("norm_identity", "module_identities", "well_posedness", "linearity_d",
         "uniqueness") + CALCULUS_D

for _name in SUITE:
    checker.register_property(_name, globals()[f"_sample_{_name}"],
                              globals()[f"_eval_{_name}"])


def cotangent_verify(grid: int = 64, p: float = 2.0, trials: int = 200, seed: int = 7,
                     structure="interval_derivative", closure_sequences: int = 20) -> dict:
    """The full cotangent suite on a uniform grid; ``name -> CheckReport``.

    Raises :class:`NotPointwiseLocalError` when the gate fails.
    """
    space = IntervalGridSpace.uniform(grid)
    M = CotangentModule(space, structure, p)
    reports = {"gate:" + k: r for k, r in M.gate.items()}
    for name in SUITE:
        reports[name] = checker.run_property(M.structure, space, name, trials, seed, p)
    reports["closure"] = M.closure_suite(closure_sequences, seed)
    return reports
