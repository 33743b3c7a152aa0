"""
Minimal pseudo-gradients and p-Dirichlet energies.

For constraint bodies we minimise ``sum_x m(x) g(x)^p`` subject to
``A g >= b, g >= 0`` by exact coordinate ascent on the Lagrange dual, one
constraint multiplier at a time (Hildreth's scheme, generalised to ``p != 2``).
Given multipliers ``lam`` the primal minimiser is explicit,

    g(x) = (max(s_x, 0) / (p m(x)))^(1/(p-1)),     s = A^T lam,

so every iterate is a nonnegative field and the duality gap is available in
closed form.  :func:`kkt_oracle` is an independent exact route for ``p = 2``
that enumerates active sets.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .space import CellField, CellSet, lp_norm
from .structures import LinearConstraints, PointwiseLowerBound, describe

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200_000
ORACLE_MAX_CONSTRAINTS = 12


class InstanceTooLargeError(ValueError):
    pass


@dataclass
class MinimizationResult:
    g_star: object
    energy: float
    iterations: int = 0
    residuals: dict = field(default_factory=dict)
    converged: bool = True
    seed: int | None = None

    def to_json(self) -> dict:
        g = self.g_star
        g = g.to_json() if isinstance(g, CellField) else np.asarray(g).tolist()
        return {"g_star": g, "energy": self.energy, "iterations": self.iterations,
                "residuals": self.residuals, "converged": self.converged,
                "seed": self.seed}


def _check_exponent(p):
    if not (np.isfinite(p) and p > 1):
        raise ValueError(f"minimal pseudo-gradients need p in (1, inf), got {p}")


# ---------------------------------------------------------------------------
# dual coordinate ascent
# ---------------------------------------------------------------------------


def _primal(s, m, p):
    return (np.maximum(s, 0.0) / (p * m)) ** (1.0 / (p - 1.0))


def _root_quadratic(s0, c, m, b):
    # p = 2: r(t) = sum c_i max(s0_i + c_i t, 0) / (2 m_i) - b is piecewise
    # linear and increasing; walk its kinks
    kinks = sorted((-s0[i] / c[i], i) for i in range(len(c)) if s0[i] <= 0)
    active = [i for i in range(len(c)) if s0[i] > 0]
    lo = 0.0
    for t_kink, i in kinks + [(math.inf, None)]:
        if t_kink <= lo and i is not None:
            active.append(i)
            continue
        if active:
            slope = sum(c[k] * c[k] / (2.0 * m[k]) for k in active)
            base = sum(c[k] * s0[k] / (2.0 * m[k]) for k in active)
            t = (b - base) / slope
            if t <= t_kink:
                return max(t, lo)
        if i is None:
            break
        lo = t_kink
        active.append(i)
    raise RuntimeError("no root for the coordinate update")  # pragma: no cover


def _root_general(s0, c, m, p, b):
    q = 1.0 / (p - 1.0)

    def r_and_dr(t):
        val, der = -b, 0.0
        for k in range(len(c)):
            s = s0[k] + c[k] * t
            if s > 0:
                base = s / (p * m[k])
                val += c[k] * base ** q
                der += c[k] * c[k] * q * base ** (q - 1.0) / (p * m[k])
        return val, der

    lo, hi = 0.0, 1.0
    while r_and_dr(hi)[0] < 0:
        lo, hi = hi, 2.0 * hi
    t = hi
    for _ in range(200):
        val, der = r_and_dr(t)
        if val > 0:
            hi = t
        else:
            lo = t
        if abs(val) <= 1e-15 * max(1.0, b) or hi - lo <= 1e-16 * max(1.0, hi):
            break
        nt = t - val / der if der > 0 else 0.5 * (lo + hi)
        t = nt if lo < nt < hi else 0.5 * (lo + hi)
    return t


def _dual_ascent(body: LinearConstraints, m, p, tol, max_iter, seed):
    n, K = body.n, body.n_constraints
    m = np.asarray(m, dtype=float)
    if K == 0 or not np.any(body.bounds > 0):
        return np.zeros(n), 0, {"max_violation": 0.0, "duality_gap": 0.0}, True

    rows = [(idx.tolist(), coef.tolist()) for idx, coef in body.supports]
    bounds = body.bounds.tolist()
    ml = m.tolist()
    A = body.matrix()
    lam = [0.0] * K
    s = [0.0] * n
    rng = np.random.default_rng(seed)
    bscale = max(1.0, max(bounds))
    quadratic = p == 2

    it, converged, viol, gap, step = 0, False, math.inf, math.inf, math.inf
    g_prev = np.zeros(n)
    while it < max_iter:
        it += 1
        for k in rng.permutation(K).tolist():
            idx, coef = rows[k]
            lk = lam[k]
            s0 = [s[i] - coef[j] * lk for j, i in enumerate(idx)]
            mk = [ml[i] for i in idx]
            # is the constraint met with this multiplier switched off?
            if quadratic:
                r0 = sum(coef[j] * max(s0[j], 0.0) / (2.0 * mk[j])
                         for j in range(len(idx))) - bounds[k]
            else:
                r0 = sum(coef[j] * (max(s0[j], 0.0) / (p * mk[j])) ** (1.0 / (p - 1.0))
                         for j in range(len(idx))) - bounds[k]
            if r0 >= 0:
                t = 0.0
            elif quadratic:
                t = _root_quadratic(s0, coef, mk, bounds[k])
            else:
                t = _root_general(s0, coef, mk, p, bounds[k])
            lam[k] = t
            for j, i in enumerate(idx):
                s[i] = s0[j] + coef[j] * t

        sv = np.array(s)
        g = _primal(sv, m, p)
        viol = float(np.max(body.bounds - A @ g, initial=0.0))
        primal = float(np.sum(m * g ** p))
        dual = float(np.dot(body.bounds, lam) - (1.0 - 1.0 / p) * np.dot(np.maximum(sv, 0.0), g))
        gap = primal - dual
        step = float(np.max(np.abs(g - g_prev)))
        g_prev = g
        # the gap alone only controls g to O(sqrt(tol)); also wait for the
        # iterates to settle
        if (viol <= tol * bscale and abs(gap) <= tol * max(primal, tol)
                and step <= tol * max(1.0, float(np.max(g)))):
            converged = True
            break
    g = _primal(np.array(s), m, p)
    return g, it, {"max_violation": viol, "duality_gap": gap, "last_step": step}, converged


def _solve_body(body, weights, p, tol, max_iter, seed) -> MinimizationResult:
    if isinstance(body, PointwiseLowerBound):
        return None
    g, it, res, ok = _dual_ascent(body, weights, p, tol, max_iter, seed)
    energy = float(np.sum(np.asarray(weights) * g ** p))
    return MinimizationResult(g, energy, it, res, ok, seed)


def minimal_pseudo_gradient(space, structure, u, p: float = 2.0, tol: float = DEFAULT_TOL,
                            max_iter: int = DEFAULT_MAX_ITER, seed: int = 0
                            ) -> MinimizationResult:
    """The unique ``g`` in ``D[u]`` of least ``L^p`` norm, and its energy."""
    _check_exponent(p)
    body = describe(structure, space, u)
    if isinstance(body, PointwiseLowerBound):
        floor = body.floor
        energy = lp_norm(space, floor, p) ** p
        return MinimizationResult(floor, energy, 0,
                                  {"max_violation": 0.0, "duality_gap": 0.0}, True, seed)
    return _solve_body(body, space.weights, p, tol, max_iter, seed)


# ---------------------------------------------------------------------------
# exact oracle
# ---------------------------------------------------------------------------


def kkt_oracle(space, structure, u, p: float = 2.0) -> MinimizationResult:
    """Exact minimiser for ``p = 2`` by enumerating active constraint sets.

    For each linearly independent active set ``S`` the equality-constrained
    problem has the closed form ``g = M^-1 A_S^T lam / 2`` with
    ``(A_S M^-1 A_S^T / 2) lam = b_S``.  Candidates that are primal feasible
    with ``lam >= 0`` satisfy KKT; the cheapest one is returned.  The sign
    constraint ``g >= 0`` is never active because ``A >= 0``.
    """
    if p != 2:
        raise ValueError("the KKT oracle is exact for p = 2 only")
    body = describe(structure, space, u)
    if not isinstance(body, LinearConstraints):
        raise ValueError("the KKT oracle needs a constraint-described structure")
    K, n = body.n_constraints, body.n
    if K > ORACLE_MAX_CONSTRAINTS:
        raise InstanceTooLargeError(
            f"{K} constraints exceed the oracle limit of {ORACLE_MAX_CONSTRAINTS}")
    A, b = body.matrix(), body.bounds
    minv = 1.0 / np.asarray(space.weights, dtype=float)
    lin_tol = 1e-12 * max(1.0, float(np.max(b, initial=0.0)))

    best, best_energy, tried = None, math.inf, 0
    for size in range(0, min(K, n) + 1):
        for S in itertools.combinations(range(K), size):
            tried += 1
            S = list(S)
            if size == 0:
                g = np.zeros(n)
                lam = np.empty(0)
            else:
                AS = A[S]
                if np.linalg.matrix_rank(AS) < size:
                    continue
                gram = 0.5 * (AS * minv) @ AS.T
                lam = np.linalg.solve(gram, b[S])
                g = 0.5 * minv * (AS.T @ lam)
            if np.any(lam < -lin_tol) or np.any(A @ g < b - lin_tol):
                continue
            energy = float(np.sum(space.weights * g ** 2))
            if energy < best_energy:
                best, best_energy = g, energy
    return MinimizationResult(best, best_energy, tried,
                              {"max_violation": float(np.max(b - A @ best, initial=0.0)),
                               "duality_gap": 0.0}, True, None)


# ---------------------------------------------------------------------------
# energies and norms
# ---------------------------------------------------------------------------


def restricted_minimizer(space, structure, u, p: float, B: CellSet | None = None,
                         tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                         seed: int = 0):
    """``(E_p(u|B), g)`` with ``g`` in ``D[u]`` attaining the infimum.

    Off ``B`` the integrand is free.  A row whose support leaves ``B`` can be
    met by raising an off-``B`` variable, so only rows supported inside ``B``
    constrain the energy; off-``B`` values are then set to the cheapest value
    meeting every remaining row on their own.  The minimiser off ``B`` is not
    unique and only the energy is meaningful.
    """
    _check_exponent(p)
    body = describe(structure, space, u)
    if isinstance(body, PointwiseLowerBound):
        floor = body.floor
        energy = lp_norm(space, floor, p, B) ** p
        return energy, floor
    n = body.n
    inside = np.ones(n, dtype=bool) if B is None else B.mask(n)
    where = np.nonzero(inside)[0]
    pos = -np.ones(n, dtype=int)
    pos[where] = np.arange(where.size)

    rows, bounds, labels, outer = [], [], [], []
    for (idx, coef), bk, lab in zip(body.supports, body.bounds, body.labels):
        if np.all(inside[idx]):
            rows.append((pos[idx], coef))
            bounds.append(bk)
            labels.append(lab)
        else:
            outer.append((idx, coef, bk))
    reduced = LinearConstraints(where.size, tuple(rows), np.array(bounds, dtype=float),
                                tuple(labels))
    res = _solve_body(reduced, np.asarray(space.weights)[where], p, tol, max_iter, seed)
    g = np.zeros(n)
    g[where] = res.g_star
    for idx, coef, bk in outer:
        for i, c in zip(idx, coef):
            if not inside[i]:
                g[i] = max(g[i], bk / c)
    return res.energy, g


def dirichlet_energy(space, structure, u, p: float = 2.0, B: CellSet | None = None,
                     tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                     seed: int = 0) -> float:
    """``E_p(u|B) = inf { int_B g^p dm : g in D[u] }``."""
    return restricted_minimizer(space, structure, u, p, B, tol, max_iter, seed)[0]


def sobolev_norm(space, structure, u, p: float = 2.0, **opts) -> float:
    """``(||u||_p^p + E_p(u))^(1/p)``."""
    _check_exponent(p)
    return (lp_norm(space, u, p) ** p + dirichlet_energy(space, structure, u, p, **opts)) \
        ** (1.0 / p)
