"""Standard graphs and grids, all with counting measure unless stated."""

from __future__ import annotations

import itertools

import numpy as np

from .space import FiniteMetricSpace, IntervalGridSpace


def path_graph(n: int) -> FiniteMetricSpace:
    return FiniteMetricSpace.from_graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> FiniteMetricSpace:
    if n < 3:
        raise ValueError("a cycle needs at least 3 vertices")
    return FiniteMetricSpace.from_graph(n, [(i, (i + 1) % n) for i in range(n)])


def star_graph(n: int) -> FiniteMetricSpace:
    """Vertex 0 joined to vertices ``1 .. n-1``."""
    return FiniteMetricSpace.from_graph(n, [(0, i) for i in range(1, n)])


def complete_graph(n: int) -> FiniteMetricSpace:
    return FiniteMetricSpace.from_graph(n, list(itertools.combinations(range(n), 2)))


def grid_graph(rows: int, cols: int) -> FiniteMetricSpace:
    idx = lambda r, c: r * cols + c  # noqa: E731
    edges = [(idx(r, c), idx(r, c + 1)) for r in range(rows) for c in range(cols - 1)]
    edges += [(idx(r, c), idx(r + 1, c)) for r in range(rows - 1) for c in range(cols)]
    return FiniteMetricSpace.from_graph(rows * cols, edges)


def random_geometric_graph(n: int, radius: float, seed: int) -> FiniteMetricSpace:
    """Points uniform in the unit square, joined when closer than ``radius``.

    The result may be disconnected; :func:`validate_space` reports that as
    infinite distances.
    """
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    edges = [(i, j) for i, j in itertools.combinations(range(n), 2)
             if np.hypot(*(pts[i] - pts[j])) < radius]
    return FiniteMetricSpace.from_graph(n, edges)


def random_connected_graph(n: int, rng: np.random.Generator,
                           extra_edge_prob: float = 0.3) -> FiniteMetricSpace:
    """Random spanning tree plus independent extra edges."""
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(k)])
        edges.add((min(a, b), max(a, b)))
    for i, j in itertools.combinations(range(n), 2):
        if (i, j) not in edges and rng.random() < extra_edge_prob:
            edges.add((i, j))
    return FiniteMetricSpace.from_graph(n, sorted(edges))


def small_connected_family(max_vertices: int = 5):
    """Paths, cycles, stars and complete graphs on ``2 .. max_vertices`` vertices.

    Duplicates (P2 = S2 = K2, S3 = P3, C3 = K3) are dropped.
    """
    out = {}
    seen = set()
    for n in range(2, max_vertices + 1):
        cands = [("path", path_graph(n)), ("star", star_graph(n)),
                 ("complete", complete_graph(n))]
        if n >= 3:
            cands.insert(1, ("cycle", cycle_graph(n)))
        for name, g in cands:
            key = _canonical_edges(n, g.edges)
            if key in seen:
                continue
            seen.add(key)
            out[f"{name}{n}"] = g
    return out


def _canonical_edges(n, edges):
    # brute-force canonical form, fine for n <= 6
    best = None
    for perm in itertools.permutations(range(n)):
        e = tuple(sorted(tuple(sorted((perm[i], perm[j]))) for i, j in edges))
        if best is None or e < best:
            best = e
    return n, best


def random_interval_grid(n_cells: int, rng: np.random.Generator,
                         min_gap: float = 1e-3) -> IntervalGridSpace:
    """Random breakpoints ``0 < t_1 < ... < 1`` with cells at least ``min_gap`` long."""
    while True:
        inner = np.sort(rng.random(n_cells - 1))
        bp = np.concatenate([[0.0], inner, [1.0]])
        if np.all(np.diff(bp) >= min_gap):
            return IntervalGridSpace(bp)
