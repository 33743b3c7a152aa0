"""
Minimal pseudo-gradients on small graphs.

Run with ``python3 demos/graph_gradients.py``.
"""

import numpy as np

from dstruct import dirichlet_energy, kkt_oracle, minimal_pseudo_gradient, membership
from dstruct.generators import cycle_graph, path_graph, star_graph
from dstruct.space import CellSet

# %% The two-vertex path
# One edge, so D[u] = {g >= 0 : g(a) + g(b) >= |u(a) - u(b)|}.
# With counting measure the cheapest way to pay for the jump is to split it.
p2 = path_graph(2)
u = np.array([0.0, 1.0])
res = minimal_pseudo_gradient(p2, "graph", u)
print("P2     Du =", np.round(res.g_star, 6), " E_2 =", round(res.energy, 6))

# (0.4, 0.4) is not enough, (1, 0) is, but it costs twice as much.
print("(0.4, 0.4) member?", bool(membership("graph", p2, u, [0.4, 0.4])))
print("(1.0, 0.0) member?", bool(membership("graph", p2, u, [1.0, 0.0])))

# %% A path with three vertices
# The middle vertex sits on both edges, so it carries twice the load.
p3 = path_graph(3)
u3 = np.array([0.0, 1.0, 2.0])
for kind in ("graph", "hajlasz"):
    res = minimal_pseudo_gradient(p3, kind, u3)
    exact = kkt_oracle(p3, kind, u3)
    print(f"P3 {kind:8s} Du = {np.round(res.g_star, 6)}  E_2 = {res.energy:.6f}"
          f"  (active-set oracle {exact.energy:.6f})")

# %% Other exponents and graphs
for name, space in (("star4", star_graph(4)), ("cycle5", cycle_graph(5))):
    v = np.random.default_rng(0).uniform(-2, 2, space.n)
    for p in (1.5, 2.0, 4.0):
        res = minimal_pseudo_gradient(space, "graph", v, p=p)
        print(f"{name:7s} p={p:<4} E_p = {res.energy:.6f}  sweeps = {res.iterations}")

# %% Energy on a subset
# Off B the integrand is free, so a function that is constant on B has zero energy
# on B even though its minimal pseudo-gradient does not vanish there.
B = CellSet.points([0])
print("E_2(u|{a}) on P2 =", dirichlet_energy(p2, "graph", [0.0, 5.0], B=B))
print("Du(a)            =", minimal_pseudo_gradient(p2, "graph", [0.0, 5.0]).g_star[0])
