"""
Differentials on the interval as slope fields.

Run with ``python3 demos/cotangent_slopes.py``.
"""

import numpy as np

from dstruct import CotangentModule, IntervalGridSpace, pl_field
from dstruct.space import CellSet, PiecewiseLinearMap, SimpleField, cell_add, compose_pl

grid = IntervalGridSpace.uniform(4)
M = CotangentModule(grid)  # runs the L1-L5 checks once

# %% d of a hat function
hat = pl_field(grid.breakpoints, [0.0, 0.25, 0.5, 0.25, 0.0])
du = M.differential(hat)
print("slopes of d(hat):", M.canonical_iso(du).slopes)
print("|d(hat)|        :", M.pointwise_norm(du).coeffs[:, 0])
print("||d(hat)||_2    :", M.module_norm(du))

# %% Equivalence forgets constants, part by part
left = CellSet.interval(0.0, 0.5, grid.breakpoints)
right = CellSet.interval(0.5, 1.0, grid.breakpoints)
shifted = cell_add(hat, pl_field([0.0, 1.0], [3.0, 3.0]))
glued = type(du)(((left, hat), (right, shifted)))
print("glued ~ d(hat)?", M.equivalent(glued, du))

# %% Multiplying by a simple function
h = SimpleField(((left, 2.0), (right, -1.0)))
print("slopes of h d(hat):", M.canonical_iso(M.smul(h, du)).slopes)

# %% Chain rule with a kink
phi = PiecewiseLinearMap.absolute()
u = pl_field(grid.breakpoints, np.array([-1.0, -0.5, 0.0, 0.5, 1.0]))
print("slopes of d|u|:", M.canonical_iso(M.differential(compose_pl(phi, u))).slopes)
