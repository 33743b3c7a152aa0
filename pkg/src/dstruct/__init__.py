"""
Sobolev D-structures on finite metric measure spaces and on ``[0, 1]``.

A D-structure assigns to each function ``u`` a convex family ``D[u]`` of
nonnegative pseudo-gradients.  This package provides concrete structures
(graph, Hajlasz, interval derivative, trivial), a solver for the minimal
pseudo-gradient ``Du`` and the energies built from it, a seeded property
checker for the axioms and locality conditions, and the cotangent module of a
pointwise local structure.
"""

__version__ = "0.1.0"

from .space import (  # noqa: E402
    TAU_EQ,
    CellField,
    CellSet,
    FiniteMetricSpace,
    IntervalGridSpace,
    PiecewiseLinearMap,
    PiecewisePolyField,
    ScalarField,
    SimpleField,
    compose_pl,
    field_combine,
    lipschitz_constant,
    lp_norm,
    pl_field,
    poly_field,
    validate_space,
)
from .structures import (  # noqa: E402
    GRAPH,
    HAJLASZ,
    INTERVAL_DERIVATIVE,
    TRIVIAL,
    DStructureDescriptor,
    IncompatibleStructureError,
    LinearConstraints,
    NotPointwiseLocalError,
    PointwiseLowerBound,
    describe,
    floor_of,
    membership,
)
from .solver import (  # noqa: E402
    MinimizationResult,
    dirichlet_energy,
    kkt_oracle,
    minimal_pseudo_gradient,
    restricted_minimizer,
    sobolev_norm,
)
from .checker import (  # noqa: E402
    AuditReport,
    CheckReport,
    audit_implications,
    check_axiom,
    check_calculus_Du,
    check_locality,
    recheck,
    reproduce_counterexample,
)
from .cotangent import (  # noqa: E402
    CotangentElement,
    CotangentModule,
    PcmElement,
    cotangent_verify,
)
