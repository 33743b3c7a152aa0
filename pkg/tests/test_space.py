import math

import numpy as np
import pytest

from dstruct.space import (
    CellField,
    CellSet,
    DegreeOverflowError,
    FiniteMetricSpace,
    IntervalGridSpace,
    NotPiecewiseLinearError,
    PiecewiseLinearMap,
    PiecewisePolyField,
    SimpleField,
    cell_mul,
    compose_pl,
    field_abs,
    field_combine,
    lipschitz_constant,
    lp_norm,
    merge_breakpoints,
    pl_field,
    poly_field,
    positive_indicator,
    validate_space,
)


class TestValidate:
    def test_p2_is_valid(self, p2):
        assert validate_space(p2) == []

    def test_triangle_violation(self):
        d = [[0, 1, 3], [1, 0, 1], [3, 1, 0]]
        space = FiniteMetricSpace(np.array(d, float), np.ones(3))
        problems = validate_space(space)
        assert any("triangle" in m for m in problems)

    def test_zero_weight(self):
        space = FiniteMetricSpace(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([1.0, 0.0]))
        assert any("weight" in m for m in validate_space(space))

    def test_interval_grid(self):
        assert validate_space(IntervalGridSpace.uniform(4)) == []

    def test_disconnected_graph(self):
        space = FiniteMetricSpace.from_graph(3, [(0, 1)])
        assert any("non-finite" in m for m in validate_space(space))


class TestLipschitz:
    def test_p2(self, p2):
        assert lipschitz_constant(p2, [0.0, 1.0]) == 1.0

    def test_p3_exhaustive(self, p3):
        assert lipschitz_constant(p3, [0.0, 1.0, 3.0]) == 2.0

    def test_constant(self, p3):
        assert lipschitz_constant(p3, [4.0, 4.0, 4.0]) == 0.0

    def test_interval_hat(self, halves, hat):
        assert lipschitz_constant(halves, hat) == pytest.approx(1.0)


class TestLpNorm:
    def test_euclidean(self, p2):
        assert lp_norm(p2, [3.0, 4.0], 2) == pytest.approx(5.0)

    def test_zero(self, p3):
        assert lp_norm(p3, np.zeros(3), 3) == 0.0

    def test_identity_on_unit(self, unit, identity_field):
        assert lp_norm(unit, identity_field, 2) == pytest.approx(1 / math.sqrt(3), abs=1e-12)

    def test_subset(self, unit, identity_field):
        B = CellSet.interval(0.0, 0.5)
        # int_0^1/2 x^2 = 1/24
        assert lp_norm(unit, identity_field, 2, B) == pytest.approx(math.sqrt(1 / 24))

    def test_non_integer_exponent(self, unit, identity_field):
        # int_0^1 x^1.5 = 1/2.5
        assert lp_norm(unit, identity_field, 1.5) == pytest.approx(0.4 ** (1 / 1.5), rel=1e-9)

    def test_quadratic_fast_path_matches_general(self):
        f = pl_field([0.0, 0.3, 1.0], [1.0, -2.0, 0.5])
        g = CellField(f.breakpoints, np.c_[f.coeffs, np.zeros(2)])  # same field, wider
        assert lp_norm(None, f, 2) == pytest.approx(lp_norm(None, g, 2), rel=1e-12)

    def test_invalid_p(self, p2):
        with pytest.raises(ValueError):
            lp_norm(p2, [1.0, 1.0], 0.5)


class TestCombine:
    def test_max_finite(self):
        assert field_combine(np.array([0.0, 1.0]), np.array([1.0, 0.0]), "max").tolist() == [1, 1]

    def test_min_crossing(self, identity_field):
        v = pl_field([0.0, 1.0], [1.0, 0.0])
        m = field_combine(identity_field, v, "min")
        assert m.breakpoints.tolist() == [0.0, 0.5, 1.0]
        assert m([0.0, 0.5, 1.0]).tolist() == pytest.approx([0.0, 0.5, 0.0])

    def test_scale(self):
        assert field_combine(np.array([0.0, 1.0]), None, "scale", -2.0).tolist() == [0, -2]

    def test_max_needs_pl(self):
        q = poly_field([0.0, 1.0], [[0.0, 0.0, 1.0]])
        with pytest.raises(NotPiecewiseLinearError):
            field_combine(q, q, "max")

    def test_degree_overflow(self):
        q = poly_field([0.0, 1.0], [[0.0] * 5 + [1.0]])
        with pytest.raises(DegreeOverflowError):
            cell_mul(q, q)

    def test_product_of_linear_fields(self, identity_field):
        v = pl_field([0.0, 1.0], [1.0, 0.0])
        uv = cell_mul(identity_field, v)
        assert uv.coeffs[0].tolist() == pytest.approx([0.0, 1.0, -1.0])

    def test_product_with_zero_cell(self):
        # trailing zero coefficients must not make the rows ragged
        u = pl_field([0.0, 0.5, 1.0], [0.0, 0.0, 1.0])
        assert cell_mul(u, u).coeffs.shape == (2, 3)


class TestCompose:
    def test_identity(self, hat):
        assert compose_pl(PiecewiseLinearMap.identity(), hat).allclose(hat)

    def test_absolute_value(self):
        u = pl_field([0.0, 1.0], [-0.5, 0.5])
        c = compose_pl(PiecewiseLinearMap.absolute(), u)
        assert c.breakpoints.tolist() == [0.0, 0.5, 1.0]
        assert c.derivative().coeffs[:, 0].tolist() == pytest.approx([-1.0, 1.0])

    def test_affine_on_finite(self):
        phi = PiecewiseLinearMap.affine(2.0, 3.0)
        assert compose_pl(phi, np.array([0.0, 1.0])).tolist() == [3.0, 5.0]

    def test_from_points_continuity(self):
        phi = PiecewiseLinearMap.from_points([-1.0, 0.0, 2.0], [1.0, 0.0, 4.0])
        assert phi([-1.0, 0.0, 1.0, 2.0]).tolist() == pytest.approx([1.0, 0.0, 2.0, 4.0])
        assert phi.lipschitz == pytest.approx(2.0)

    def test_discontinuous_map_rejected(self):
        with pytest.raises(ValueError):
            PiecewiseLinearMap([0.0], [1.0, 1.0], [0.0, 1.0])


class TestFields:
    def test_continuity_enforced(self):
        with pytest.raises(ValueError):
            PiecewisePolyField([0.0, 0.5, 1.0], [[0.0, 1.0], [1.0, 0.0]])

    def test_refine_preserves_values(self, hat):
        r = hat.refine([0.0, 0.25, 0.5, 0.75, 1.0])
        xs = np.linspace(0, 1, 17)
        assert r(xs) == pytest.approx(hat(xs))

    def test_field_abs_splits_at_root(self):
        u = pl_field([0.0, 1.0], [-1.0, 1.0])
        a = field_abs(u)
        assert a.breakpoints.tolist() == [0.0, 0.5, 1.0]
        assert a([0.0, 0.25, 0.75]).tolist() == pytest.approx([1.0, 0.5, 0.5])

    def test_positive_indicator_zero_cells(self):
        u = pl_field([0.0, 0.5, 1.0], [0.0, 0.0, 1.0])
        chi = positive_indicator(u)
        assert chi.coeffs[:, 0].tolist() == [0.0, 1.0]

    def test_merge_snaps_near_duplicates(self):
        bp = merge_breakpoints([0.0, 0.5, 1.0], [0.5 + 1e-14])
        assert bp.tolist() == [0.0, 0.5, 1.0]


class TestSets:
    def test_interval_and_complement(self):
        B = CellSet.interval(0.0, 0.5, [0.0, 1.0])
        assert B.measure() == pytest.approx(0.5)
        assert B.complement(None).measure() == pytest.approx(0.5)

    def test_intersection_on_different_grids(self):
        A = CellSet.interval(0.0, 0.6)
        B = CellSet.interval(0.4, 1.0)
        assert A.intersect(B).measure() == pytest.approx(0.2)

    def test_simple_field_partition(self, halves):
        left = CellSet.cells(halves.breakpoints, [0])
        h = SimpleField(((left, 2.0),))
        assert "parts do not cover the space" in h.check_partition(halves)
