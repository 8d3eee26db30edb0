"""
Unit Tests for Roots of Unity
Closed-form K and R values, boundary values, Fibonacci blocks and limit classes
"""

import pytest

from services.bigarith import is_infinite
from services.exceptions import (
    PreconditionViolationError,
    ValidationError,
    WrongResidueClassError,
)
from services.rrcf import walk_to
from services.schur import (
    RootOfUnity,
    binet_coefficients,
    block_fibonacci,
    block_identities,
    block_limit,
    block_step,
    boundary_quad,
    general_limit_class,
    legendre5,
    primitive_roots,
    r_catalog,
    r_from_residues,
    recursed_quad,
    residue_representative,
    schur_catalog,
    schur_eval,
)

SMALL_ORDERS = [1, 2, 3, 4, 6, 7, 8, 9, 11, 12, 13]


@pytest.mark.unit
class TestRoots:
    """Test root-of-unity bookkeeping"""

    def test_primitive_roots(self):
        assert primitive_roots(1) == [RootOfUnity(0, 1)]
        assert [root.k for root in primitive_roots(6)] == [1, 5]
        assert len(primitive_roots(5)) == 4

    def test_invalid_numerator(self):
        with pytest.raises(ValidationError):
            RootOfUnity(3, 3)

    def test_angle_one_is_allowed(self):
        assert RootOfUnity(1, 1).primitive

    @pytest.mark.parametrize("m, expected", [(1, 1), (2, -1), (3, -1), (4, 1), (6, 1), (12, -1)])
    def test_legendre5(self, m, expected):
        assert legendre5(m) == expected

    def test_legendre5_undefined_at_multiples_of_five(self):
        with pytest.raises(WrongResidueClassError):
            legendre5(10)


@pytest.mark.unit
class TestSchurEvaluation:
    """Test the closed form of K and R at primitive roots"""

    def test_k_at_one_is_phi(self, ctx):
        value = schur_eval(RootOfUnity(0, 1), ctx)
        assert abs(value.k_value - ctx.phi) < ctx.tolerance
        assert value.r_index == 10

    def test_k_at_minus_one(self, ctx):
        value = schur_eval(RootOfUnity(1, 2), ctx)
        assert value.exponent == 1
        assert abs(value.k_value - 1 / ctx.phi) < ctx.tolerance

    @pytest.mark.parametrize("m", SMALL_ORDERS)
    def test_closed_form_matches_recurrence(self, ctx, m):
        bound = 1 / ctx.phi ** 78
        for root in primitive_roots(m):
            point = root.point(ctx)
            state = walk_to(point.value, 41 * m - 1, ctx, point.angle)
            assert abs(state.p / state.q - schur_eval(root, ctx).k_value) <= bound

    def test_r_lands_on_the_catalog(self, ctx):
        for root in primitive_roots(7):
            value = schur_eval(root, ctx)
            assert abs(value.r_value - r_catalog(value.r_index, ctx)) < ctx.tolerance * 16

    def test_non_primitive_root(self, ctx):
        with pytest.raises(PreconditionViolationError):
            schur_eval(RootOfUnity(2, 4), ctx)

    def test_multiple_of_five(self, ctx):
        with pytest.raises(WrongResidueClassError):
            schur_eval(RootOfUnity(1, 5), ctx)

    def test_catalog(self, ctx):
        rows = schur_catalog(10, ctx)
        assert len(rows) == 24
        assert all(row.root.m % 5 for row in rows)
        assert abs(rows[0].k_value - ctx.phi) < ctx.tolerance

    def test_catalog_index_range(self, ctx):
        with pytest.raises(ValidationError):
            r_catalog(11, ctx)


@pytest.mark.unit
class TestBoundaryValues:
    """Test the boundary quadruple at n = m - 2, m - 1"""

    @pytest.mark.parametrize("m", range(2, 31))
    def test_closed_form_matches_recurrence(self, ctx, m):
        tolerance = ctx.mp.ldexp(1, -200)
        for root in primitive_roots(m):
            closed = boundary_quad(root, ctx).as_tuple()
            direct = recursed_quad(root, ctx).as_tuple()
            assert max(abs(a - b) for a, b in zip(closed, direct)) <= tolerance

    @pytest.mark.parametrize("k, m", [(1, 3), (2, 7), (1, 10)])
    def test_block_step_matches_recurrence(self, ctx, k, m):
        root = RootOfUnity(k, m)
        quad = boundary_quad(root, ctx)
        point = root.point(ctx)
        for n in range(m, 3 * m):
            back = walk_to(point.value, n - m, ctx, point.angle)
            ahead = walk_to(point.value, n, ctx, point.angle)
            p, q = block_step(quad, (back.p, back.q))
            assert abs(p - ahead.p) < ctx.tolerance * 2 ** 8
            assert abs(q - ahead.q) < ctx.tolerance * 2 ** 8

    def test_needs_order_two(self, ctx):
        with pytest.raises(PreconditionViolationError):
            boundary_quad(RootOfUnity(0, 1), ctx)

    @pytest.mark.parametrize("m", [2, 3, 4, 6, 7, 9])
    def test_block_identities(self, ctx, m):
        for root in primitive_roots(m):
            residuals = block_identities(root, ctx)
            assert all(value < ctx.tolerance * 16 for value in residuals.values())


@pytest.mark.unit
class TestFibonacciBlocks:
    """Test Fibonacci growth across blocks of m"""

    @pytest.mark.parametrize("q, r", [(0, 3), (1, 0), (4, 3), (7, 6)])
    def test_block_matches_walk(self, ctx, q, r):
        root = RootOfUnity(2, 7)
        p, q_value = block_fibonacci(root, q, r, ctx)
        point = root.point(ctx)
        state = walk_to(point.value, q * 7 + r, ctx, point.angle)
        assert abs(p - state.p) < ctx.tolerance * 2 ** 12
        assert abs(q_value - state.q) < ctx.tolerance * 2 ** 12

    def test_block_needs_residue_in_range(self, ctx):
        with pytest.raises(ValidationError):
            block_fibonacci(RootOfUnity(1, 7), 2, 7, ctx)

    @pytest.mark.parametrize("m", [1, 2, 3, 4, 6, 7])
    def test_block_limit_matches_closed_form(self, ctx, m):
        for root in primitive_roots(m):
            assert abs(block_limit(root, ctx) - schur_eval(root, ctx).k_value) < ctx.tolerance * 2 ** 8

    def test_binet_prediction(self, ctx):
        root = RootOfUnity(1, 6)
        coefficients = binet_coefficients(root, 4, ctx)
        point = root.point(ctx)
        state = walk_to(point.value, 9 * 6 + 4, ctx, point.angle)
        assert abs(coefficients.predict(9) - state.q) < ctx.tolerance * 2 ** 16


@pytest.mark.unit
class TestGeneralLimits:
    """Test the limit classification at 5m-th roots"""

    @pytest.mark.parametrize("k, m, to_zero", [(1, 5, False), (2, 5, True), (3, 5, True),
                                               (4, 5, False), (3, 10, True), (7, 10, True),
                                               (9, 10, False)])
    def test_quadrant_decides_the_limit(self, ctx, k, m, to_zero):
        limit_class = general_limit_class(RootOfUnity(k, m), ctx)
        assert limit_class.tends_to_zero is to_zero
        assert is_infinite(limit_class.limit) is not to_zero
        assert limit_class.w - limit_class.v == 1

    def test_needs_multiple_of_five(self, ctx):
        with pytest.raises(WrongResidueClassError):
            general_limit_class(RootOfUnity(1, 7), ctx)


@pytest.mark.unit
class TestResidueTargets:
    """Test the catalog index reached from residues of c/d modulo 5"""

    @pytest.mark.parametrize("r, s, expected", [(1, 1, (1, 1)), (3, 4, (3, 4)), (0, 1, (0, 1)),
                                                (2, 2, (2, 7)), (4, 1, (4, 11))])
    def test_representative(self, r, s, expected):
        assert residue_representative(r, s) == expected

    def test_targets(self, ctx):
        assert r_from_residues(1, 1, ctx) == 6
        assert r_from_residues(3, 4, ctx) == 7

    def test_denominator_divisible_by_five(self, ctx):
        assert r_from_residues(1, 0, ctx) is None
