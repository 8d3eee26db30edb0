"""
Unit Tests for the Convergent Engine
Recurrences, tails, approximant traces and the outside-circle limits
"""

from fractions import Fraction

import pytest

from services.bigarith import INFINITY, circle_point, is_infinite
from services.exceptions import PreconditionViolationError, ValidationError
from services.rrcf import (
    ConvergentPair,
    advance_to,
    classical_approximants,
    critical_tail,
    f1_evaluation,
    f1_series,
    f2_series,
    iter_pairs,
    odd_even_limits,
    pq_advance,
    realize,
    reciprocal_point,
    tail_modified,
    walk_to,
)

FIBONACCI = [1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144]


@pytest.mark.unit
class TestRecurrence:
    """Test the shared P/Q recurrence"""

    def test_initial_state(self, ctx):
        state = ConvergentPair.start(ctx.complex(1), ctx)
        assert (state.n, state.p, state.p_prev, state.q, state.q_prev) == (0, 1, 1, 1, 0)

    def test_denominators_at_one_are_fibonacci(self, ctx):
        for state, expected in zip(iter_pairs(ctx.complex(1), ctx), FIBONACCI):
            assert state.q == expected

    def test_approximant_at_one_is_fibonacci_ratio(self, ctx):
        state = advance_to(Fraction(1), 30, ctx)
        assert state.p == 2178309
        assert state.q == 1346269

    def test_walk_to_matches_repeated_steps(self, ctx):
        x = circle_point(Fraction(2, 7), ctx)
        state = ConvergentPair.start(x.value, ctx, x.angle)
        for _ in range(12):
            state = pq_advance(state)
        walked = walk_to(x.value, 12, ctx, x.angle)
        assert walked.p == state.p and walked.q == state.q

    def test_negative_index(self, ctx):
        with pytest.raises(ValidationError):
            walk_to(ctx.complex(1), -1, ctx)

    @pytest.mark.parametrize("angle", [Fraction(1, 3), Fraction(3, 11), Fraction(5, 17)])
    def test_determinant_has_modulus_one_on_the_circle(self, ctx, angle):
        x = circle_point(angle, ctx)
        for state in iter_pairs(x.value, ctx, x.angle):
            assert abs(abs(state.determinant()) - 1) < ctx.tolerance * 2 ** 16
            if state.n == 60:
                break

    def test_realize_rebuilds_circle_points(self, ctx):
        point = circle_point(Fraction(1, 5), ctx)
        value, angle = realize(point, ctx.doubled())
        assert angle == Fraction(1, 5)
        assert abs(value - point.value) < ctx.tolerance


@pytest.mark.unit
class TestTails:
    """Test tail-modified approximants and critical tails"""

    def test_critical_tails_at_one(self, ctx):
        h4 = critical_tail(walk_to(ctx.complex(1), 4, ctx))
        h5 = critical_tail(walk_to(ctx.complex(1), 5, ctx))
        assert abs(h4 - ctx.real(Fraction(5, 3))) < ctx.tolerance
        assert abs(h5 - ctx.real(Fraction(8, 5))) < ctx.tolerance

    def test_critical_tail_sends_approximant_to_infinity(self, ctx):
        state = walk_to(circle_point(Fraction(2, 9), ctx).value, 20, ctx)
        assert is_infinite(tail_modified(state, -critical_tail(state)))

    def test_zero_tail_is_the_approximant(self, ctx):
        state = walk_to(ctx.complex(1), 6, ctx)
        assert tail_modified(state, ctx.complex(0)) == state.approximant

    def test_infinite_tail_steps_back(self, ctx):
        state = walk_to(ctx.complex(1), 6, ctx)
        assert tail_modified(state, INFINITY) == state.p_prev / state.q_prev


@pytest.mark.unit
class TestClassicalApproximants:
    """Test approximant traces"""

    def test_trace_length_and_fifth_roots(self, ctx):
        trace = classical_approximants(circle_point(Fraction(1, 3), ctx), 30, ctx)
        assert len(trace.records) == 31
        assert trace.angle == Fraction(1, 3)
        assert all(record.r is not None for record in trace.records)
        assert trace.blowups == ()

    def test_vanishing_denominator_is_a_blowup(self, ctx):
        # x = i gives Q_2 = 1 + i^2 = 0
        trace = classical_approximants(circle_point(Fraction(1, 4), ctx), 6, ctx)
        assert [n for n, _ in trace.blowups] == [2]
        assert is_infinite(trace[2].k)
        assert is_infinite(trace[3].h)

    def test_points_off_the_circle_have_no_r(self, ctx):
        trace = classical_approximants(Fraction(1, 2), 10, ctx)
        assert all(record.r is None for record in trace.records)

    def test_n_must_be_positive(self, ctx):
        with pytest.raises(ValidationError):
            classical_approximants(Fraction(1, 2), 0, ctx)


@pytest.mark.unit
class TestOutsideCircle:
    """Test the parity limits of 1/K(1/x) for small |x|"""

    @pytest.mark.parametrize("x", [Fraction(1, 10), Fraction(-1, 20), (Fraction(0), Fraction(1, 10))])
    def test_parity_limits_match_the_series(self, ctx, x):
        limits = odd_even_limits(x, 120, ctx)
        assert limits.worpitsky
        assert limits.odd_error < ctx.real(Fraction(1, 10**15))
        assert limits.even_error < ctx.real(Fraction(1, 10**15))
        assert limits.gap > ctx.real(Fraction(1, 10**6))

    def test_flags_points_outside_the_separation_disk(self, ctx):
        limits = odd_even_limits(Fraction(3, 10), 60, ctx)
        assert limits.worpitsky is False
        assert limits.N == 60

    def test_zero_point(self, ctx):
        with pytest.raises(PreconditionViolationError):
            odd_even_limits(Fraction(0), 120, ctx)

    def test_odd_depth(self, ctx):
        with pytest.raises(PreconditionViolationError):
            odd_even_limits(Fraction(1, 10), 121, ctx)

    def test_f2_is_close_to_x_for_small_x(self, ctx):
        assert abs(f2_series(Fraction(1, 10), 40, ctx) - ctx.real(Fraction(1, 10))) < ctx.real(Fraction(1, 10**4))

    def test_series_at_zero(self, ctx):
        assert f1_series(Fraction(0), 10, ctx) == 1
        assert f2_series(Fraction(0), 10, ctx) == 0

    def test_series_converge_inside_the_disk(self, ctx):
        assert f1_evaluation(Fraction(1, 10), 60, ctx).converged

    def test_series_need_the_unit_disk(self, ctx):
        with pytest.raises(PreconditionViolationError):
            f1_evaluation(Fraction(3, 2), 10, ctx)

    def test_reciprocal_point(self):
        assert reciprocal_point((Fraction(0), Fraction(1, 10))) == (Fraction(0), Fraction(-10))
        assert reciprocal_point(Fraction(1, 20)) == 20
