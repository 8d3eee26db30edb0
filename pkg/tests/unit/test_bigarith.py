"""
Unit Tests for Arbitrary-Precision Arithmetic
Precision contexts, circle points, golden powers and the chordal metric
"""

from fractions import Fraction

import pytest

from services.bigarith import (
    INFINITY,
    PrecisionContext,
    at_least_phi_power,
    binet_fibonacci,
    chordal_distance,
    circle_point,
    doubling_check,
    ensure_agreement,
    fifth_root,
    format_int,
    golden_powers,
    phi_power_ceiling,
    scaled_phi_power_ceiling,
    unit_point,
)
from services.exceptions import (
    CapExceededError,
    MissingAngleError,
    PrecisionTooLowError,
    ValidationError,
)


@pytest.mark.unit
class TestPrecisionContext:
    """Test PrecisionContext construction and derived values"""

    def test_rejects_low_precision(self):
        with pytest.raises(ValidationError):
            PrecisionContext(bits=32)

    def test_rejects_guard_bits_above_precision(self):
        with pytest.raises(ValidationError):
            PrecisionContext(bits=128, guard_bits=128)

    def test_contexts_do_not_share_precision(self):
        low = PrecisionContext(bits=64)
        high = PrecisionContext(bits=512)
        assert low.mp.prec == 64
        assert high.mp.prec == 512
        assert low.mp is not high.mp

    def test_doubled_keeps_guard_bits(self, ctx):
        doubled = ctx.doubled()
        assert doubled.bits == 512
        assert doubled.guard_bits == ctx.guard_bits

    def test_tolerance(self, ctx):
        assert ctx.tolerance == ctx.mp.ldexp(1, -224)

    def test_phi_satisfies_its_quadratic(self, ctx):
        assert abs(ctx.phi ** 2 - ctx.phi - 1) < ctx.tolerance
        assert abs(ctx.phi + ctx.phi_bar - 1) < ctx.tolerance
        assert abs(ctx.phi * ctx.phi_bar + 1) < ctx.tolerance

    def test_from_settings(self, monkeypatch):
        from config.settings import reset_settings

        monkeypatch.setenv("RRLAB_PRECISION_BITS", "320")
        reset_settings()
        assert PrecisionContext.from_settings().bits == 320


@pytest.mark.unit
class TestAgreement:
    """Test the doubled-precision agreement contract"""

    def test_agreeing_values_pass(self, ctx):
        ensure_agreement(ctx.real(1) / 3, ctx.doubled().real(1) / 3, ctx, "third")

    def test_disagreeing_values_raise(self, ctx):
        with pytest.raises(PrecisionTooLowError):
            ensure_agreement(ctx.real(1), ctx.doubled().real(1) + ctx.doubled().real(Fraction(1, 10**20)),
                             ctx, "one")

    def test_doubling_check_returns_working_value(self, ctx):
        value = doubling_check(lambda c: c.mp.sqrt(2), ctx, "sqrt2")
        assert abs(value ** 2 - 2) < ctx.tolerance


@pytest.mark.unit
class TestCirclePoints:
    """Test unit-circle points and the fifth-root branch"""

    def test_quarter_turn_is_i(self, ctx):
        value = unit_point(Fraction(1, 4), ctx)
        assert abs(value - ctx.mp.mpc(0, 1)) < ctx.tolerance

    def test_angle_one_is_one(self, ctx):
        assert abs(unit_point(1, ctx) - 1) < ctx.tolerance

    def test_angle_outside_unit_interval(self, ctx):
        with pytest.raises(ValidationError):
            unit_point(Fraction(3, 2), ctx)

    def test_points_lie_on_the_circle(self, ctx):
        for t in (Fraction(1, 7), Fraction(2, 3), Fraction(99, 100)):
            assert abs(abs(unit_point(t, ctx)) - 1) <= ctx.tolerance

    def test_fifth_root_follows_angle(self, ctx):
        point = circle_point(Fraction(1, 2), ctx)
        root = point.fifth_root()
        assert abs(root ** 5 - point.value) < ctx.tolerance * 8
        assert abs(root - unit_point(Fraction(1, 10), ctx)) < ctx.tolerance

    def test_fifth_root_of_one_is_a_primitive_fifth_root(self, ctx):
        point = circle_point(1, ctx)
        assert abs(point.fifth_root() - unit_point(Fraction(1, 5), ctx)) < ctx.tolerance
        assert abs(circle_point(0, ctx).fifth_root() - 1) < ctx.tolerance

    def test_fifth_root_without_angle(self, ctx):
        with pytest.raises(MissingAngleError):
            fifth_root(ctx.complex(1), None, ctx)

    def test_fifth_root_with_mismatched_angle(self, ctx):
        with pytest.raises(MissingAngleError):
            fifth_root(unit_point(Fraction(1, 3), ctx), Fraction(1, 4), ctx)


@pytest.mark.unit
class TestChordalDistance:
    """Test the chordal metric on the Riemann sphere"""

    def test_zero_to_infinity(self, ctx):
        assert abs(chordal_distance(ctx.complex(0), INFINITY, ctx) - 1) < ctx.tolerance

    def test_infinity_to_itself(self, ctx):
        assert chordal_distance(INFINITY, INFINITY, ctx) == 0

    def test_symmetric(self, ctx):
        w, z = ctx.mp.mpc(1, 2), ctx.mp.mpc(-3, 0.5)
        assert abs(chordal_distance(w, z, ctx) - chordal_distance(z, w, ctx)) < ctx.tolerance

    def test_antipodes_are_at_distance_one(self, ctx):
        assert abs(chordal_distance(ctx.complex(1), ctx.complex(-1), ctx) - 1) < ctx.tolerance


@pytest.mark.unit
class TestGoldenPowers:
    """Test golden-ratio powers and exact threshold integers"""

    def test_binet_reproduces_fibonacci(self, ctx):
        assert abs(binet_fibonacci(10, ctx) - 55) < ctx.tolerance * 55
        assert abs(binet_fibonacci(100, ctx) - 354224848179261915075) < ctx.tolerance * 10**21

    def test_negative_exponent(self, ctx):
        phi_k, _ = golden_powers(-3, ctx)
        assert abs(phi_k * ctx.phi ** 3 - 1) < ctx.tolerance

    def test_cap(self, ctx, monkeypatch):
        from config.settings import reset_settings

        monkeypatch.setenv("RRLAB_GOLDEN_POWER_CAP", "10")
        reset_settings()
        with pytest.raises(CapExceededError):
            golden_powers(11, ctx)

    @pytest.mark.parametrize("exponent, expected", [(0, 1), (1, 2), (2, 3), (3, 5), (16, 2207)])
    def test_phi_power_ceiling(self, exponent, expected):
        assert phi_power_ceiling(exponent) == expected

    def test_phi_power_ceiling_rejects_negative(self):
        with pytest.raises(ValidationError):
            phi_power_ceiling(-1)

    @pytest.mark.parametrize("a, exponent, expected", [
        (2207, 16, True),
        (2206, 16, False),
        (5, 3, True),
        (4, 3, False),
        (1, 0, True),
        (3, 200, False),
    ])
    def test_at_least_phi_power(self, a, exponent, expected):
        assert at_least_phi_power(a, exponent) is expected

    def test_scaled_ceiling_is_an_upper_bound(self, ctx):
        assert scaled_phi_power_ceiling(lambda c: c.real(1), 16, ctx) == 2207
        bound = scaled_phi_power_ceiling(lambda c: 2 * c.mp.pi, 40, ctx)
        assert bound >= 2 * ctx.mp.pi * ctx.phi ** 40


@pytest.mark.unit
class TestFormatInt:
    def test_small_integers_stay_decimal(self):
        assert format_int(35315) == "35315"

    def test_huge_integers_switch_to_hex(self):
        value = 10 ** 5000
        assert format_int(value) == hex(value)
