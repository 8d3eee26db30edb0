"""
Arbitrary-Precision Arithmetic
Precision contexts, unit-circle points, golden-ratio powers and the chordal metric

Purpose: Every circle point and every recurrence value in the laboratory is an
mpmath number created by a PrecisionContext's private mpmath context, so
computations at different precisions never share global state.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Optional, Tuple, TypeVar, Union

import mpmath
import sympy
import structlog
from mpmath.ctx_mp import MPContext

from config.settings import get_settings
from services.exceptions import (
    CapExceededError,
    MissingAngleError,
    PrecisionTooLowError,
    ValidationError,
)

logger = structlog.get_logger()

# Values are produced by PrecisionContext.mp; the aliases name their role.
BigReal = mpmath.mpf
BigComplex = mpmath.mpc

Angle = Union[Fraction, int, BigReal]

T = TypeVar("T")


class PointAtInfinity:
    """The point at infinity of the extended complex plane"""

    _instance: Optional["PointAtInfinity"] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFINITY"

    def __reduce__(self):
        return (PointAtInfinity, ())


INFINITY = PointAtInfinity()

ExtendedComplex = Union[BigComplex, PointAtInfinity]


def is_infinite(z: ExtendedComplex) -> bool:
    return z is INFINITY


@dataclass(frozen=True)
class PrecisionContext:
    """Working mantissa precision plus the guard bits spent by the doubling check"""

    bits: int
    guard_bits: int = 32

    def __post_init__(self):
        if self.bits < 64:
            raise ValidationError(f"precision must be at least 64 bits, got {self.bits}")
        if self.guard_bits <= 0 or self.guard_bits >= self.bits:
            raise ValidationError(
                f"guard_bits must satisfy 0 < guard_bits < bits, got {self.guard_bits}"
            )

    @classmethod
    def from_settings(cls) -> "PrecisionContext":
        settings = get_settings()
        return cls(bits=settings.PRECISION_BITS, guard_bits=settings.GUARD_BITS)

    @cached_property
    def mp(self) -> MPContext:
        context = MPContext()
        context.prec = self.bits
        return context

    @property
    def tolerance(self) -> BigReal:
        """2^-(bits - guard_bits), the agreement radius of the doubling contract"""
        return self.mp.ldexp(self.mp.one, -(self.bits - self.guard_bits))

    def doubled(self) -> "PrecisionContext":
        return PrecisionContext(bits=2 * self.bits, guard_bits=self.guard_bits)

    def with_bits(self, bits: int) -> "PrecisionContext":
        return PrecisionContext(bits=bits, guard_bits=self.guard_bits)

    def real(self, value) -> BigReal:
        if isinstance(value, Fraction):
            return self.mp.mpf(value.numerator) / value.denominator
        return self.mp.mpf(value)

    def complex(self, value) -> BigComplex:
        if isinstance(value, Fraction):
            return self.mp.mpc(self.real(value))
        return self.mp.mpc(value)

    @cached_property
    def phi(self) -> BigReal:
        return (self.mp.sqrt(5) + 1) / 2

    @cached_property
    def phi_bar(self) -> BigReal:
        return (1 - self.mp.sqrt(5)) / 2


@dataclass(frozen=True)
class CirclePoint:
    """A unit-circle point together with the angle it was built from"""

    angle: Angle
    value: BigComplex
    ctx: PrecisionContext = field(repr=False)

    def fifth_root(self) -> BigComplex:
        return fifth_root(self.value, self.angle, self.ctx)


def ensure_agreement(coarse, fine, ctx: PrecisionContext, what: str) -> None:
    """Raise PrecisionTooLowError unless coarse and fine agree to bits - guard_bits"""
    mp = ctx.doubled().mp
    coarse_v = mp.mpc(coarse)
    fine_v = mp.mpc(fine)
    scale = max(mp.one, abs(fine_v))
    difference = abs(fine_v - coarse_v)
    if difference > ctx.tolerance * scale:
        logger.warning(
            "doubling check failed",
            quantity=what,
            bits=ctx.bits,
            difference=mpmath.nstr(difference, 8),
        )
        raise PrecisionTooLowError(
            f"{what}: value at {ctx.bits} bits differs from {2 * ctx.bits}-bit value "
            f"by {mpmath.nstr(difference, 8)}"
        )


def doubling_check(compute: Callable[[PrecisionContext], T], ctx: PrecisionContext, what: str) -> T:
    """Evaluate compute at ctx and at 2*bits; return the ctx value if they agree"""
    coarse = compute(ctx)
    fine = compute(ctx.doubled())
    ensure_agreement(coarse, fine, ctx, what)
    return coarse


def _angle_value(t: Angle, ctx: PrecisionContext) -> BigReal:
    if isinstance(t, (Fraction, int)):
        return ctx.real(Fraction(t))
    return ctx.mp.mpf(t)


def _exp_two_pi_i(t: Angle, ctx: PrecisionContext) -> BigComplex:
    mp = ctx.mp
    two_t = 2 * _angle_value(t, ctx)
    return mp.mpc(mp.cospi(two_t), mp.sinpi(two_t))


def unit_point(t: Angle, ctx: PrecisionContext) -> BigComplex:
    """exp(2 pi i t), validated by re-evaluation at doubled precision

    t = 1 is accepted alongside [0, 1): it names the same point as t = 0 but
    carries the full-turn branch exp(2 pi i / 5) into fifth_root, which the
    convergent 1/1 of a constructed point needs.
    """
    if _angle_value(t, ctx) < 0 or _angle_value(t, ctx) > 1:
        raise ValidationError(f"angle must lie in [0, 1], got {t}")
    value = doubling_check(lambda c: _exp_two_pi_i(t, c), ctx, "unit_point")
    if abs(abs(value) - 1) > ctx.tolerance:
        raise PrecisionTooLowError(f"unit_point({t}) is off the unit circle at {ctx.bits} bits")
    return value


def circle_point(t: Angle, ctx: PrecisionContext) -> CirclePoint:
    return CirclePoint(angle=t, value=unit_point(t, ctx), ctx=ctx)


def fifth_root(x: BigComplex, angle: Optional[Angle], ctx: PrecisionContext) -> BigComplex:
    """exp(2 pi i angle / 5): the branch of x^(1/5) fixed by the angle x was built from"""
    if angle is None:
        raise MissingAngleError()
    if abs(ctx.mp.mpc(x) - _exp_two_pi_i(angle, ctx)) > ctx.tolerance * 4:
        raise MissingAngleError(f"point does not match its carried angle {angle}")
    if isinstance(angle, (Fraction, int)):
        return _exp_two_pi_i(Fraction(angle) / 5, ctx)
    return _exp_two_pi_i(ctx.mp.mpf(angle) / 5, ctx)


def chordal_distance(w: ExtendedComplex, z: ExtendedComplex, ctx: PrecisionContext) -> BigReal:
    """Chordal metric on the Riemann sphere; always in [0, 1]"""
    mp = ctx.mp
    if is_infinite(w) and is_infinite(z):
        return mp.zero
    if is_infinite(w):
        w, z = z, w
    w = mp.mpc(w)
    if is_infinite(z):
        return 1 / mp.sqrt(1 + abs(w) ** 2)
    z = mp.mpc(z)
    return abs(z - w) / (mp.sqrt(1 + abs(w) ** 2) * mp.sqrt(1 + abs(z) ** 2))


def golden_powers(k: int, ctx: PrecisionContext) -> Tuple[BigReal, BigReal]:
    """(phi^k, phi_bar^k) for |k| up to the configured cap"""
    cap = get_settings().GOLDEN_POWER_CAP
    if abs(k) > cap:
        raise CapExceededError(f"golden power exponent {k} exceeds cap {cap}")
    return ctx.phi ** k, ctx.phi_bar ** k


def binet_fibonacci(k: int, ctx: PrecisionContext) -> BigReal:
    phi_k, phi_bar_k = golden_powers(k, ctx)
    return (phi_k - phi_bar_k) / ctx.mp.sqrt(5)


def phi_power_ceiling(exponent: int) -> int:
    """Smallest integer >= phi^exponent, exactly

    phi^d = L_d - phi_bar^d with L_d the Lucas number, and |phi_bar^d| < 1 for
    d >= 1, so the ceiling is L_d for even d and L_d + 1 for odd d.
    """
    if exponent < 0:
        raise ValidationError(f"exponent must be non-negative, got {exponent}")
    if exponent == 0:
        return 1
    return int(sympy.lucas(exponent)) + (exponent % 2)


def at_least_phi_power(a: int, exponent: int) -> bool:
    """Exact test of a >= phi^exponent using phi^d = (L_d + F_d sqrt 5) / 2"""
    if exponent == 0:
        return a >= 1
    # phi^d > 2^(0.6942 d); skips the Lucas numbers when a is plainly too small
    if exponent * 6942 // 10000 >= a.bit_length():
        return False
    lucas = int(sympy.lucas(exponent))
    fib = int(sympy.fibonacci(exponent))
    gap = 2 * a - lucas
    return gap >= 0 and gap * gap >= 5 * fib * fib


def scaled_phi_power_ceiling(
    scale: Callable[[PrecisionContext], BigReal], exponent: int, ctx: PrecisionContext
) -> int:
    """Integer upper bound for scale * phi^exponent from a round-up evaluation

    The working precision covers the integer part plus guard bits, and the
    rounded value is inflated by a relative 2^-(bits - 8) before the ceiling,
    so the returned integer is never below the real threshold.
    """
    magnitude_bits = int(exponent * 0.6943) + 64
    work = ctx.with_bits(max(ctx.bits, magnitude_bits + ctx.guard_bits + 64))
    wmp = work.mp
    value = scale(work) * work.phi ** exponent
    upper = value * (1 + wmp.ldexp(1, -(work.bits - 8)))
    return int(wmp.ceil(upper))


DECIMAL_INT_LIMIT = 4000


def format_int(value: int) -> str:
    """Decimal for ordinary integers, hexadecimal once the decimal form gets unwieldy"""
    if value.bit_length() * 0.30103 < DECIMAL_INT_LIMIT:
        return str(value)
    return hex(value)
