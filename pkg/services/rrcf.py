"""
Rogers-Ramanujan Convergent Engine
P_n/Q_n recurrences, approximant traces, tail modification and the outside-circle limits

Purpose: K(x) = 1 + x/(1 + x^2/(1 + x^3/...)) = lim P_n/Q_n with
P_{n+1} = P_n + x^{n+1} P_{n-1} and Q_{n+1} = Q_n + x^{n+1} Q_{n-1},
P_{-1} = 1, Q_{-1} = 0, P_0 = Q_0 = 1; R_n = x^{1/5} / K_n.
"""

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterator, List, Optional, Tuple, Union

import structlog

from services.bigarith import (
    INFINITY,
    Angle,
    BigComplex,
    BigReal,
    CirclePoint,
    ExtendedComplex,
    PrecisionContext,
    ensure_agreement,
    fifth_root,
    is_infinite,
    unit_point,
)
from services.exceptions import PreconditionViolationError, ValidationError

logger = structlog.get_logger()

GaussianRational = Tuple[Fraction, Fraction]

# A point is either a circle point (carrying its angle) or an exact value that
# can be rebuilt at any precision.
PointLike = Union[CirclePoint, Fraction, int, GaussianRational]


def realize(x: PointLike, ctx: PrecisionContext) -> Tuple[BigComplex, Optional[Angle]]:
    """The value of x at ctx's precision and the angle it carries, if any"""
    if isinstance(x, CirclePoint):
        if x.ctx.bits == ctx.bits:
            return x.value, x.angle
        return unit_point(x.angle, ctx), x.angle
    if isinstance(x, tuple):
        re, im = x
        return ctx.mp.mpc(ctx.real(Fraction(re)), ctx.real(Fraction(im))), None
    if isinstance(x, (Fraction, int)):
        return ctx.complex(Fraction(x)), None
    raise ValidationError(f"cannot rebuild point {x!r} at another precision")


def point_modulus(x: PointLike) -> Fraction:
    """|x|^2 as an exact rational for non-circle points"""
    if isinstance(x, tuple):
        return Fraction(x[0]) ** 2 + Fraction(x[1]) ** 2
    return Fraction(x) ** 2


@dataclass(frozen=True)
class ConvergentPair:
    """(P_n, P_{n-1}, Q_n, Q_{n-1}) at x with x^{n+1} carried forward"""

    n: int
    p: BigComplex
    p_prev: BigComplex
    q: BigComplex
    q_prev: BigComplex
    x: BigComplex
    x_power: BigComplex = field(repr=False)
    ctx: PrecisionContext = field(repr=False)
    angle: Optional[Angle] = None

    @classmethod
    def start(cls, x: BigComplex, ctx: PrecisionContext, angle: Optional[Angle] = None) -> "ConvergentPair":
        mp = ctx.mp
        x = mp.mpc(x)
        return cls(n=0, p=mp.mpc(1), p_prev=mp.mpc(1), q=mp.mpc(1), q_prev=mp.mpc(0),
                   x=x, x_power=x, ctx=ctx, angle=angle)

    @property
    def approximant(self) -> ExtendedComplex:
        return _divide(self.p, self.q, self.ctx)

    def determinant(self) -> BigComplex:
        return self.p * self.q_prev - self.q * self.p_prev


def _divide(numerator: BigComplex, denominator: BigComplex, ctx: PrecisionContext,
            scale: Optional[BigReal] = None) -> ExtendedComplex:
    reference = scale if scale is not None else ctx.mp.one
    if abs(denominator) <= ctx.tolerance * reference:
        return INFINITY
    return numerator / denominator


def pq_advance(state: ConvergentPair) -> ConvergentPair:
    """One step of the shared P/Q recurrence"""
    step = state.x_power
    return replace(
        state,
        n=state.n + 1,
        p=state.p + step * state.p_prev,
        p_prev=state.p,
        q=state.q + step * state.q_prev,
        q_prev=state.q,
        x_power=step * state.x,
    )


def iter_pairs(x: BigComplex, ctx: PrecisionContext, angle: Optional[Angle] = None) -> Iterator[ConvergentPair]:
    """ConvergentPair for n = 0, 1, 2, ..."""
    state = ConvergentPair.start(x, ctx, angle)
    while True:
        yield state
        state = pq_advance(state)


def walk_to(x: BigComplex, n: int, ctx: PrecisionContext, angle: Optional[Angle] = None) -> ConvergentPair:
    if n < 0:
        raise ValidationError(f"index must be non-negative, got {n}")
    state = ConvergentPair.start(x, ctx, angle)
    for _ in range(n):
        state = pq_advance(state)
    return state


def advance_to(x: PointLike, n: int, ctx: PrecisionContext) -> ConvergentPair:
    """State at index n, checked against the same walk at doubled precision"""
    value, angle = realize(x, ctx)
    coarse = walk_to(value, n, ctx, angle)
    fine_value, _ = realize(x, ctx.doubled())
    fine = walk_to(fine_value, n, ctx.doubled(), angle)
    ensure_agreement(coarse.p, fine.p, ctx, f"P_{n}")
    ensure_agreement(coarse.q, fine.q, ctx, f"Q_{n}")
    return coarse


def tail_modified(state: ConvergentPair, w: ExtendedComplex) -> ExtendedComplex:
    """S_n(w) = (P_n + w P_{n-1}) / (Q_n + w Q_{n-1}) on the extended plane"""
    if is_infinite(w):
        return _divide(state.p_prev, state.q_prev, state.ctx)
    mp = state.ctx.mp
    w = mp.mpc(w)
    denominator = state.q + w * state.q_prev
    scale = max(mp.one, abs(state.q), abs(w * state.q_prev))
    return _divide(state.p + w * state.p_prev, denominator, state.ctx, scale)


def critical_tail(state: ConvergentPair) -> ExtendedComplex:
    """h_n = Q_n / Q_{n-1}; S_n(-h_n) is infinite"""
    return _divide(state.q, state.q_prev, state.ctx)


# ---------------------------------------------------------------------------
# Approximant traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ApproximantRecord:
    n: int
    k: ExtendedComplex
    r: Optional[ExtendedComplex]
    abs_q: BigReal
    h: ExtendedComplex


@dataclass(frozen=True)
class ApproximantTrace:
    """K_n, R_n, |Q_n| and h_n for n = 0..N; blowups hold (n, |Q_n|) with Q_n ~ 0"""

    bits: int
    angle: Optional[Angle]
    records: Tuple[ApproximantRecord, ...]
    blowups: Tuple[Tuple[int, BigReal], ...] = ()

    def __post_init__(self):
        if any(record.n != i for i, record in enumerate(self.records)):
            raise ValidationError("approximant trace records must be indexed 0, 1, 2, ...")

    def __getitem__(self, n: int) -> ApproximantRecord:
        return self.records[n]

    @property
    def last(self) -> ApproximantRecord:
        return self.records[-1]


def _reciprocal_scaled(numerator: BigComplex, value: ExtendedComplex) -> ExtendedComplex:
    if is_infinite(value):
        return numerator * 0
    if value == 0:
        return INFINITY
    return numerator / value


def classical_approximants(x: PointLike, N: int, ctx: PrecisionContext) -> ApproximantTrace:
    """K_n = P_n/Q_n for n <= N; R_n only when x carries its angle"""
    if N < 1:
        raise ValidationError(f"N must be at least 1, got {N}")
    value, angle = realize(x, ctx)
    root = fifth_root(value, angle, ctx) if angle is not None else None
    records: List[ApproximantRecord] = []
    blowups: List[Tuple[int, BigReal]] = []
    final = None
    for state in iter_pairs(value, ctx, angle):
        k = state.approximant
        if is_infinite(k):
            blowups.append((state.n, abs(state.q)))
            logger.warning("approximant denominator vanished", n=state.n, bits=ctx.bits)
        records.append(
            ApproximantRecord(
                n=state.n,
                k=k,
                r=_reciprocal_scaled(root, k) if root is not None else None,
                abs_q=abs(state.q),
                h=critical_tail(state),
            )
        )
        if state.n == N:
            final = state
            break
    fine_value, _ = realize(x, ctx.doubled())
    fine = walk_to(fine_value, N, ctx.doubled(), angle)
    ensure_agreement(final.p, fine.p, ctx, f"P_{N}")
    ensure_agreement(final.q, fine.q, ctx, f"Q_{N}")
    return ApproximantTrace(bits=ctx.bits, angle=angle, records=tuple(records), blowups=tuple(blowups))


# ---------------------------------------------------------------------------
# Outside the unit circle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeriesEvaluation:
    value: BigComplex
    depth: int
    change: BigReal
    converged: bool


def _evaluate_cf(
    b0: int,
    numerator: Callable[[int], BigComplex],
    depth: int,
) -> BigComplex:
    # b0 + a_1/(1 + a_2/(1 + ...)) by the forward recurrence
    a_prev, a = 1, b0
    b_prev, b = 0, 1
    for n in range(1, depth + 1):
        coefficient = numerator(n)
        a_prev, a = a, a + coefficient * a_prev
        b_prev, b = b, b + coefficient * b_prev
    return a / b


def _series(b0: int, numerator_at: Callable[[BigComplex, int], BigComplex],
            x: PointLike, depth: int, ctx: PrecisionContext, name: str) -> SeriesEvaluation:
    if depth < 1:
        raise ValidationError(f"depth must be at least 1, got {depth}")
    if point_modulus(x) >= 1:
        raise PreconditionViolationError(f"{name} needs |x| < 1")
    value, _ = realize(x, ctx)
    shallow = _evaluate_cf(b0, lambda n: numerator_at(value, n), depth)
    deep = _evaluate_cf(b0, lambda n: numerator_at(value, n), 2 * depth)
    change = abs(deep - shallow)
    converged = change <= ctx.tolerance * max(ctx.mp.one, abs(deep))
    if not converged:
        logger.warning("continued fraction not converged", series=name, depth=depth,
                       change=ctx.mp.nstr(change, 8))
    return SeriesEvaluation(value=shallow, depth=depth, change=change, converged=converged)


def f1_evaluation(x: PointLike, depth: int, ctx: PrecisionContext) -> SeriesEvaluation:
    """1 - x/(1 + x^2/(1 - x^3/(1 + ...)))"""
    return _series(1, lambda v, n: (-v) ** n, x, depth, ctx, "F1")


def f2_evaluation(x: PointLike, depth: int, ctx: PrecisionContext) -> SeriesEvaluation:
    """x/(1 + x^4/(1 + x^8/(1 + ...)))"""
    return _series(0, lambda v, n: v if n == 1 else v ** (4 * (n - 1)), x, depth, ctx, "F2")


def f1_series(x: PointLike, depth: int, ctx: PrecisionContext) -> BigComplex:
    return f1_evaluation(x, depth, ctx).value


def f2_series(x: PointLike, depth: int, ctx: PrecisionContext) -> BigComplex:
    return f2_evaluation(x, depth, ctx).value


def reciprocal_point(x: PointLike) -> PointLike:
    if isinstance(x, tuple):
        re, im = Fraction(x[0]), Fraction(x[1])
        norm = re * re + im * im
        return (re / norm, -im / norm)
    return 1 / Fraction(x)


@dataclass(frozen=True)
class OddEvenLimits:
    """1/K_N(1/x) and 1/K_{N+1}(1/x) against F_1(x) and F_2(x)"""

    odd: BigComplex
    even: BigComplex
    gap: BigReal
    f1: BigComplex
    f2: BigComplex
    odd_error: BigReal
    even_error: BigReal
    worpitsky: bool
    N: int


def _outside_pair(z: PointLike, N: int, ctx: PrecisionContext) -> Tuple[BigComplex, BigComplex]:
    value, _ = realize(z, ctx)
    state = walk_to(value, N, ctx)
    odd = state.q / state.p
    after = pq_advance(state)
    even = after.q / after.p
    return odd, even


def odd_even_limits(x: PointLike, N: int, ctx: PrecisionContext) -> OddEvenLimits:
    """Parity limits of 1/K(1/x) for |x| < 1/4

    Counting convergents of 1/K(1/x) from K_0, those at even n tend to F_1(x)
    and those at odd n to F_2(x).
    """
    if point_modulus(x) == 0:
        raise PreconditionViolationError("odd_even_limits needs x != 0")
    if N < 10 or N % 2:
        raise PreconditionViolationError(f"N must be even and at least 10, got {N}")
    worpitsky = point_modulus(x) < Fraction(1, 16)
    if not worpitsky:
        logger.warning("point outside the |x| < 1/4 separation disk", x=str(x))
    z = reciprocal_point(x)
    odd, even = _outside_pair(z, N, ctx)
    fine_odd, fine_even = _outside_pair(z, N, ctx.doubled())
    ensure_agreement(odd, fine_odd, ctx, "odd limit")
    ensure_agreement(even, fine_even, ctx, "even limit")
    f1 = f1_series(x, N, ctx)
    f2 = f2_series(x, N, ctx)
    return OddEvenLimits(
        odd=odd,
        even=even,
        gap=abs(odd - even),
        f1=f1,
        f2=f2,
        odd_error=abs(odd - f1),
        even_error=abs(even - f2),
        worpitsky=worpitsky,
        N=N,
    )
