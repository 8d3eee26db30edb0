"""
Roots of Unity
Closed-form values of K at roots of unity, boundary values and block recurrences

Purpose: For a primitive m-th root x with 5 not dividing m,
K(x) = lambda x^e K(lambda) with lambda the Legendre symbol (m/5),
sigma = m mod 5 and e = (1 - lambda sigma m) / 5, an exact integer.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Dict, List, Optional, Tuple

import structlog
from sympy import fibonacci, legendre_symbol

from services.bigarith import (
    BigComplex,
    BigReal,
    CirclePoint,
    INFINITY,
    PrecisionContext,
    circle_point,
    fifth_root,
    unit_point,
)
from services.exceptions import (
    InternalConsistencyError,
    PreconditionViolationError,
    ValidationError,
    WrongResidueClassError,
)
from services.rrcf import ConvergentPair, critical_tail, pq_advance, walk_to

logger = structlog.get_logger()

CLASSIFICATION_RADIUS = Fraction(1, 10**10)
CLASSIFICATION_SEPARATION = Fraction(1, 10)


@dataclass(frozen=True)
class RootOfUnity:
    """exp(2 pi i k / m); k = m = 1 stands for the angle 1 itself"""

    k: int
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError(f"order must be positive, got {self.m}")
        if not (0 <= self.k < self.m or (self.k == 1 and self.m == 1)):
            raise ValidationError(f"numerator must satisfy 0 <= k < m, got {self.k}/{self.m}")

    @property
    def primitive(self) -> bool:
        return gcd(self.k, self.m) == 1

    @property
    def angle(self) -> Fraction:
        return Fraction(self.k, self.m)

    def point(self, ctx: PrecisionContext) -> CirclePoint:
        return circle_point(self.angle, ctx)

    def power(self, e: int, ctx: PrecisionContext) -> BigComplex:
        """x^e for any integer e, evaluated from the reduced angle"""
        return unit_point(Fraction((self.k * e) % self.m, self.m), ctx)


def primitive_roots(m: int) -> List[RootOfUnity]:
    if m == 1:
        return [RootOfUnity(0, 1)]
    return [RootOfUnity(k, m) for k in range(1, m) if gcd(k, m) == 1]


def _require_primitive(root: RootOfUnity) -> None:
    if not root.primitive:
        raise PreconditionViolationError(f"{root.k}/{root.m} is not a primitive root of unity")


def legendre5(m: int) -> int:
    """(m/5): +1 for m = 1, 4 (mod 5) and -1 for m = 2, 3 (mod 5)"""
    if m < 1:
        raise ValidationError(f"m must be positive, got {m}")
    if m % 5 == 0:
        raise WrongResidueClassError(f"(m/5) is undefined for m = {m}, a multiple of 5")
    return int(legendre_symbol(m % 5, 5))


def r_catalog(j: int, ctx: PrecisionContext) -> BigComplex:
    """R_j = -phi e(j/5) for 1 <= j <= 5 and e(j/5)/phi for 6 <= j <= 10"""
    if not 1 <= j <= 10:
        raise ValidationError(f"catalog index must lie in 1..10, got {j}")
    rotation = unit_point(Fraction(j % 5, 5), ctx)
    if j <= 5:
        return -ctx.phi * rotation
    return rotation / ctx.phi


def k_at_sign(lam: int, ctx: PrecisionContext) -> BigReal:
    """K(1) = phi and K(-1) = 1/phi"""
    return ctx.phi if lam == 1 else 1 / ctx.phi


@dataclass(frozen=True)
class SchurValue:
    root: RootOfUnity
    lam: int
    sigma: int
    exponent: int
    k_value: BigComplex
    r_value: BigComplex
    r_index: int
    distance: BigReal = field(repr=False)
    separation: BigReal = field(repr=False)


def classify_r(value: BigComplex, ctx: PrecisionContext) -> Tuple[int, BigReal, BigReal]:
    """Nearest catalog index with its distance and the runner-up distance"""
    distances = sorted((abs(value - r_catalog(j, ctx)), j) for j in range(1, 11))
    (nearest, j), (second, _) = distances[0], distances[1]
    return j, nearest, second


def schur_eval(root: RootOfUnity, ctx: PrecisionContext) -> SchurValue:
    _require_primitive(root)
    lam = legendre5(root.m)
    sigma = root.m % 5
    numerator = 1 - lam * sigma * root.m
    if numerator % 5:
        raise InternalConsistencyError(f"1 - lambda sigma m = {numerator} is not divisible by 5")
    exponent = numerator // 5
    k_value = lam * root.power(exponent, ctx) * k_at_sign(lam, ctx)
    point = root.point(ctx)
    r_value = fifth_root(point.value, point.angle, ctx) / k_value
    j, nearest, second = classify_r(r_value, ctx)
    if nearest > ctx.real(CLASSIFICATION_RADIUS) or second <= ctx.real(CLASSIFICATION_SEPARATION):
        raise InternalConsistencyError(
            f"R at {root.k}/{root.m} is not isolated near a catalog value "
            f"(nearest {ctx.mp.nstr(nearest, 5)}, runner-up {ctx.mp.nstr(second, 5)})"
        )
    return SchurValue(
        root=root,
        lam=lam,
        sigma=sigma,
        exponent=exponent,
        k_value=k_value,
        r_value=r_value,
        r_index=j,
        distance=nearest,
        separation=second,
    )


def schur_catalog(m_max: int, ctx: PrecisionContext) -> List[SchurValue]:
    """schur_eval over every primitive root with m <= m_max and 5 not dividing m"""
    rows = [schur_eval(root, ctx) for m in range(1, m_max + 1) if m % 5
            for root in primitive_roots(m)]
    logger.info("Schur catalog evaluated", m_max=m_max, rows=len(rows))
    return rows


# ---------------------------------------------------------------------------
# Boundary values and blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryQuad:
    """(P_{m-2}, P_{m-1}, Q_{m-2}, Q_{m-1}) at a primitive m-th root"""

    p_m2: BigComplex
    p_m1: BigComplex
    q_m2: BigComplex
    q_m1: BigComplex

    def as_tuple(self) -> Tuple[BigComplex, BigComplex, BigComplex, BigComplex]:
        return self.p_m2, self.p_m1, self.q_m2, self.q_m1


def boundary_quad(root: RootOfUnity, ctx: PrecisionContext) -> BoundaryQuad:
    """Closed-form boundary values selected by m mod 5; all powers are integral"""
    _require_primitive(root)
    m = root.m
    if m < 2:
        raise PreconditionViolationError(f"boundary values need m >= 2, got {m}")
    mp = ctx.mp
    one, zero = mp.mpc(1), mp.mpc(0)

    def x(e: int) -> BigComplex:
        return root.power(e, ctx)

    residue = m % 5
    if residue == 0:
        mu = m // 5
        return BoundaryQuad(zero, -x(2 * mu) - x(-2 * mu), -x(mu) - x(-mu), zero)
    if residue == 1:
        return BoundaryQuad(x((1 - m) // 5), one, zero, x((m - 1) // 5))
    if residue == 4:
        return BoundaryQuad(x((1 + m) // 5), one, zero, x((-1 - m) // 5))
    if residue == 2:
        return BoundaryQuad(-x((1 + 2 * m) // 5), zero, one, -x((-1 - 2 * m) // 5))
    return BoundaryQuad(-x((1 - 2 * m) // 5), zero, one, -x((-1 + 2 * m) // 5))


def recursed_quad(root: RootOfUnity, ctx: PrecisionContext) -> BoundaryQuad:
    """The same four values by running the recurrence to m - 1"""
    point = root.point(ctx)
    state = walk_to(point.value, root.m - 1, ctx, point.angle)
    return BoundaryQuad(state.p_prev, state.p, state.q_prev, state.q)


def block_step(
    quad: BoundaryQuad, prior: Tuple[BigComplex, BigComplex]
) -> Tuple[BigComplex, BigComplex]:
    """(P_n, Q_n) from (P_{n-m}, Q_{n-m}) across one period of x^j"""
    p_back, q_back = prior
    return (
        quad.p_m1 * p_back + quad.p_m2 * q_back,
        quad.q_m1 * p_back + quad.q_m2 * q_back,
    )


def block_fibonacci(root: RootOfUnity, q: int, r: int, ctx: PrecisionContext) -> Tuple[BigComplex, BigComplex]:
    """(P_{qm+r}, Q_{qm+r}) = F_q X_{m+r} + F_{q-1} X_r for 5 not dividing m"""
    _require_primitive(root)
    if root.m % 5 == 0:
        raise WrongResidueClassError(f"Fibonacci blocks need 5 not dividing m, got m = {root.m}")
    if q < 0 or not 0 <= r < root.m:
        raise ValidationError(f"need q >= 0 and 0 <= r < m, got q = {q}, r = {r}")
    point = root.point(ctx)
    low = walk_to(point.value, r, ctx, point.angle)
    high = walk_to(point.value, root.m + r, ctx, point.angle)
    f_q = int(fibonacci(q))
    f_prev = int(fibonacci(q - 1)) if q > 0 else 1
    return (f_q * high.p + f_prev * low.p, f_q * high.q + f_prev * low.q)


def block_limit(root: RootOfUnity, ctx: PrecisionContext) -> BigComplex:
    """K(x) = (P_{m-1} phi + 1) / (Q_{m-1} phi) from the Fibonacci block growth"""
    _require_primitive(root)
    if root.m % 5 == 0:
        raise WrongResidueClassError(f"block limit needs 5 not dividing m, got m = {root.m}")
    point = root.point(ctx)
    state = walk_to(point.value, root.m - 1, ctx, point.angle)
    return (state.p * ctx.phi + 1) / (state.q * ctx.phi)


def block_identities(root: RootOfUnity, ctx: PrecisionContext) -> Dict[str, BigReal]:
    """Residuals of Q_{2m-1} = Q_{m-1}, P_{2m-1} = P_{m-1} + 1, P_{2m-2} = P_{m-2}, Q_{2m-2} = 1 + Q_{m-2}"""
    _require_primitive(root)
    m = root.m
    if m < 2:
        raise PreconditionViolationError(f"block identities need m >= 2, got {m}")
    point = root.point(ctx)
    first = walk_to(point.value, m - 1, ctx, point.angle)
    second = walk_to(point.value, 2 * m - 1, ctx, point.angle)
    return {
        "Q_2m-1": abs(second.q - first.q),
        "P_2m-1": abs(second.p - first.p - 1),
        "P_2m-2": abs(second.p_prev - first.p_prev),
        "Q_2m-2": abs(second.q_prev - 1 - first.q_prev),
    }


@dataclass(frozen=True)
class BinetCoefficients:
    """Q_{qm+r} = b phi^q + b' phi_bar^q"""

    r: int
    b: BigComplex
    b_conj: BigComplex
    ctx: PrecisionContext = field(repr=False)

    def predict(self, q: int) -> BigComplex:
        return self.b * self.ctx.phi ** q + self.b_conj * self.ctx.phi_bar ** q


def binet_coefficients(root: RootOfUnity, r: int, ctx: PrecisionContext) -> BinetCoefficients:
    _require_primitive(root)
    if root.m % 5 == 0:
        raise WrongResidueClassError(f"Binet coefficients need 5 not dividing m, got m = {root.m}")
    if not 0 <= r < root.m:
        raise ValidationError(f"residue r must satisfy 0 <= r < m, got {r}")
    point = root.point(ctx)
    q_r = walk_to(point.value, r, ctx, point.angle).q
    q_mr = walk_to(point.value, root.m + r, ctx, point.angle).q
    b = (q_mr - ctx.phi_bar * q_r) / ctx.mp.sqrt(5)
    return BinetCoefficients(r=r, b=b, b_conj=q_r - b, ctx=ctx)


# ---------------------------------------------------------------------------
# General convergence at 5m-th roots
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitClass:
    """General limit (0 or infinity) with the witness tails v = M + 1, w = M + 2"""

    root: RootOfUnity
    limit: object
    quadrant_residue: int
    M: BigReal
    v: BigReal
    w: BigReal

    @property
    def tends_to_zero(self) -> bool:
        return self.limit is not INFINITY


def general_limit_class(root: RootOfUnity, ctx: PrecisionContext) -> LimitClass:
    """Classify by the quadrant of x^{m/5} = e(k/5)

    Second and third quadrants (k = 2, 3 mod 5) give limit 0 with
    M = max |Q_r/Q_{r-1}|; first and fourth give infinity with
    M = max |P_r/P_{r-1}|, both over 1 <= r <= m with nonzero denominators.
    """
    _require_primitive(root)
    if root.m % 5:
        raise WrongResidueClassError(f"general convergence needs 5 | m, got m = {root.m}")
    quadrant_residue = root.k % 5
    to_zero = quadrant_residue in (2, 3)
    point = root.point(ctx)
    ratios: List[BigReal] = []
    state = ConvergentPair.start(point.value, ctx, point.angle)
    for _ in range(root.m):
        state = pq_advance(state)
        if to_zero:
            tail = critical_tail(state)
        else:
            tail = INFINITY if abs(state.p_prev) <= ctx.tolerance else state.p / state.p_prev
        if tail is not INFINITY:
            ratios.append(abs(tail))
    M = max(ratios)
    return LimitClass(
        root=root,
        limit=ctx.mp.mpc(0) if to_zero else INFINITY,
        quadrant_residue=quadrant_residue,
        M=M,
        v=M + 1,
        w=M + 2,
    )


def residue_representative(r: int, s: int) -> Tuple[int, int]:
    """Smallest (c, d), 0 <= c <= d, gcd(c, d) = 1, with c = r and d = s (mod 5)"""
    r, s = r % 5, s % 5
    for d in range(1, 50):
        if d % 5 != s:
            continue
        for c in range(0, d + 1):
            if c % 5 == r and gcd(c, d) == 1:
                return c, d
    raise ValidationError(f"no coprime representative for {r}/{s} (mod 5)")


def r_from_residues(r: int, s: int, ctx: PrecisionContext) -> Optional[int]:
    """Catalog index of R at a representative of c/d = r/s (mod 5); None when 5 | d"""
    c, d = residue_representative(r, s)
    if d % 5 == 0:
        return None
    return schur_eval(RootOfUnity(c, d), ctx).r_index
