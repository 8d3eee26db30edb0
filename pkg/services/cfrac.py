"""
Regular Continued Fractions
Partial-quotient streams, convergents, residue patterns and power towers

Purpose: Big-integer continued fractions [0; a_1, a_2, ...] for the points whose
images on the unit circle are studied, including the rule-generated points
whose partial quotients outgrow any fixed threshold.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import count
from math import gcd
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import structlog
from sympy.ntheory import reduced_totient

from config.settings import get_settings
from services.bigarith import (
    BigReal,
    PrecisionContext,
    at_least_phi_power,
    format_int,
    phi_power_ceiling,
    scaled_phi_power_ceiling,
)
from services.exceptions import CapExceededError, InternalConsistencyError, ValidationError

logger = structlog.get_logger()

LOG2_PHI = 0.6942419136306174


# ---------------------------------------------------------------------------
# Power towers
# ---------------------------------------------------------------------------

def _carmichael_chain_length(m: int) -> int:
    length = 0
    while m > 1:
        m = int(reduced_totient(m))
        length += 1
    return length


@dataclass(frozen=True)
class Tower:
    """base^base^...^top with `height` copies of base; height 0 is just top"""

    base: int
    height: int
    top: int

    def __post_init__(self):
        if self.base < 2 or self.height < 0 or self.top < 1:
            raise ValidationError(f"invalid tower {self}")

    def exponent(self) -> "Tower":
        if self.height == 0:
            raise ValidationError("a tower of height 0 has no exponent")
        return Tower(self.base, self.height - 1, self.top)

    def small_value(self, limit: int) -> Optional[int]:
        """Exact value if it does not exceed limit, else None"""
        value = self.top
        if value > limit:
            return None
        for _ in range(self.height):
            if value * (self.base.bit_length() - 1) > limit.bit_length() + 1:
                return None
            value = self.base ** value
            if value > limit:
                return None
        return value

    def materialize(self, max_bits: Optional[int] = None) -> int:
        cap = max_bits if max_bits is not None else get_settings().MAX_INTEGER_BITS
        value = self.top
        for _ in range(self.height):
            if value * (self.base.bit_length() - 1) > cap:
                raise CapExceededError(
                    f"tower {self.base}^..^{self.top} of height {self.height} exceeds {cap} bits"
                )
            value = self.base ** value
        return value

    def mod(self, m: int) -> int:
        return tower_mod(self.base, self.height, self.top, m)

    def exceeds_power(self, base: int, exponent: int) -> bool:
        """Exact test of tower >= base^exponent for power-of-two bases

        Compares binary exponents, so neither side has to be materialized.
        """
        shift = _log2_exact(self.base)
        other_shift = _log2_exact(base)
        target = other_shift * exponent
        if self.height == 0:
            return self.top.bit_length() - 1 >= target
        # tower = 2^(shift * exponent_tower)
        return self.exponent().at_least(-(-target // shift))

    def at_least(self, n: int) -> bool:
        small = self.small_value(n)
        return small is None or small >= n


def _log2_exact(value: int) -> int:
    shift = value.bit_length() - 1
    if value != 1 << shift:
        raise ValidationError(f"power comparison needs a power-of-two base, got {value}")
    return shift


def tower_value(base: int, height: int, top: int) -> Tower:
    return Tower(base, height, top)


def tower_mod(base: int, height: int, top: int, m: int) -> int:
    """Residue of a power tower modulo m by iterated Carmichael reduction

    Uses a^e = a^((e mod lambda(m)) + lambda(m)) (mod m), valid whenever e is
    at least the largest prime-power exponent of m, which is below log2(m)+1.
    """
    if m < 1:
        raise ValidationError(f"modulus must be positive, got {m}")
    if m == 1:
        return 0
    if height == 0:
        return top % m
    exponent = Tower(base, height - 1, top)
    threshold = m.bit_length() + 1
    small = exponent.small_value(threshold)
    if small is not None:
        return pow(base, small, m)
    lam = int(reduced_totient(m))
    reduced = tower_mod(base, height - 1, top, lam) + lam
    return pow(base, reduced, m)


# ---------------------------------------------------------------------------
# Streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Convergent:
    """The i-th convergent c_i / d_i"""

    index: int
    c: int
    d: int

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.c, self.d)


@dataclass(frozen=True)
class ResiduePattern:
    """An eventually periodic residue sequence p_1, p_2, ... modulo 5"""

    preperiod: Tuple[int, ...] = ()
    period: Tuple[int, ...] = (1,)

    def __post_init__(self):
        if not self.period:
            raise ValidationError("residue pattern needs a non-empty period")

    def __getitem__(self, i: int) -> int:
        if i < 1:
            raise ValidationError(f"pattern positions start at 1, got {i}")
        if i <= len(self.preperiod):
            return self.preperiod[i - 1]
        return self.period[(i - 1 - len(self.preperiod)) % len(self.period)]

    def describe(self) -> Dict[str, Any]:
        return {"preperiod": list(self.preperiod), "period": list(self.period)}

    @classmethod
    def from_description(cls, data: Dict[str, Any]) -> "ResiduePattern":
        return cls(tuple(int(v) for v in data.get("preperiod", ())),
                   tuple(int(v) for v in data["period"]))


# alpha = [0, 1, 3, (2, 3, 2, 1, 1, 2, 3, 2, 1, 3, 3, 5)]
ALPHA_PREPERIOD = (1, 3)
ALPHA_PERIOD = (2, 3, 2, 1, 1, 2, 3, 2, 1, 3, 3, 5)
ALPHA_RESIDUES = ResiduePattern(ALPHA_PREPERIOD, tuple(a % 5 for a in ALPHA_PERIOD))

# offsets added to the towers of sixteens: {0, 2, (1, 2, 1, 0, 0, 1, 2, 1, 0, 2, 2, 4)}
SIXTEENS_OFFSETS = ResiduePattern((0, 2), (1, 2, 1, 0, 0, 1, 2, 1, 0, 2, 2, 4))


class PartialQuotientStream(ABC):
    """a_1, a_2, ... of [0; a_1, a_2, ...]; a_0 = 0 throughout"""

    kind: str = ""

    @abstractmethod
    def quotient(self, i: int) -> int:
        """Materialized a_i, i >= 1"""

    @abstractmethod
    def describe(self) -> Dict[str, Any]:
        """JSON description accepted by stream_from_description"""

    @property
    def length(self) -> Optional[int]:
        """Number of partial quotients, None for infinite streams"""
        return None

    def residue(self, i: int, m: int) -> int:
        return self.quotient(i) % m

    def residue_period(self, m: int) -> Optional[Tuple[int, int]]:
        """(preperiod, period) of a_i mod m over i >= 1 when known without materializing"""
        return None

    def quotients(self, n: int) -> List[int]:
        return [self.quotient(i) for i in range(1, n + 1)]

    def __iter__(self) -> Iterator[int]:
        for i in count(1):
            if self.length is not None and i > self.length:
                return
            yield self.quotient(i)

    def __eq__(self, other) -> bool:
        return isinstance(other, PartialQuotientStream) and self.describe() == other.describe()

    def __hash__(self) -> int:
        return hash(repr(self.describe()))


def _check_quotient(a: int, i: int) -> int:
    if a < 1:
        raise ValidationError(f"partial quotient a_{i} = {a} must be positive")
    return a


class ExplicitStream(PartialQuotientStream):
    kind = "explicit"

    def __init__(self, quotients: Sequence[int]):
        self._quotients = tuple(_check_quotient(int(a), i) for i, a in enumerate(quotients, 1))

    @property
    def length(self) -> Optional[int]:
        return len(self._quotients)

    def quotient(self, i: int) -> int:
        if i < 1 or i > len(self._quotients):
            raise CapExceededError(f"explicit stream has {len(self._quotients)} terms, asked for a_{i}")
        return self._quotients[i - 1]

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "quotients": list(self._quotients)}


class PeriodicStream(PartialQuotientStream):
    kind = "periodic"

    def __init__(self, preperiod: Sequence[int], period: Sequence[int]):
        if not period:
            raise ValidationError("periodic stream needs a non-empty period")
        self.preperiod = tuple(_check_quotient(int(a), i) for i, a in enumerate(preperiod, 1))
        self.period = tuple(_check_quotient(int(a), i) for i, a in enumerate(period, 1))

    def quotient(self, i: int) -> int:
        if i < 1:
            raise ValidationError(f"partial quotients start at a_1, got a_{i}")
        if i <= len(self.preperiod):
            return self.preperiod[i - 1]
        return self.period[(i - 1 - len(self.preperiod)) % len(self.period)]

    def residue_period(self, m: int) -> Optional[Tuple[int, int]]:
        return len(self.preperiod), len(self.period)

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "preperiod": list(self.preperiod), "period": list(self.period)}


class TowerStream(PartialQuotientStream):
    """a_i = tower of i copies of base with i on top, plus a periodic offset"""

    kind = "tower"

    def __init__(self, base: int, offsets: Optional[ResiduePattern] = None):
        self.base = base
        self.offsets = offsets

    def tower(self, i: int) -> Tower:
        return Tower(self.base, i, i)

    def offset(self, i: int) -> int:
        return self.offsets[i] if self.offsets is not None else 0

    def quotient(self, i: int) -> int:
        return self.tower(i).materialize() + self.offset(i)

    def residue(self, i: int, m: int) -> int:
        return (self.tower(i).mod(m) + self.offset(i)) % m

    def residue_period(self, m: int) -> Optional[Tuple[int, int]]:
        # Past the Carmichael chain length the top no longer affects the residue.
        stable_from = _carmichael_chain_length(m) + 3
        if self.offsets is None:
            return stable_from, 1
        return max(stable_from, len(self.offsets.preperiod)), len(self.offsets.period)

    def describe(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind, "base": self.base}
        if self.offsets is not None:
            data["offsets"] = self.offsets.describe()
        return data


class GrowthPolicy(str, Enum):
    PHI_POWER = "phi-power"
    KAPPA_PHI_POWER = "kappa-phi-power"
    GENERAL_DIVERGENCE = "general-divergence"
    CONSTANT = "constant"


@dataclass(frozen=True)
class SetSCertificate:
    """Evidence that a_{i+1} clears the level-i threshold"""

    level: int
    next_quotient: int
    d: int
    threshold: int
    kind: str
    holds: bool

    def describe(self) -> Dict[str, Any]:
        return {
            "level": self.level,
            "next_quotient": format_int(self.next_quotient),
            "d": format_int(self.d),
            "threshold": format_int(self.threshold),
            "kind": self.kind,
            "holds": self.holds,
        }


STREAM_KINDS = {
    "S-minimal": GrowthPolicy.PHI_POWER,
    "S-kappa": GrowthPolicy.KAPPA_PHI_POWER,
    "S-diamond": GrowthPolicy.GENERAL_DIVERGENCE,
    "S-prime": GrowthPolicy.GENERAL_DIVERGENCE,
    "constant": GrowthPolicy.CONSTANT,
}


class ThresholdStream(PartialQuotientStream):
    """Partial quotients generated as the smallest integers above a growth threshold

    a_{i+1} is the least integer at or above the level-i threshold (a function of
    d_i) lying in the residue class the pattern prescribes, if any. Terms are
    cached as they are produced, so a stream instance is single-consumer.
    """

    def __init__(
        self,
        kind: str,
        pattern: Optional[ResiduePattern] = None,
        kappa: Fraction = Fraction(1),
        constant: int = 1,
        ctx: Optional[PrecisionContext] = None,
    ):
        if kind not in STREAM_KINDS:
            raise ValidationError(f"unknown threshold stream kind {kind!r}")
        if kind in ("S-diamond", "S-prime") and pattern is None:
            pattern = ALPHA_RESIDUES
        if kappa <= 0:
            raise ValidationError(f"kappa must be positive, got {kappa}")
        self.kind = kind
        self.policy = STREAM_KINDS[kind]
        self.pattern = pattern
        self.kappa = Fraction(kappa)
        self.constant = constant
        self.ctx = ctx or PrecisionContext.from_settings()
        self._quotients: List[int] = []
        self._denominators: List[int] = [1]  # d_0
        self._previous_denominator = 0  # d_{-1}
        self._certificates: List[SetSCertificate] = []

    # thresholds -----------------------------------------------------------

    def _predicted_bits(self, d: int) -> int:
        if self.policy == GrowthPolicy.CONSTANT:
            return self.constant.bit_length()
        exponent = d * d + 2 * d if self.policy == GrowthPolicy.GENERAL_DIVERGENCE else d
        return int(exponent * LOG2_PHI) + 64

    def threshold(self, d: int) -> int:
        """Integer the next quotient must reach at a level with denominator d"""
        cap = get_settings().MAX_INTEGER_BITS
        if d.bit_length() > 64 or self._predicted_bits(d) > cap:
            raise CapExceededError(f"threshold at d = {d} exceeds the {cap}-bit cap")
        if self.policy == GrowthPolicy.PHI_POWER:
            return phi_power_ceiling(d)
        if self.policy == GrowthPolicy.KAPPA_PHI_POWER:
            kappa = self.kappa
            return scaled_phi_power_ceiling(lambda c: c.real(kappa), d, self.ctx)
        if self.policy == GrowthPolicy.GENERAL_DIVERGENCE:
            return scaled_phi_power_ceiling(
                lambda c: 2 * c.mp.pi * (d + 1) ** 2, d * d + 2 * d, self.ctx
            )
        return self.constant

    def _clears(self, a: int, d: int, threshold: int) -> bool:
        if self.policy == GrowthPolicy.PHI_POWER:
            return at_least_phi_power(a, d)
        return a >= threshold

    def _adjust(self, value: int, i: int) -> int:
        if self.pattern is None:
            return value
        return value + (self.pattern[i] - value) % 5

    # generation -----------------------------------------------------------

    def _first_quotient(self) -> int:
        if self.pattern is None:
            return 1
        return self._adjust(1, 1)

    def _extend(self) -> None:
        i = len(self._quotients) + 1
        if i == 1:
            a = self._first_quotient()
        else:
            d = self._denominators[-1]
            threshold = self.threshold(d)
            a = self._adjust(threshold, i)
            holds = self._clears(a, d, threshold)
            if not holds:
                raise InternalConsistencyError(f"a_{i} = {a} fails its own threshold {threshold}")
            self._certificates.append(
                SetSCertificate(level=i - 1, next_quotient=a, d=d, threshold=threshold,
                                kind=self.kind, holds=holds)
            )
        self._quotients.append(a)
        d_next = a * self._denominators[-1] + self._previous_denominator
        self._previous_denominator = self._denominators[-1]
        self._denominators.append(d_next)

    def quotient(self, i: int) -> int:
        if i < 1:
            raise ValidationError(f"partial quotients start at a_1, got a_{i}")
        while len(self._quotients) < i:
            self._extend()
        return self._quotients[i - 1]

    def residue(self, i: int, m: int) -> int:
        if m == 5 and self.pattern is not None:
            return self.pattern[i] % 5
        return self.quotient(i) % m

    def residue_period(self, m: int) -> Optional[Tuple[int, int]]:
        if m == 5 and self.pattern is not None:
            return len(self.pattern.preperiod), len(self.pattern.period)
        return None

    def certificates(self, levels: int) -> List[SetSCertificate]:
        self.quotient(levels + 1)
        return list(self._certificates[:levels])

    def describe(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind}
        if self.pattern is not None:
            data["pattern"] = self.pattern.describe()
        if self.policy == GrowthPolicy.KAPPA_PHI_POWER:
            data["kappa"] = str(self.kappa)
        if self.policy == GrowthPolicy.CONSTANT:
            data["value"] = self.constant
        return data


def stream_from_description(data: Dict[str, Any]) -> PartialQuotientStream:
    """Inverse of PartialQuotientStream.describe"""
    kind = data.get("kind")
    if kind == "explicit":
        return ExplicitStream([int(a) for a in data["quotients"]])
    if kind == "periodic":
        return PeriodicStream([int(a) for a in data.get("preperiod", [])],
                              [int(a) for a in data["period"]])
    if kind == "tower":
        offsets = data.get("offsets")
        return TowerStream(int(data["base"]),
                           ResiduePattern.from_description(offsets) if offsets else None)
    if kind in STREAM_KINDS:
        pattern = data.get("pattern")
        return ThresholdStream(
            kind,
            pattern=ResiduePattern.from_description(pattern) if pattern else None,
            kappa=Fraction(data.get("kappa", "1")),
            constant=int(data.get("value", 1)),
        )
    raise ValidationError(f"unknown stream kind {kind!r}")


def alpha_stream() -> PeriodicStream:
    """alpha = [0, 1, 3, (2, 3, 2, 1, 1, 2, 3, 2, 1, 3, 3, 5)]"""
    return PeriodicStream(ALPHA_PREPERIOD, ALPHA_PERIOD)


def twos_tower_stream() -> TowerStream:
    """[0, 2, 2^2^2, 2^2^2^3, ...]: a_i is a tower of i twos with i on top"""
    return TowerStream(2)


def sixteens_tower_stream() -> TowerStream:
    """b_i = g_i + offset_i with g_i a tower of i sixteens with i on top"""
    return TowerStream(16, SIXTEENS_OFFSETS)


# ---------------------------------------------------------------------------
# Convergents
# ---------------------------------------------------------------------------

def _convergent_steps(stream: PartialQuotientStream, n: int) -> Iterator[Convergent]:
    c_prev, c = 1, 0
    d_prev, d = 0, 1
    for i in range(1, n + 1):
        a = stream.quotient(i)
        c_prev, c = c, a * c + c_prev
        d_prev, d = d, a * d + d_prev
        yield Convergent(index=i, c=c, d=d)


def convergents(stream: PartialQuotientStream, n: int) -> List[Convergent]:
    """Convergents 1..n with c_i d_{i-1} - c_{i-1} d_i = (-1)^(i-1)"""
    result = list(_convergent_steps(stream, n))
    previous = Convergent(index=0, c=0, d=1)
    for conv in result:
        determinant = conv.c * previous.d - previous.c * conv.d
        if determinant != (-1) ** (conv.index - 1) or gcd(conv.c, conv.d) != 1:
            raise InternalConsistencyError(f"convergent {conv.index} breaks the determinant identity")
        previous = conv
    return result


@dataclass(frozen=True)
class RationalApproximation:
    """c_n / d_n with a certified radius |t - c_n/d_n| <= radius"""

    index: int
    exact: Fraction
    value: BigReal
    radius: Fraction


def approx_value(stream: PartialQuotientStream, n: int, ctx: PrecisionContext) -> RationalApproximation:
    """c_n/d_n with radius 1/(d_n d_{n+1}); radius 0 when the stream ends at n"""
    if n < 1:
        raise ValidationError(f"approximation index must be at least 1, got {n}")
    if stream.length is not None and n > stream.length:
        raise CapExceededError(f"stream has only {stream.length} partial quotients")
    exhausted = stream.length is not None and n == stream.length
    convs = convergents(stream, n if exhausted else n + 1)
    current = convs[n - 1]
    radius = Fraction(0) if exhausted else Fraction(1, current.d * convs[n].d)
    return RationalApproximation(
        index=n,
        exact=current.fraction,
        value=ctx.real(current.fraction),
        radius=radius,
    )


def expand_rational(t: Fraction, depth: int) -> List[int]:
    """Partial quotients a_1..a_k (k <= depth) of a rational t in (0, 1)"""
    if not 0 < t < 1:
        raise ValidationError(f"expansion needs t in (0, 1), got {t}")
    quotients: List[int] = []
    x = t
    while len(quotients) < depth and x != 0:
        x = 1 / x
        a = x.numerator // x.denominator
        quotients.append(a)
        x -= a
    return quotients


@dataclass
class ModConvergentPattern:
    """Residues (c_i mod m, d_i mod m) for i = 0, 1, ... with a detected period"""

    modulus: int
    residues: List[Tuple[int, int]] = field(default_factory=list)
    preperiod: Optional[int] = None
    period: Optional[int] = None

    def render(self) -> List[str]:
        return [f"{c}/{d}" for c, d in self.residues]

    def cycle(self) -> List[Tuple[int, int]]:
        if self.period is None:
            return []
        return self.residues[self.preperiod:self.preperiod + self.period]


def iter_mod_convergents(stream: PartialQuotientStream, m: int) -> Iterator[Tuple[int, int, int]]:
    """Lazily yield (i, c_i mod m, d_i mod m) starting at i = 0"""
    c_prev, c = 1 % m, 0
    d_prev, d = 0, 1 % m
    yield 0, c, d
    for i in count(1):
        if stream.length is not None and i > stream.length:
            return
        a = stream.residue(i, m)
        c_prev, c = c, (a * c + c_prev) % m
        d_prev, d = d, (a * d + d_prev) % m
        yield i, c, d


def _minimize(residues: List[Tuple[int, int]], preperiod: int, period: int) -> Tuple[int, int]:
    for candidate in range(1, period + 1):
        if period % candidate:
            continue
        if all(residues[i] == residues[i + candidate]
               for i in range(preperiod, len(residues) - candidate)):
            period = candidate
            break
    while preperiod > 0 and residues[preperiod - 1] == residues[preperiod - 1 + period]:
        preperiod -= 1
    return preperiod, period


def mod_convergents(stream: PartialQuotientStream, m: int, max_terms: int = 10_000) -> ModConvergentPattern:
    """Residue pairs of the convergents modulo m and their eventual period

    The recurrence state (phase of a_i mod m, c_{i-1}, c_i, d_{i-1}, d_i) is
    finite once a_i mod m is eventually periodic, so a repeated state fixes the
    period; without a declared residue period the residues are produced up to
    max_terms or the stream's materializable depth.
    """
    if m < 2:
        raise ValidationError(f"modulus must be at least 2, got {m}")
    shape = stream.residue_period(m)
    pattern = ModConvergentPattern(modulus=m)
    seen: Dict[Tuple[int, ...], int] = {}
    previous = (1 % m, 0)
    try:
        for i, c, d in iter_mod_convergents(stream, m):
            pattern.residues.append((c, d))
            if shape is not None and i >= shape[0]:
                pre, per = shape
                phase = (i - pre) % per
                key = (phase, previous[0], c, previous[1], d)
                if key in seen:
                    start = seen[key]
                    span = i - start
                    # extend by one period so minimization can look ahead
                    for j, cj, dj in iter_mod_convergents(stream, m):
                        if j <= i:
                            continue
                        pattern.residues.append((cj, dj))
                        if j >= i + span:
                            break
                    pattern.preperiod, pattern.period = _minimize(pattern.residues, start, span)
                    pattern.residues = pattern.residues[: pattern.preperiod + 2 * pattern.period]
                    break
                seen[key] = i
            previous = (c, d)
            if i >= max_terms:
                break
    except CapExceededError as exc:
        logger.warning("residue stream stopped at materializable depth", error=exc.message)
    return pattern


# ---------------------------------------------------------------------------
# S-point construction
# ---------------------------------------------------------------------------

def build_S_point(
    kind: str,
    levels: int,
    pattern: Optional[ResiduePattern] = None,
    kappa: Fraction = Fraction(1),
    constant: int = 1,
    ctx: Optional[PrecisionContext] = None,
) -> Tuple[ThresholdStream, List[SetSCertificate]]:
    """Build a point of S, S_kappa, S-diamond or S-prime with one certificate per level"""
    if levels < 1:
        raise ValidationError(f"levels must be at least 1, got {levels}")
    stream = ThresholdStream(kind, pattern=pattern, kappa=kappa, constant=constant, ctx=ctx)
    certificates = stream.certificates(levels)
    logger.info(
        "S point built",
        kind=kind,
        levels=levels,
        denominators=[format_int(c.d) for c in certificates],
    )
    return stream, certificates
