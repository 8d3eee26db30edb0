"""
Verification Harness
Finite-index envelope checks for the convergence and divergence results

Purpose: Every check is a literal two-sided comparison at a finite index,
collected into a TraceReport whose pass flags drive the process exit status.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, log2
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from services.bigarith import (
    INFINITY,
    BigReal,
    CirclePoint,
    ExtendedComplex,
    PrecisionContext,
    at_least_phi_power,
    chordal_distance,
    circle_point,
    ensure_agreement,
    fifth_root,
    format_int,
    is_infinite,
)
from services.cfrac import (
    LOG2_PHI,
    Convergent,
    PartialQuotientStream,
    TowerStream,
    alpha_stream,
    convergents,
    expand_rational,
    mod_convergents,
)
from services.exceptions import (
    CapExceededError,
    PreconditionViolationError,
    ValidationError,
    WrongResidueClassError,
)
from services.rrcf import (
    ConvergentPair,
    PointLike,
    critical_tail,
    iter_pairs,
    odd_even_limits,
    realize,
    reciprocal_point,
    tail_modified,
)
from services.schur import (
    RootOfUnity,
    general_limit_class,
    r_catalog,
    r_from_residues,
    residue_representative,
    schur_eval,
)

logger = structlog.get_logger()

# Targets W_1..W_12 along one period of the alpha residue pattern
W_INDICES = (6, 7, 8, 9, 10, 2, 3, 4, 5, 1, 8, 7)
TEN_LIMIT_ENVELOPE = 500


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceRecord:
    """One bound check: lower <= measured <= upper"""

    index: int
    quantity: str
    measured: BigReal
    lower: Optional[BigReal]
    upper: Optional[BigReal]
    passed: bool

    @property
    def margin(self) -> Optional[BigReal]:
        gaps = []
        if self.upper is not None:
            gaps.append(self.upper - self.measured)
        if self.lower is not None:
            gaps.append(self.measured - self.lower)
        return min(gaps) if gaps else None


@dataclass
class TraceReport:
    experiment: str
    records: List[TraceRecord] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def check(
        self,
        index: int,
        quantity: str,
        measured: BigReal,
        ctx: PrecisionContext,
        lower: Optional[BigReal] = None,
        upper: Optional[BigReal] = None,
        strict: bool = False,
        passed: Optional[bool] = None,
    ) -> TraceRecord:
        """Append a record; non-strict bounds allow the context tolerance"""
        if passed is None:
            passed = True
            if lower is not None:
                slack = 0 if strict else ctx.tolerance * max(1, abs(lower))
                passed = passed and measured >= lower - slack
            if upper is not None:
                if strict:
                    passed = passed and measured < upper
                else:
                    passed = passed and measured <= upper + ctx.tolerance * max(1, abs(upper))
        record = TraceRecord(index, quantity, measured, lower, upper, bool(passed))
        self.records.append(record)
        if not record.passed:
            logger.warning("bound violated", experiment=self.experiment, index=index, quantity=quantity)
        return record

    @property
    def all_pass(self) -> bool:
        return all(record.passed for record in self.records)

    @property
    def failures(self) -> List[TraceRecord]:
        return [record for record in self.records if not record.passed]

    @property
    def worst_margin(self) -> Optional[BigReal]:
        margins = [record.margin for record in self.records if record.margin is not None]
        return min(margins) if margins else None

    def merge(self, other: "TraceReport") -> "TraceReport":
        return TraceReport(
            experiment=f"{self.experiment}+{other.experiment}",
            records=self.records + other.records,
            metadata={**self.metadata, **other.metadata},
        )


def merge_reports(reports: Sequence[TraceReport], experiment: str) -> TraceReport:
    merged = TraceReport(experiment=experiment)
    for report in reports:
        merged.records.extend(report.records)
        merged.metadata.update(report.metadata)
    return merged


# ---------------------------------------------------------------------------
# Walk helpers
# ---------------------------------------------------------------------------

def collect_states(point: PointLike, indices: Iterable[int], ctx: PrecisionContext,
                   check: bool = True) -> Dict[int, ConvergentPair]:
    """States at the requested indices, compared against a doubled-precision walk"""
    wanted = sorted(set(indices))
    if not wanted or wanted[0] < 0:
        raise ValidationError("state indices must be non-negative")

    def run(context: PrecisionContext) -> Dict[int, ConvergentPair]:
        value, angle = realize(point, context)
        found: Dict[int, ConvergentPair] = {}
        targets = set(wanted)
        for state in iter_pairs(value, context, angle):
            if state.n in targets:
                found[state.n] = state
            if state.n >= wanted[-1]:
                return found
        return found

    coarse = run(ctx)
    if check:
        fine = run(ctx.doubled())
        for n in wanted:
            ensure_agreement(coarse[n].p, fine[n].p, ctx, f"P_{n}")
            ensure_agreement(coarse[n].q, fine[n].q, ctx, f"Q_{n}")
    return coarse


def _phi_power(ctx: PrecisionContext, k) -> BigReal:
    return ctx.phi ** k


def _root_residue_class(root: RootOfUnity) -> int:
    if root.m % 5 == 0:
        raise WrongResidueClassError(f"m = {root.m} is a multiple of 5")
    return 1 if root.m % 5 in (1, 4) else 2


def _block_index(n: int, m: int) -> Tuple[int, bool]:
    """(q, ends_block) for n = qm + m - 1 (True) or n = qm + m - 2 (False)"""
    if (n + 1) % m == 0:
        return (n + 1) // m - 1, True
    if m >= 2 and (n + 2) % m == 0:
        return (n + 2) // m - 1, False
    raise PreconditionViolationError(f"n = {n} is neither qm + m - 1 nor qm + m - 2 for m = {m}")


# ---------------------------------------------------------------------------
# Lemma suites
# ---------------------------------------------------------------------------

def check_lipschitz(x: CirclePoint, y: CirclePoint, N: int, ctx: PrecisionContext) -> TraceReport:
    """|Q_n(x) - Q_n(y)| <= n^2 phi^n |x - y| and |P_n(x) - P_n(y)| <= (n+1)^2 phi^(n+1) |x - y|"""
    if N < 0:
        raise ValidationError(f"N must be non-negative, got {N}")
    report = TraceReport(experiment="lipschitz", metadata={"N": N, "x": str(x.angle), "y": str(y.angle)})
    indices = range(N + 1)
    at_x = collect_states(x, indices, ctx)
    at_y = collect_states(y, indices, ctx)
    gap = abs(ctx.mp.mpc(x.value) - ctx.mp.mpc(y.value))
    for n in indices:
        report.check(n, "Q", abs(at_x[n].q - at_y[n].q), ctx, upper=n * n * _phi_power(ctx, n) * gap)
        report.check(n, "P", abs(at_x[n].p - at_y[n].p), ctx,
                     upper=(n + 1) ** 2 * _phi_power(ctx, n + 1) * gap)
    return report


def check_growth(root: RootOfUnity, q_max: int, ctx: PrecisionContext) -> TraceReport:
    """Growth of |Q| along n = qm + m - 1 and qm + m - 2, 2 <= q <= q_max"""
    residue_class = _root_residue_class(root)
    if q_max < 2:
        raise ValidationError(f"q_max must be at least 2, got {q_max}")
    m = root.m
    report = TraceReport(experiment="growth", metadata={"m": m, "k": root.k, "q_max": q_max})
    states = collect_states(root.point(ctx), [q * m + m - 1 for q in range(2, q_max + 1)], ctx)
    phi_sq = ctx.phi ** 2
    for q in range(2, q_max + 1):
        state = states[q * m + m - 1]
        q_last, q_before = abs(state.q), abs(state.q_prev)
        report.check(q, "Q_qm+m-1", q_last, ctx, lower=_phi_power(ctx, q - 1), upper=_phi_power(ctx, q))
        if residue_class == 1:
            report.check(q, "Q_qm+m-2", q_before, ctx,
                         lower=_phi_power(ctx, q - 2), upper=_phi_power(ctx, q - 1))
        else:
            report.check(q, "Q_qm+m-2", q_before, ctx,
                         lower=_phi_power(ctx, q), upper=_phi_power(ctx, q + 1))
        report.check(q, "ratio", q_last / q_before, ctx, lower=1 / phi_sq, upper=phi_sq)
    return report


def check_K_rate(root: RootOfUnity, q_max: int, ctx: PrecisionContext) -> TraceReport:
    """Approach of K_n and R_n to the closed-form limit along the two block subsequences

    For m = +-2 (mod 5) the n = qm + m - 2 distance equals
    sqrt5 / (phi^(2q+4) (1 -+ phi^-(2q+4))), so that subsequence is held to
    [phi^-(2q+3), phi^-(2q+2)].
    """
    residue_class = _root_residue_class(root)
    if q_max < 2:
        raise ValidationError(f"q_max must be at least 2, got {q_max}")
    m = root.m
    limit = schur_eval(root, ctx)
    point = root.point(ctx)
    root5 = fifth_root(point.value, point.angle, ctx)
    report = TraceReport(experiment="k-rate", metadata={"m": m, "k": root.k, "q_max": q_max})
    states = collect_states(point, [q * m + m - 1 for q in range(2, q_max + 1)], ctx)
    for q in range(2, q_max + 1):
        state = states[q * m + m - 1]
        k_last = state.p / state.q
        k_before = state.p_prev / state.q_prev
        report.check(q, "K_qm+m-1", abs(k_last - limit.k_value), ctx,
                     lower=1 / _phi_power(ctx, 2 * q + 1), upper=1 / _phi_power(ctx, 2 * q))
        if residue_class == 1:
            lower, upper = 1 / _phi_power(ctx, 2 * q - 1), 1 / _phi_power(ctx, 2 * q - 2)
        else:
            lower, upper = 1 / _phi_power(ctx, 2 * q + 3), 1 / _phi_power(ctx, 2 * q + 2)
        report.check(q, "K_qm+m-2", abs(k_before - limit.k_value), ctx, lower=lower, upper=upper)
        r_distance = max(abs(root5 / k_last - limit.r_value), abs(root5 / k_before - limit.r_value))
        report.check(q, "R", r_distance, ctx, upper=1 / _phi_power(ctx, 2 * q - 6))
    return report


def check_perturbation(
    root: RootOfUnity,
    y: CirclePoint,
    n: int,
    ctx: PrecisionContext,
    epsilon: Optional[Fraction] = None,
) -> TraceReport:
    """Perturbation envelopes for K_n and R_n when P_n, Q_n move by at most epsilon"""
    m = root.m
    q, _ = _block_index(n, m)
    if q < 2:
        raise PreconditionViolationError(f"perturbation bounds need q >= 2, got q = {q}")
    x = root.point(ctx)
    at_x = collect_states(x, [n], ctx)[n]
    at_y = collect_states(y, [n], ctx)[n]
    measured_eps = max(abs(at_y.p - at_x.p), abs(at_y.q - at_x.q))
    eps = ctx.real(epsilon) if epsilon is not None else measured_eps
    if measured_eps > eps + ctx.tolerance:
        raise PreconditionViolationError(
            f"P_n and Q_n move by {ctx.mp.nstr(measured_eps, 5)}, more than epsilon"
        )
    if eps >= ctx.real(Fraction(1, 2)):
        raise PreconditionViolationError("perturbation bounds need epsilon < 1/2")

    report = TraceReport(experiment="perturb", metadata={"m": m, "k": root.k, "n": n, "q": q,
                                                         "y": str(y.angle)})
    k_x = at_x.p / at_x.q
    k_y = at_y.p / at_y.q
    report.check(n, "K_n(y)-K_n(x)", abs(k_y - k_x), ctx, upper=10 * eps / _phi_power(ctx, q - 2))

    premises = {
        "q >= 3": q >= 3,
        "angle < 5pi/3": abs(Fraction(y.angle) - root.angle) < Fraction(5, 6),
        "epsilon <= 1/(20 phi^2)": eps <= 1 / (20 * ctx.phi ** 2),
    }
    unmet = [name for name, ok in premises.items() if not ok]
    if unmet:
        report.metadata["r_bounds_skipped"] = unmet
        logger.warning("R perturbation bounds skipped", unmet=unmet, m=m, n=n)
        return report

    gap = abs(ctx.mp.mpc(x.value) - ctx.mp.mpc(y.value))
    r_x = fifth_root(x.value, x.angle, ctx) / k_x
    r_y = fifth_root(y.value, y.angle, ctx) / k_y
    envelope = 3 * ctx.phi * gap + 60 * eps / _phi_power(ctx, q - 4)
    report.check(n, "R_n(y)-R_n(x)", abs(r_y - r_x), ctx, upper=envelope)
    limit = schur_eval(root, ctx).r_value
    report.check(n, "R_n(y)-R(x)", abs(r_y - limit), ctx,
                 upper=envelope + 1 / _phi_power(ctx, 2 * q - 3))
    return report


# ---------------------------------------------------------------------------
# Constructed points
# ---------------------------------------------------------------------------

def _reachable_convergents(stream: PartialQuotientStream, levels: int) -> List[Convergent]:
    """Convergents 1..L+1 for the largest L <= levels that can be materialized"""
    reached: List[Convergent] = []
    for n in range(1, levels + 2):
        try:
            reached = convergents(stream, n)
        except CapExceededError as exc:
            logger.warning("construction reached its materializable depth",
                           depth=n - 2, error=exc.message)
            break
    return reached


def _level_bits(exponent: int, ctx: PrecisionContext) -> PrecisionContext:
    bits = ceil(2 * exponent * LOG2_PHI) + 256
    return ctx.with_bits(max(ctx.bits, bits))


def divergence_trace(stream: PartialQuotientStream, levels: int, ctx: PrecisionContext) -> TraceReport:
    """|Q_{d-1}(y)| < 6, |Q_{d-2}(y)| < 6 and their product < 36 at each level

    y = exp(2 pi i t) with t truncated at c_{L+1}/d_{L+1}; each level also
    records the approximation radius, the boundary bound at x_n = e(c_n/d_n)
    and both perturbation steps from x_n to y.
    """
    if levels < 1:
        raise ValidationError(f"levels must be at least 1, got {levels}")
    convs = convergents(stream, levels + 1)
    truncation = convs[levels].fraction
    work = _level_bits(convs[levels - 1].d, ctx)
    y = circle_point(truncation, work)
    states = collect_states(y, [conv.d - 1 for conv in convs[:levels]], work)
    report = TraceReport(
        experiment="diverge",
        metadata={"levels": levels, "bits": work.bits, "reachable_depth": levels,
                  "denominators": [format_int(conv.d) for conv in convs[:levels]]},
    )
    mp = work.mp
    for conv in convs[:levels]:
        level, d = conv.index, conv.d
        next_quotient = stream.quotient(level + 1)
        report.check(level, "a_{n+1} >= phi^d_n", work.real(next_quotient.bit_length()), work,
                     lower=work.real(d) * mp.log(work.phi, 2),
                     passed=at_least_phi_power(next_quotient, d))
        radius = abs(truncation - conv.fraction)
        report.check(level, "radius", work.real(radius), work,
                     upper=1 / (work.real(d) ** 2 * _phi_power(work, d)), strict=True)

        x_n = collect_states(circle_point(conv.fraction, work), [d - 1], work, check=False)[d - 1]
        at_y = states[d - 1]
        report.check(level, "|Q_d-1(x_n)|", abs(x_n.q), work, upper=2)
        report.check(level, "|Q_d-2(x_n)|", abs(x_n.q_prev), work, upper=2)
        report.check(level, "in1", abs(x_n.q - at_y.q), work, upper=4, strict=True)
        report.check(level, "in2", abs(x_n.q_prev - at_y.q_prev), work, upper=4, strict=True)
        report.check(level, "|Q_d-1(y)|", abs(at_y.q), work, upper=6, strict=True)
        report.check(level, "|Q_d-2(y)|", abs(at_y.q_prev), work, upper=6, strict=True)
        report.check(level, "product", abs(at_y.q * at_y.q_prev), work, upper=36, strict=True)
        logger.info("divergence level certified" if report.all_pass else "divergence level failed",
                    level=level, d=format_int(d), product=mp.nstr(abs(at_y.q * at_y.q_prev), 8))
    return report


def _radius_exponent_bound(d: int) -> int:
    """Integer B with 2^B >= 2 pi (d+1)^2 phi^(d^2 + 2d)"""
    return ((d * d + 2 * d) * 6943 + 9999) // 10000 + 2 * (d + 1).bit_length() + 3


def tower_point_certificates(stream: TowerStream, levels: int, ctx: PrecisionContext) -> TraceReport:
    """Exact partial-quotient inequalities for the towers of twos and sixteens"""
    if not isinstance(stream, TowerStream):
        raise ValidationError("tower certificates need a tower stream")
    convs = _reachable_convergents(stream, levels)
    report = TraceReport(experiment="tower-certificates",
                         metadata={"base": stream.base, "reachable_depth": len(convs)})
    one = ctx.real(1)
    for conv in convs[:levels]:
        i, d = conv.index, conv.d
        following = stream.tower(i + 1)
        if stream.base == 2:
            holds = following.exceeds_power(2, d)
            report.check(i, "a_{i+1} >= 2^d_i", one if holds else 0 * one, ctx, lower=one, passed=holds)
            if i >= 3:
                holds = following.exceeds_power(16, d * d)
                report.check(i, "a_{i+1} > 16^(d_i^2)", one if holds else 0 * one, ctx,
                             lower=one, passed=holds)
                holds = following.exceeds_power(2, _radius_exponent_bound(d))
                report.check(i, "radius", one if holds else 0 * one, ctx, lower=one, passed=holds)
        else:
            holds = following.exceeds_power(stream.base, d * d)
            report.check(i, "g_{i+1} >= 16^(d_i^2)", one if holds else 0 * one, ctx,
                         lower=one, passed=holds)
    if stream.offsets is not None:
        alpha = alpha_stream()
        for i in range(1, 25):
            residue = stream.residue(i, 5)
            report.check(i, "b_i = alpha_i (mod 5)", ctx.real(residue), ctx,
                         passed=residue == alpha.quotient(i) % 5)
    return report


def _w_index(level: int) -> int:
    return W_INDICES[(level - 1) % len(W_INDICES)]


def _residue_targets(ctx: PrecisionContext, report: TraceReport) -> None:
    pattern = mod_convergents(alpha_stream(), 5)
    targeted = set()
    for position in range(1, 13):
        c, d = pattern.residues[position]
        index = r_from_residues(c, d, ctx)
        expected = _w_index(position)
        targeted.add(index)
        representative = residue_representative(c, d)
        report.check(position, f"R at {representative[0]}/{representative[1]}",
                     ctx.real(index if index is not None else 0), ctx,
                     lower=ctx.real(expected), upper=ctx.real(expected))
    report.check(0, "targeted catalog values", ctx.real(len(targeted)), ctx,
                 passed=targeted == set(range(1, 11)))


def _level_walk_bits(d: int, ctx: PrecisionContext) -> PrecisionContext:
    k = d * d + d
    bits = ceil(k * LOG2_PHI) + 2 * k.bit_length() + 256
    return ctx.with_bits(max(ctx.bits, bits))


def ten_limits_trace(stream: PartialQuotientStream, levels: int, ctx: PrecisionContext) -> TraceReport:
    """R_{d^2+d-1}(y) and R_{d^2+d-2}(y) against W_j within 500/phi^(2d) per level"""
    if levels < 1:
        raise ValidationError(f"levels must be at least 1, got {levels}")
    convs = _reachable_convergents(stream, levels)
    reachable = len(convs) - 1
    if reachable < 1:
        raise CapExceededError("no level of the construction can be materialized")
    truncation = convs[reachable].fraction
    work = _level_walk_bits(convs[reachable - 1].d, ctx)
    y = circle_point(truncation, work)
    y_root = fifth_root(y.value, y.angle, work)
    k_of = {conv.index: conv.d * conv.d + conv.d - 1 for conv in convs[:reachable]}
    states = collect_states(y, k_of.values(), work)
    report = TraceReport(
        experiment="ten-limits",
        metadata={"levels": levels, "reachable_depth": reachable, "bits": work.bits,
                  "denominators": [format_int(conv.d) for conv in convs[:reachable]]},
    )
    for conv in convs[:reachable]:
        level, d = conv.index, conv.d
        k = k_of[level]
        target = r_catalog(_w_index(level), work)
        envelope = TEN_LIMIT_ENVELOPE / _phi_power(work, 2 * d)
        at_y = states[k]
        x_n = collect_states(circle_point(conv.fraction, work), [k], work, check=False)[k]
        eps = 1 / _phi_power(work, d)
        report.check(level, "P_k(x_n)-P_k(y)", abs(x_n.p - at_y.p), work, upper=eps)
        report.check(level, "Q_k(x_n)-Q_k(y)", abs(x_n.q - at_y.q), work, upper=eps)
        limit = schur_eval(RootOfUnity(conv.c, d), work)
        report.check(level, "R(x_n)-W_j", abs(limit.r_value - target), work,
                     upper=work.real(Fraction(1, 10**10)))
        report.check(level, "R_k(y)-W_j", abs(y_root * at_y.q / at_y.p - target), work, upper=envelope)
        report.check(level, "R_k-1(y)-W_j", abs(y_root * at_y.q_prev / at_y.p_prev - target), work,
                     upper=envelope)
    pattern = mod_convergents(stream, 5)
    reference = mod_convergents(alpha_stream(), 5)
    report.check(0, "residue period", ctx.real(pattern.period or 0), ctx,
                 passed=pattern.cycle() == reference.cycle() and pattern.period == 12)
    _residue_targets(ctx, report)
    return report


# ---------------------------------------------------------------------------
# General divergence probe
# ---------------------------------------------------------------------------

TailSequence = Callable[[ConvergentPair], ExtendedComplex]


@dataclass(frozen=True)
class CandidatePair:
    name: str
    v: TailSequence
    w: TailSequence


def constant_pair(v: complex, w: complex) -> CandidatePair:
    return CandidatePair(name=f"({v}, {w})", v=lambda state: v, w=lambda state: w)


def forced_tail_pair(offset: Fraction = Fraction(1, 2)) -> CandidatePair:
    """v_n on the forced tail -Q_n/Q_{n-1}, w_n = v_n (1 + offset^n)"""

    def forced(state: ConvergentPair) -> ExtendedComplex:
        h = critical_tail(state)
        return INFINITY if is_infinite(h) else -h

    def nearby(state: ConvergentPair) -> ExtendedComplex:
        tail = forced(state)
        if is_infinite(tail):
            return tail
        return tail * (1 + state.ctx.real(offset) ** state.n)

    return CandidatePair(name=f"forced(1 + {offset}^n)", v=forced, w=nearby)


@dataclass
class ProbeOutcome:
    """Forced tails -Q_n/Q_{n-1} along n_i = d_i^2 + d_i - 1 and the candidates' response"""

    indices: List[int]
    forced_tails: List[ExtendedComplex]
    subsequences: Dict[int, List[int]]
    r_distances: Dict[int, List[BigReal]]
    v_sums: Dict[str, List[BigReal]]
    w_sums: Dict[str, List[BigReal]]
    distances: Dict[str, List[BigReal]]
    limit_gaps: Dict[str, List[BigReal]]
    candidate_verdicts: Dict[str, str]
    targets: Tuple[int, int]
    verdict: str
    report: TraceReport


def _non_increasing(values: Sequence[BigReal]) -> bool:
    return all(later <= earlier for earlier, later in zip(values, values[1:]))


def _tail_gap(tail: ExtendedComplex, h: ExtendedComplex, ctx: PrecisionContext) -> BigReal:
    if is_infinite(tail) or is_infinite(h):
        return ctx.mp.zero if is_infinite(tail) and is_infinite(h) else ctx.mp.inf
    return abs(ctx.mp.mpc(tail) + h)


def judge_candidate(
    limit_gaps: Sequence[BigReal],
    distances: Sequence[BigReal],
    v_sums: Sequence[BigReal],
    w_sums: Sequence[BigReal],
    bound: BigReal,
) -> str:
    """Classify how a candidate pair behaves along the two subsequences

    limit_gaps holds d(S_a(v), S_b(v)) and d(S_a(w), S_b(w)) between the
    deepest levels of the two subsequences; an empty list means only one
    subsequence was reached.
    """
    if any(gap >= bound for gap in limit_gaps):
        return "no-common-limit"
    if distances and _non_increasing(distances) and distances[-1] < bound:
        return "pulled-together"
    if _non_increasing(v_sums) and _non_increasing(w_sums):
        return "pulled-to-forced-tail"
    return "counterexample"


def general_divergence_probe(
    stream: PartialQuotientStream,
    levels: int,
    ctx: PrecisionContext,
    candidates: Optional[Sequence[CandidatePair]] = None,
    monotone_from: int = 0,
    separation: Fraction = Fraction(1, 1000),
    positions: Tuple[int, int] = (1, 2),
) -> ProbeOutcome:
    """Walk two residue subsequences of levels toward distinct catalog values and test candidate tails

    Levels at the given positions of the residue period form the two
    subsequences, and R_{n_i}(y) along each is measured against its target W.
    A candidate has no common limit when S_n(v) or S_n(w) lands chordally
    apart on the two subsequences. Otherwise d(v, w) has to shrink below the
    separation, or both |v + Q_n/Q_{n-1}| and |w + Q_n/Q_{n-1}| have to be
    non-increasing from monotone_from on; a candidate doing neither makes
    the verdict inconclusive.
    """
    candidates = list(candidates) if candidates else [constant_pair(1, 2), forced_tail_pair()]
    period = len(W_INDICES)
    if positions[0] < 1 or positions[1] < 1 or (positions[0] - positions[1]) % period == 0:
        raise ValidationError(f"positions must be distinct levels mod {period}, got {positions}")
    convs = _reachable_convergents(stream, levels)
    reachable = len(convs) - 1
    if reachable < 1:
        raise CapExceededError("no level of the construction can be materialized")
    levels_used = convs[:reachable]
    targets = (_w_index(positions[0]), _w_index(positions[1]))
    work = _level_walk_bits(levels_used[-1].d, ctx)
    y = circle_point(convs[reachable].fraction, work)
    y_root = fifth_root(y.value, y.angle, work)
    indices = [conv.d * conv.d + conv.d - 1 for conv in levels_used]
    states = collect_states(y, indices, work)
    report = TraceReport(experiment="general-probe",
                         metadata={"reachable_depth": reachable, "indices": indices, "bits": work.bits,
                                   "positions": list(positions)})

    subsequences: Dict[int, List[int]] = {p: [] for p in positions}
    r_distances: Dict[int, List[BigReal]] = {p: [] for p in positions}
    deepest_r: Dict[int, ExtendedComplex] = {}
    deepest_s: Dict[str, Dict[int, Tuple[ExtendedComplex, ExtendedComplex]]] = {
        pair.name: {} for pair in candidates
    }
    forced: List[ExtendedComplex] = []
    v_sums: Dict[str, List[BigReal]] = {pair.name: [] for pair in candidates}
    w_sums: Dict[str, List[BigReal]] = {pair.name: [] for pair in candidates}
    distances: Dict[str, List[BigReal]] = {pair.name: [] for pair in candidates}
    phi_sq = work.phi ** 2
    for conv, n in zip(levels_used, indices):
        state = states[n]
        h = critical_tail(state)
        forced.append(INFINITY if is_infinite(h) else -h)
        d = conv.d
        eps = 1 / _phi_power(work, d)
        floor = _phi_power(work, d - 2)
        if not is_infinite(h) and floor > eps:
            delta = eps * (1 + phi_sq) / (floor - eps)
            report.check(conv.index, "|Q_n/Q_n-1|", abs(h), work, lower=1 / phi_sq - delta,
                         upper=phi_sq + delta)
        position = next((p for p in positions if (conv.index - p) % period == 0), None)
        if position is not None:
            r_value = y_root * state.q / state.p
            distance = abs(r_value - r_catalog(_w_index(position), work))
            subsequences[position].append(conv.index)
            r_distances[position].append(distance)
            deepest_r[position] = r_value
            report.check(conv.index, f"R_n(y)-W[{position}]", distance, work,
                         upper=TEN_LIMIT_ENVELOPE / _phi_power(work, 2 * d))
        for pair in candidates:
            v, w = pair.v(state), pair.w(state)
            v_sums[pair.name].append(_tail_gap(v, h, work))
            w_sums[pair.name].append(_tail_gap(w, h, work))
            distances[pair.name].append(chordal_distance(v, w, work))
            if position is not None:
                deepest_s[pair.name][position] = (tail_modified(state, v), tail_modified(state, w))

    for position in positions:
        report.check(0, f"R_n(y)-W[{position}] shrinks", work.real(len(r_distances[position])), work,
                     passed=_non_increasing(r_distances[position]))
    both_reached = len(deepest_r) == 2
    if both_reached:
        first, second = (deepest_r[p] for p in positions)
        report.check(0, "|R_a(y) - R_b(y)|", abs(first - second), work, lower=work.real(Fraction(1, 10)))
    else:
        logger.warning("general divergence probe reached only one subsequence",
                       positions=list(positions), reachable=reachable)

    bound = work.real(separation)
    limit_gaps: Dict[str, List[BigReal]] = {}
    candidate_verdicts: Dict[str, str] = {}
    for pair in candidates:
        values = deepest_s[pair.name]
        gaps = [chordal_distance(values[positions[0]][i], values[positions[1]][i], work)
                for i in (0, 1)] if both_reached else []
        limit_gaps[pair.name] = gaps
        candidate_verdicts[pair.name] = judge_candidate(
            gaps,
            distances[pair.name][monotone_from:],
            v_sums[pair.name][monotone_from:],
            w_sums[pair.name][monotone_from:],
            bound,
        )
    consistent = report.all_pass and both_reached and "counterexample" not in candidate_verdicts.values()
    verdict = "general-divergence-consistent" if consistent else "inconclusive"
    logger.info("general divergence probe finished", verdict=verdict, levels=reachable,
                candidates=candidate_verdicts)
    return ProbeOutcome(
        indices=indices,
        forced_tails=forced,
        subsequences=subsequences,
        r_distances=r_distances,
        v_sums=v_sums,
        w_sums=w_sums,
        distances=distances,
        limit_gaps=limit_gaps,
        candidate_verdicts=candidate_verdicts,
        targets=targets,
        verdict=verdict,
        report=report,
    )


def check_general_convergence(root: RootOfUnity, ctx: PrecisionContext, factor: int = 60,
                              tolerance: Fraction = Fraction(1, 10**8)) -> TraceReport:
    """S_n(M+1) and S_n(M+2) at n = factor * m against the classified limit"""
    if root.m % 5:
        raise WrongResidueClassError(f"general convergence needs 5 | m, got m = {root.m}")
    limit_class = general_limit_class(root, ctx)
    n = factor * root.m
    state = collect_states(root.point(ctx), [n], ctx)[n]
    report = TraceReport(experiment="general-convergence",
                         metadata={"m": root.m, "k": root.k, "n": n,
                                   "limit": "infinity" if is_infinite(limit_class.limit) else "0",
                                   "M": ctx.mp.nstr(limit_class.M, 12)})
    bound = ctx.real(tolerance)
    for name, tail in (("S_n(M+1)", limit_class.v), ("S_n(M+2)", limit_class.w)):
        value = tail_modified(state, tail)
        report.check(n, name, chordal_distance(value, limit_class.limit, ctx), ctx, upper=bound, strict=True)
    return report


# ---------------------------------------------------------------------------
# Outside the circle
# ---------------------------------------------------------------------------

def ratio_blowup_probe(x: PointLike, N: int, ctx: PrecisionContext) -> TraceReport:
    """Parity ratios r_n = B_n/B_{n-1} of 1/K(1/x) = 1/(1 + z/(1 + z^2/(1 + ...))), z = 1/x

    The recurrence identities r_{2n}(r_{2n+1} - 1) = a_{2n+1} and
    r_{2n-1}(r_{2n} - 1) = a_{2n} are checked, along with both bounded-coefficient
    conditions and the odd/even gap.
    """
    limits = odd_even_limits(x, N, ctx)
    report = TraceReport(experiment="outside", metadata={"x": str(x), "N": N,
                                                         "worpitsky": limits.worpitsky})
    report.check(0, "odd-F1", limits.odd_error, ctx, upper=ctx.real(Fraction(1, 10**15)))
    report.check(0, "even-F2", limits.even_error, ctx, upper=ctx.real(Fraction(1, 10**15)))
    report.check(0, "gap", limits.gap, ctx, lower=ctx.real(Fraction(1, 10**6)))

    mp = ctx.mp
    z, _ = realize(reciprocal_point(x), ctx)
    a = [None, mp.mpc(1)] + [z ** (n - 1) for n in range(2, N + 2)]
    b_prev, b = mp.mpc(0), mp.mpc(1)
    ratios: List = [None]
    for n in range(1, N + 2):
        b_prev, b = b, b + a[n] * b_prev
        ratios.append(b / b_prev)
    report.check(0, "con1 |b_i|", mp.one, ctx, lower=mp.one, upper=mp.one)
    reference = 1 / abs(mp.mpc(realize(x, ctx)[0]))
    for i in range(1, N // 2):
        report.check(i, "con2 |a_2i+1/a_2i|", abs(a[2 * i + 1] / a[2 * i]), ctx, upper=reference)
    for n in range(1, N // 2):
        even, odd_next, odd_prev = ratios[2 * n], ratios[2 * n + 1], ratios[2 * n - 1]
        residual_even = abs(even * (odd_next - 1) - a[2 * n + 1]) / max(mp.one, abs(even * odd_next))
        residual_odd = abs(odd_prev * (even - 1) - a[2 * n]) / max(mp.one, abs(odd_prev * even))
        report.check(n, "r_2n(r_2n+1 - b) = a_2n+1", residual_even, ctx, upper=ctx.tolerance)
        report.check(n, "r_2n-1(r_2n - b) = a_2n", residual_odd, ctx, upper=ctx.tolerance)
    report.metadata["r_even"] = [mp.nstr(abs(ratios[2 * n]), 6) for n in range(1, min(N // 2, 12))]
    report.metadata["r_odd"] = [mp.nstr(abs(ratios[2 * n + 1]), 6) for n in range(1, min(N // 2, 12))]
    return report


# ---------------------------------------------------------------------------
# Measure sampler
# ---------------------------------------------------------------------------

SAMPLER_RULES = ("constant", "S", "S-kappa", "S-star")
SAMPLE_BITS = 248


@dataclass(frozen=True)
class SamplerResult:
    rule: str
    depth: int
    samples: int
    seed: int
    hits: int
    frequency: float
    tail_frequencies: Tuple[float, ...]
    partial_sums: Tuple[str, ...]


def _sample_points(samples: int, seed: int) -> List[Fraction]:
    rng = np.random.default_rng(seed)
    words = rng.integers(0, 2**62, size=(samples, 4), dtype=np.int64)
    points = []
    for row in words:
        numerator = 0
        for word in row:
            numerator = (numerator << 62) | int(word)
        numerator = (numerator >> (4 * 62 - SAMPLE_BITS)) | 1
        points.append(Fraction(numerator, 1 << SAMPLE_BITS))
    return points


def _meets(rule: str, a: int, d: int, i: int, ctx: PrecisionContext, constant: Fraction,
           kappa: Fraction, fib: List[int]) -> bool:
    if rule == "constant":
        return a >= constant
    if rule == "S":
        return at_least_phi_power(a, d)
    if rule == "S-star":
        return at_least_phi_power(a, fib[i + 1])
    if d * LOG2_PHI + log2(kappa) > a.bit_length() + 1:
        return False
    work = ctx.with_bits(max(ctx.bits, a.bit_length() + 64))
    return work.real(a) >= work.real(kappa) * work.phi ** d


def measure_sampler(
    rule: str,
    depth: int,
    samples: int,
    seed: int,
    ctx: PrecisionContext,
    constant: Fraction = Fraction(1),
    kappa: Fraction = Fraction(1),
) -> SamplerResult:
    """Fraction of sampled t with a_{i+1} clearing the rule's threshold for some i <= depth

    t is drawn uniformly on a 2^-248 grid; levels are only counted while
    d_{i+1}^2 stays below the grid resolution so the expansion is that of
    every real in the grid cell. tail_frequencies[s] restricts to i >= s + 1.
    """
    if rule not in SAMPLER_RULES:
        raise ValidationError(f"unknown threshold rule {rule!r}; expected one of {SAMPLER_RULES}")
    if samples < 100:
        raise ValidationError(f"samples must be at least 100, got {samples}")
    if depth < 1:
        raise ValidationError(f"depth must be at least 1, got {depth}")
    fib = [0, 1]
    while len(fib) < depth + 3:
        fib.append(fib[-1] + fib[-2])
    level_hits: List[List[int]] = []
    for t in _sample_points(samples, seed):
        quotients = expand_rational(t, depth + 1)
        d_prev, d = 0, 1
        hits_here: List[int] = []
        for i, a in enumerate(quotients, 1):
            d_prev, d = d, a * d + d_prev
            if i > depth or i >= len(quotients):
                break
            following = quotients[i]
            d_next = following * d + d_prev
            if (d_next * d_next).bit_length() >= SAMPLE_BITS:
                break
            if _meets(rule, following, d, i, ctx, constant, kappa, fib):
                hits_here.append(i)
        level_hits.append(hits_here)
    tail_frequencies = tuple(
        sum(1 for hits in level_hits if any(i >= start for i in hits)) / samples
        for start in range(1, depth + 1)
    )
    hits = sum(1 for found in level_hits if found)
    mp = ctx.mp
    partial, running = [], mp.zero
    for i in range(1, depth + 1):
        running += 1 / ctx.phi ** fib[i]
        partial.append(mp.nstr(running, 15))
    logger.info("measure sampler finished", rule=rule, depth=depth, samples=samples, hits=hits)
    return SamplerResult(
        rule=rule,
        depth=depth,
        samples=samples,
        seed=seed,
        hits=hits,
        frequency=hits / samples,
        tail_frequencies=tail_frequencies,
        partial_sums=tuple(partial),
    )
