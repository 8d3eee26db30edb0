"""
Unit Tests for the Verification Harness
Trace reports, lemma suites, constructed-point certificates and the sampler
"""

from fractions import Fraction

import pytest

from services.bigarith import circle_point, is_infinite
from services.cfrac import ThresholdStream, twos_tower_stream
from services.exceptions import (
    PreconditionViolationError,
    ValidationError,
    WrongResidueClassError,
)
from services.rrcf import critical_tail, tail_modified, walk_to
from services.schur import RootOfUnity
from services.verify import (
    CandidatePair,
    TraceReport,
    check_general_convergence,
    check_growth,
    check_K_rate,
    check_lipschitz,
    check_perturbation,
    collect_states,
    constant_pair,
    divergence_trace,
    forced_tail_pair,
    general_divergence_probe,
    judge_candidate,
    measure_sampler,
    merge_reports,
    ratio_blowup_probe,
    ten_limits_trace,
    tower_point_certificates,
)


@pytest.mark.unit
class TestTraceReport:
    """Test bound records and report aggregation"""

    def test_non_strict_bound_allows_tolerance(self, ctx):
        report = TraceReport("demo")
        record = report.check(0, "x", ctx.real(2) + ctx.tolerance / 2, ctx, upper=ctx.real(2))
        assert record.passed

    def test_strict_bound_is_exact(self, ctx):
        report = TraceReport("demo")
        assert not report.check(0, "x", ctx.real(6), ctx, upper=ctx.real(6), strict=True).passed
        assert report.failures[0].quantity == "x"
        assert not report.all_pass

    def test_lower_bound(self, ctx):
        report = TraceReport("demo")
        assert not report.check(0, "x", ctx.real(1), ctx, lower=ctx.real(2)).passed

    def test_explicit_pass_flag_wins(self, ctx):
        report = TraceReport("demo")
        assert report.check(0, "x", ctx.real(10), ctx, upper=ctx.real(1), passed=True).passed

    def test_worst_margin(self, ctx):
        report = TraceReport("demo")
        report.check(0, "a", ctx.real(1), ctx, upper=ctx.real(3))
        report.check(1, "b", ctx.real(2), ctx, lower=ctx.real(1), upper=ctx.real(2.5))
        assert report.worst_margin == ctx.real(0.5)

    def test_merge(self, ctx):
        first, second = TraceReport("a", metadata={"m": 2}), TraceReport("b", metadata={"n": 3})
        first.check(0, "x", ctx.real(1), ctx, upper=ctx.real(2))
        second.check(0, "y", ctx.real(3), ctx, upper=ctx.real(2))
        merged = merge_reports([first, second], "both")
        assert len(merged.records) == 2
        assert merged.metadata == {"m": 2, "n": 3}
        assert not merged.all_pass
        assert first.merge(second).experiment == "a+b"

    def test_collect_states_rejects_negative_index(self, ctx):
        with pytest.raises(ValidationError):
            collect_states(Fraction(1, 2), [-1], ctx)


@pytest.mark.unit
class TestLemmaSuites:
    """Test the Lipschitz, growth, rate and perturbation envelopes"""

    def test_lipschitz_close_pair(self, ctx):
        x = circle_point(Fraction(1, 3), ctx)
        y = circle_point(Fraction(1, 3) + Fraction(1, 2**70), ctx)
        report = check_lipschitz(x, y, 80, ctx)
        assert report.all_pass
        assert len(report.records) == 2 * 81

    def test_lipschitz_distant_pair(self, ctx):
        report = check_lipschitz(circle_point(Fraction(1, 7), ctx), circle_point(Fraction(5, 9), ctx), 60, ctx)
        assert report.all_pass

    @pytest.mark.parametrize("k, m", [(1, 2), (1, 3), (1, 4), (3, 7), (1, 11), (5, 12)])
    def test_growth(self, ctx, k, m):
        assert check_growth(RootOfUnity(k, m), 10, ctx).all_pass

    @pytest.mark.parametrize("k, m", [(1, 2), (2, 3), (1, 4), (1, 6), (3, 7), (4, 11)])
    def test_k_rate(self, ctx, k, m):
        assert check_K_rate(RootOfUnity(k, m), 10, ctx).all_pass

    def test_growth_at_multiples_of_five(self, ctx):
        with pytest.raises(WrongResidueClassError):
            check_growth(RootOfUnity(1, 10), 5, ctx)

    def test_growth_needs_two_blocks(self, ctx):
        with pytest.raises(ValidationError):
            check_growth(RootOfUnity(1, 7), 1, ctx)

    @pytest.mark.parametrize("m", [2, 3, 4, 6, 7])
    @pytest.mark.parametrize("offset", [Fraction(1, 10**30), Fraction(1, 10**20)])
    def test_perturbation(self, ctx, m, offset):
        root = RootOfUnity(1, m)
        for n in (6 * m - 1, 6 * m - 2):
            report = check_perturbation(root, circle_point(root.angle + offset, ctx), n, ctx)
            assert report.all_pass
            assert "r_bounds_skipped" not in report.metadata

    def test_perturbation_needs_block_index(self, ctx):
        root = RootOfUnity(1, 7)
        with pytest.raises(PreconditionViolationError):
            check_perturbation(root, circle_point(Fraction(1, 7), ctx), 39, ctx)

    def test_perturbation_needs_two_blocks(self, ctx):
        root = RootOfUnity(1, 7)
        with pytest.raises(PreconditionViolationError):
            check_perturbation(root, circle_point(Fraction(1, 7), ctx), 13, ctx)

    def test_declared_epsilon_must_cover_the_move(self, ctx):
        root = RootOfUnity(1, 7)
        y = circle_point(Fraction(1, 7) + Fraction(1, 10**6), ctx)
        with pytest.raises(PreconditionViolationError):
            check_perturbation(root, y, 41, ctx, epsilon=Fraction(1, 10**30))

    def test_short_block_skips_r_bounds(self, ctx):
        root = RootOfUnity(1, 7)
        report = check_perturbation(root, circle_point(Fraction(1, 7) + Fraction(1, 10**30), ctx), 20, ctx)
        assert report.metadata["r_bounds_skipped"] == ["q >= 3"]


@pytest.mark.unit
class TestConstructedPoints:
    """Test divergence certificates for constructed points"""

    def test_minimal_s_point_diverges(self, ctx):
        report = divergence_trace(ThresholdStream("S-minimal"), 3, ctx)
        assert report.all_pass
        assert report.metadata["denominators"] == ["1", "3", "16"]

    def test_twos_tower_point_diverges(self, ctx):
        assert divergence_trace(twos_tower_stream(), 2, ctx).all_pass

    def test_tower_certificates(self, ctx):
        report = tower_point_certificates(twos_tower_stream(), 3, ctx)
        assert report.all_pass
        assert report.metadata["reachable_depth"] == 3

    def test_tower_certificates_need_a_tower(self, ctx):
        with pytest.raises(ValidationError):
            tower_point_certificates(ThresholdStream("S-minimal"), 2, ctx)

    def test_levels_must_be_positive(self, ctx):
        with pytest.raises(ValidationError):
            divergence_trace(ThresholdStream("S-minimal"), 0, ctx)

    @pytest.mark.slow
    def test_ten_limits(self, ctx):
        report = ten_limits_trace(ThresholdStream("S-prime"), 2, ctx)
        assert report.all_pass
        assert report.metadata["reachable_depth"] == 2

    @pytest.mark.slow
    def test_general_divergence_walks_two_subsequences(self, ctx):
        outcome = general_divergence_probe(ThresholdStream("S-diamond"), 2, ctx,
                                           candidates=[constant_pair(1, 2)])
        assert outcome.targets == (6, 7)
        assert outcome.subsequences == {1: [1], 2: [2]}
        assert all(len(distances) == 1 for distances in outcome.r_distances.values())
        assert len(outcome.forced_tails) == len(outcome.indices)
        assert outcome.candidate_verdicts == {"(1, 2)": "no-common-limit"}
        assert outcome.verdict == "general-divergence-consistent"

    @pytest.mark.slow
    def test_general_divergence_forced_tails_meet(self, ctx):
        forced = forced_tail_pair().v
        same = CandidatePair(name="forced", v=forced, w=forced)
        outcome = general_divergence_probe(ThresholdStream("S-diamond"), 2, ctx, candidates=[same])
        assert outcome.limit_gaps["forced"] == [0, 0]
        assert outcome.candidate_verdicts["forced"] == "pulled-together"
        assert outcome.verdict == "general-divergence-consistent"

    @pytest.mark.slow
    def test_general_divergence_with_one_subsequence_is_inconclusive(self, ctx):
        outcome = general_divergence_probe(ThresholdStream("S-diamond"), 2, ctx,
                                           candidates=[constant_pair(1, 2)], positions=(1, 3))
        assert outcome.subsequences == {1: [1], 3: []}
        assert outcome.limit_gaps["(1, 2)"] == []
        assert outcome.verdict == "inconclusive"

    def test_general_divergence_positions_must_differ(self, ctx):
        with pytest.raises(ValidationError):
            general_divergence_probe(ThresholdStream("S-diamond"), 2, ctx, positions=(1, 13))


@pytest.mark.unit
class TestCandidateTails:
    """Test candidate tail sequences and their classification"""

    def test_forced_tail_is_a_pole(self, ctx):
        point = circle_point(Fraction(123, 1000), ctx)
        state = walk_to(point.value, 12, ctx, point.angle)
        pair = forced_tail_pair()
        assert abs(pair.v(state) + critical_tail(state)) < ctx.tolerance
        assert is_infinite(tail_modified(state, pair.v(state)))
        assert not is_infinite(tail_modified(state, pair.w(state)))

    def test_separated_limits(self, ctx):
        verdict = judge_candidate([ctx.real(0.5), ctx.real(0)], [ctx.real(0.3)] * 2,
                                  [ctx.real(1)] * 2, [ctx.real(1)] * 2, ctx.real(0.001))
        assert verdict == "no-common-limit"

    def test_pulled_together(self, ctx):
        verdict = judge_candidate([ctx.real(0)] * 2, [ctx.real(0.3), ctx.real(0.0001)],
                                  [ctx.real(1), ctx.real(2)], [ctx.real(1)] * 2, ctx.real(0.001))
        assert verdict == "pulled-together"

    def test_pulled_to_forced_tail(self, ctx):
        verdict = judge_candidate([ctx.real(0)] * 2, [ctx.real(0.3)] * 2,
                                  [ctx.real(2), ctx.real(1)], [ctx.real(3), ctx.real(0.5)], ctx.real(0.001))
        assert verdict == "pulled-to-forced-tail"

    def test_counterexample(self, ctx):
        verdict = judge_candidate([ctx.real(0)] * 2, [ctx.real(0.1), ctx.real(0.3)],
                                  [ctx.real(1), ctx.real(2)], [ctx.real(1)] * 2, ctx.real(0.001))
        assert verdict == "counterexample"


@pytest.mark.unit
class TestGeneralConvergence:
    """Test convergence of tail-modified approximants at 5m-th roots"""

    @pytest.mark.parametrize("k, m", [(1, 5), (2, 5), (3, 10), (9, 10)])
    def test_converges_to_classified_limit(self, ctx, k, m):
        assert check_general_convergence(RootOfUnity(k, m), ctx).all_pass

    def test_needs_multiple_of_five(self, ctx):
        with pytest.raises(WrongResidueClassError):
            check_general_convergence(RootOfUnity(1, 7), ctx)


@pytest.mark.unit
class TestOutsideProbe:
    @pytest.mark.parametrize("x", [Fraction(1, 10), Fraction(-1, 20)])
    def test_ratio_identities(self, ctx, x):
        report = ratio_blowup_probe(x, 60, ctx)
        assert report.all_pass
        assert report.metadata["worpitsky"]


@pytest.mark.unit
class TestMeasureSampler:
    """Test the Monte Carlo sampler of threshold rules"""

    def test_same_seed_same_result(self, ctx):
        first = measure_sampler("S", 5, 200, 11, ctx)
        second = measure_sampler("S", 5, 200, 11, ctx)
        assert first == second

    def test_tail_frequencies_do_not_increase(self, ctx):
        result = measure_sampler("S", 6, 300, 3, ctx)
        assert 0 <= result.frequency <= 1
        assert result.frequency == result.tail_frequencies[0]
        assert all(b <= a for a, b in zip(result.tail_frequencies, result.tail_frequencies[1:]))
        assert len(result.partial_sums) == 6

    def test_star_rule_contains_the_s_rule(self, ctx):
        # d_i >= F_{i+1}, so every S hit is also an S-star hit
        assert measure_sampler("S", 6, 200, 9, ctx).hits <= measure_sampler("S-star", 6, 200, 9, ctx).hits

    def test_constant_one_always_holds(self, ctx):
        assert measure_sampler("constant", 3, 100, 5, ctx).frequency == 1.0

    def test_unknown_rule(self, ctx):
        with pytest.raises(ValidationError):
            measure_sampler("T", 5, 200, 1, ctx)

    def test_too_few_samples(self, ctx):
        with pytest.raises(ValidationError):
            measure_sampler("S", 5, 50, 1, ctx)
