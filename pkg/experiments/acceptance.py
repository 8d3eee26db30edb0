"""
Acceptance suite behind `rrlab verify`.

Each criterion is a finite-index check that returns (passed, detail). The quick
profile trims grid sizes and depths; full runs every criterion at the declared
scale, including the fourth divergence level (d = 35315).
"""

import asyncio
import shutil
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import structlog
from sympy import fibonacci

from config.settings import get_settings
from services.bigarith import PrecisionContext, circle_point
from services.cfrac import (
    ThresholdStream,
    alpha_stream,
    mod_convergents,
    twos_tower_stream,
)
from services.exceptions import ConfigInvalidError, RRLabException
from services.rrcf import odd_even_limits, pq_advance, walk_to
from services.schur import RootOfUnity, boundary_quad, primitive_roots, recursed_quad, schur_eval
from services.serialization import pattern_text
from services.verify import (
    check_general_convergence,
    check_growth,
    check_K_rate,
    check_lipschitz,
    check_perturbation,
    divergence_trace,
    merge_reports,
    ten_limits_trace,
    tower_point_certificates,
)

from .config import ConfigurationManager
from .models import AcceptanceSummary, CriterionResult, Profile, Subcommand
from .reporter import write_acceptance_summary
from .runner import ExperimentRunner, random_angle_pairs

logger = structlog.get_logger()

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "tests" / "golden"

Outcome = Tuple[bool, str]


@dataclass(frozen=True)
class Criterion:
    number: int
    title: str
    check: Callable[[Profile, int], Outcome]


def _ctx(bits: int = 256) -> PrecisionContext:
    return PrecisionContext(bits=bits, guard_bits=get_settings().GUARD_BITS)


def _coprime_orders(limit: int) -> List[int]:
    return [m for m in range(1, limit + 1) if m % 5]


def schur_closed_form(profile: Profile, seed: int) -> Outcome:
    ctx = _ctx()
    m_max = 50 if profile == Profile.FULL else 20
    bound = 1 / ctx.phi ** 78
    worst = ctx.mp.zero
    count = 0
    for m in _coprime_orders(m_max):
        for root in primitive_roots(m):
            point = root.point(ctx)
            state = walk_to(point.value, 40 * m + m - 1, ctx, point.angle)
            distance = abs(state.p / state.q - schur_eval(root, ctx).k_value)
            worst = max(worst, distance)
            count += 1
    return worst <= bound, f"{count} roots, worst {ctx.mp.nstr(worst, 5)}"


def boundary_table(profile: Profile, seed: int) -> Outcome:
    ctx = _ctx()
    tolerance = ctx.mp.ldexp(1, -200)
    worst = ctx.mp.zero
    for m in range(2, 61):
        for root in primitive_roots(m):
            closed = boundary_quad(root, ctx).as_tuple()
            direct = recursed_quad(root, ctx).as_tuple()
            worst = max([worst] + [abs(a - b) for a, b in zip(closed, direct)])
    return worst <= tolerance, f"worst {ctx.mp.nstr(worst, 5)}"


def divergence_certificate(profile: Profile, seed: int) -> Outcome:
    levels = 4 if profile == Profile.FULL else 3
    report = divergence_trace(ThresholdStream("S-minimal"), levels, _ctx())
    return report.all_pass, f"levels 1-{levels}, {len(report.records)} checks"


def tower_point(profile: Profile, seed: int) -> Outcome:
    certificates = tower_point_certificates(twos_tower_stream(), 3, _ctx())
    trace = divergence_trace(twos_tower_stream(), 2, _ctx())
    return certificates.all_pass and trace.all_pass, (
        f"{len(certificates.records)} exact inequalities, level-2 trace "
        f"{'passes' if trace.all_pass else 'fails'}"
    )


def _perturbation_grid() -> List[Tuple[RootOfUnity, int, Fraction]]:
    grid = []
    for m in (2, 3, 4, 6, 7):
        root = RootOfUnity(1, m)
        for n in (6 * m - 1, 6 * m - 2):
            for offset in (Fraction(1, 10**30), Fraction(1, 10**20)):
                grid.append((root, n, offset))
    return grid


def lemma_suites(profile: Profile, seed: int) -> Outcome:
    ctx = _ctx()
    full = profile == Profile.FULL
    pairs = random_angle_pairs(100 if full else 10, seed)
    reports = [check_lipschitz(circle_point(x, ctx), circle_point(y, ctx), 200, ctx) for x, y in pairs]
    m_max, q_max = (30, 20) if full else (12, 10)
    for m in _coprime_orders(m_max):
        for root in primitive_roots(m):
            reports.append(check_growth(root, q_max, ctx))
            reports.append(check_K_rate(root, q_max, ctx))
    for root, n, offset in _perturbation_grid():
        reports.append(check_perturbation(root, circle_point(root.angle + offset, ctx), n, ctx))
    merged = merge_reports(reports, "lemma-suites")
    return merged.all_pass, f"{len(merged.records)} checks, {len(merged.failures)} violations"


def determinant_and_fibonacci(profile: Profile, seed: int) -> Outcome:
    ctx = _ctx(512)
    mp = ctx.mp
    rng = np.random.default_rng(seed)
    count = 200 if profile == Profile.FULL else 20
    n_max = 500
    tolerance = mp.mpf(10) ** -60
    worst_det = mp.zero
    bound_holds = True
    for _ in range(count):
        angle = Fraction(int(rng.integers(0, 2**53)), 2**53)
        point = circle_point(angle, ctx)
        state = walk_to(point.value, 0, ctx, angle)
        while True:
            worst_det = max(worst_det, abs(abs(state.determinant()) - 1))
            if abs(state.q) > int(fibonacci(state.n + 1)) * (1 + ctx.tolerance):
                bound_holds = False
            if state.n == n_max:
                break
            state = pq_advance(state)
    return bound_holds and worst_det <= tolerance, (
        f"{count} points, worst ||det| - 1| = {mp.nstr(worst_det, 5)}"
    )


OUTSIDE_POINTS = (Fraction(1, 10), Fraction(-1, 10), Fraction(1, 20), Fraction(-1, 20),
                  (Fraction(0), Fraction(1, 10)))


def outside_split(profile: Profile, seed: int) -> Outcome:
    ctx = _ctx()
    depth = 400 if profile == Profile.FULL else 120
    closeness = ctx.real(Fraction(1, 10**15))
    separation = ctx.real(Fraction(1, 10**6))
    ok = True
    for x in OUTSIDE_POINTS:
        limits = odd_even_limits(x, depth, ctx)
        ok = ok and limits.odd_error < closeness and limits.even_error < closeness
        ok = ok and limits.gap > separation
    return ok, f"{len(OUTSIDE_POINTS)} points at N = {depth}"


def general_convergence(profile: Profile, seed: int) -> Outcome:
    ctx = _ctx()
    reports = [check_general_convergence(root, ctx) for m in (5, 10, 15, 20) for root in primitive_roots(m)]
    merged = merge_reports(reports, "general-convergence")
    return merged.all_pass, f"{len(reports)} roots"


def golden_patterns(profile: Profile, seed: int) -> Outcome:
    alpha = pattern_text(mod_convergents(alpha_stream(), 5))
    twos = pattern_text(mod_convergents(twos_tower_stream(), 5))
    expected_alpha = (GOLDEN_DIR / "alpha_mod5.txt").read_text(encoding="utf-8")
    expected_twos = (GOLDEN_DIR / "twos_tower_mod5.txt").read_text(encoding="utf-8")
    ok = alpha == expected_alpha and twos == expected_twos
    return ok, "period 12 and period 20 tables" if ok else "golden mismatch"


def ten_limits(profile: Profile, seed: int) -> Outcome:
    report = ten_limits_trace(ThresholdStream("S-prime"), 2, _ctx())
    return report.all_pass, f"reachable depth {report.metadata['reachable_depth']}"


CRITERIA: Tuple[Criterion, ...] = (
    Criterion(1, "Schur closed form", schur_closed_form),
    Criterion(2, "boundary values", boundary_table),
    Criterion(3, "divergence certificate", divergence_certificate),
    Criterion(4, "tower-of-twos point", tower_point),
    Criterion(5, "lemma suites", lemma_suites),
    Criterion(6, "determinant and Fibonacci bound", determinant_and_fibonacci),
    Criterion(7, "outside-circle split", outside_split),
    Criterion(8, "general convergence at 5m-th roots", general_convergence),
    Criterion(9, "mod-5 golden patterns", golden_patterns),
    Criterion(10, "ten-limit trace", ten_limits),
)


def _run_criterion(criterion: Criterion, profile: Profile, seed: int) -> CriterionResult:
    start = time.perf_counter()
    try:
        passed, detail = criterion.check(profile, seed)
    except RRLabException as exc:
        passed, detail = False, f"{exc.error_code}: {exc.message}"
    elapsed = time.perf_counter() - start
    logger.info("criterion finished", number=criterion.number, passed=passed, elapsed=round(elapsed, 2))
    return CriterionResult(criterion.number, criterion.title, passed, elapsed, detail)


def parse_profile(name: Optional[str]) -> Profile:
    try:
        return Profile(name)
    except ValueError as exc:
        raise ConfigInvalidError(f"unknown profile {name!r}; expected quick or full") from exc


async def verify_all(profile: Profile, output_dir: Path, seed: Optional[int] = None,
                     threads: Optional[int] = None) -> AcceptanceSummary:
    """Run criteria 1-10 across worker threads, then check determinism (criterion 11)"""
    seed = get_settings().SEED if seed is None else seed
    semaphore = asyncio.Semaphore(max(1, threads or get_settings().THREADS))
    start = time.perf_counter()

    async def one(criterion: Criterion) -> CriterionResult:
        async with semaphore:
            return await asyncio.to_thread(_run_criterion, criterion, profile, seed)

    results = list(await asyncio.gather(*(one(c) for c in CRITERIA)))
    results.append(await asyncio.to_thread(check_determinism, output_dir, seed))
    summary = AcceptanceSummary(profile=profile, criteria=results,
                                total_time=time.perf_counter() - start)
    write_acceptance_summary(summary, output_dir)
    logger.info("acceptance finished", profile=profile.value, passed=summary.passed,
                total_time=round(summary.total_time, 1))
    return summary


# artifact-writing subcommands at quick scale, compared file by file across two runs
DETERMINISM_RUNS: Tuple[Tuple[Subcommand, Dict[str, Any]], ...] = (
    (Subcommand.SCHUR_CATALOG, {"m_max": 12}),
    (Subcommand.TRACE, {"N": 60}),
    (Subcommand.DIVERGE, {"levels": 2}),
    (Subcommand.LIPSCHITZ, {"pairs": 3, "N": 60}),
    (Subcommand.GROWTH, {"m_values": [2, 3, 4], "q_max": 6}),
    (Subcommand.K_RATE, {"m_values": [2, 3, 4], "q_max": 6}),
    (Subcommand.PERTURB, {}),
    (Subcommand.OUTSIDE, {"N": 120}),
    (Subcommand.MOD_PATTERN, {}),
    (Subcommand.BUILD_POINT, {"levels": 3}),
    (Subcommand.SAMPLE_MEASURE, {"samples": 200, "depth": 6}),
)


def snapshot_tree(root: Path) -> Dict[str, bytes]:
    return {path.relative_to(root).as_posix(): path.read_bytes()
            for path in sorted(root.rglob("*")) if path.is_file()}


def check_determinism(output_dir: Path, seed: int) -> CriterionResult:
    """Two identical quick runs must write byte-identical artifact trees"""
    start = time.perf_counter()
    snapshots = []
    for attempt in ("a", "b"):
        root = output_dir / "determinism" / attempt
        shutil.rmtree(root, ignore_errors=True)
        manager = ConfigurationManager(environ={})
        for subcommand, overrides in DETERMINISM_RUNS:
            config = manager.load(subcommand, overrides={**overrides, "seed": seed, "output_dir": str(root)})
            try:
                asyncio.run(ExperimentRunner(config, threads=1).run())
            except RRLabException as exc:
                return CriterionResult(11, "determinism", False, time.perf_counter() - start,
                                       f"{subcommand.value}: {exc.error_code}: {exc.message}")
        snapshots.append(snapshot_tree(root))
    first, second = snapshots
    differing = sorted(name for name in first.keys() | second.keys() if first.get(name) != second.get(name))
    passed = bool(first) and not differing
    detail = f"{len(first)} artifacts compared"
    if differing:
        detail += f", differing: {', '.join(differing[:5])}"
    return CriterionResult(11, "determinism", passed, time.perf_counter() - start, detail)
