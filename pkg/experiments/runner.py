"""
Experiment runner.

Dispatches a validated ExperimentConfig to the owning module and writes the
artifacts. Grid experiments fan out over worker threads, one PrecisionContext
per task, and results are gathered in submission order.
"""

import asyncio
from fractions import Fraction
from typing import Any, Awaitable, Callable, Dict, Iterable, List, Optional, TypeVar

import numpy as np
import structlog

from config.settings import get_settings
from services.bigarith import PrecisionContext, circle_point
from services.cfrac import (
    PartialQuotientStream,
    ThresholdStream,
    TowerStream,
    alpha_stream,
    build_S_point,
    mod_convergents,
    sixteens_tower_stream,
    stream_from_description,
    twos_tower_stream,
)
from services.exceptions import ConfigInvalidError
from services.rrcf import PointLike, classical_approximants, odd_even_limits
from services.schur import RootOfUnity, primitive_roots, schur_catalog
from services.serialization import (
    APPROXIMANT_COLUMNS,
    SCHUR_COLUMNS,
    approximant_rows,
    format_real,
    pattern_text,
    schur_rows,
)
from services.verify import (
    TraceReport,
    check_general_convergence,
    check_growth,
    check_K_rate,
    check_lipschitz,
    check_perturbation,
    constant_pair,
    divergence_trace,
    general_divergence_probe,
    measure_sampler,
    merge_reports,
    ratio_blowup_probe,
    ten_limits_trace,
    tower_point_certificates,
)

from .models import ExperimentConfig, RunResult, Subcommand, parse_fraction
from .reporter import ArtifactWriter

logger = structlog.get_logger()

T = TypeVar("T")

NAMED_STREAMS: Dict[str, Callable[[], PartialQuotientStream]] = {
    "alpha": alpha_stream,
    "twos": twos_tower_stream,
    "sixteens": sixteens_tower_stream,
}


def random_angle_pairs(count: int, seed: int) -> List[tuple]:
    """Seeded (x, y) angle pairs: alternately independent and 2^-64-close"""
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(count):
        x = Fraction(int(rng.integers(0, 2**53)), 2**53)
        if i % 2 == 0:
            y = Fraction(int(rng.integers(0, 2**53)), 2**53)
        else:
            y = min(x + Fraction(int(rng.integers(1, 2**20)), 2**84), Fraction(1))
        pairs.append((x, y))
    return pairs


class ExperimentRunner:
    """Runs one subcommand and writes its artifacts"""

    def __init__(self, config: ExperimentConfig, threads: Optional[int] = None):
        self.config = config
        self.threads = max(1, threads or get_settings().THREADS)
        self.writer = ArtifactWriter(config)
        self._handlers: Dict[Subcommand, Callable[[RunResult], Awaitable[None]]] = {
            Subcommand.SCHUR_CATALOG: self._schur_catalog,
            Subcommand.TRACE: self._trace,
            Subcommand.DIVERGE: self._diverge,
            Subcommand.TEN_LIMITS: self._ten_limits,
            Subcommand.GENERAL_PROBE: self._general_probe,
            Subcommand.LIPSCHITZ: self._lipschitz,
            Subcommand.GROWTH: self._growth,
            Subcommand.K_RATE: self._k_rate,
            Subcommand.PERTURB: self._perturb,
            Subcommand.OUTSIDE: self._outside,
            Subcommand.MOD_PATTERN: self._mod_pattern,
            Subcommand.BUILD_POINT: self._build_point,
            Subcommand.SAMPLE_MEASURE: self._sample_measure,
        }

    # helpers --------------------------------------------------------------

    def context(self) -> PrecisionContext:
        """A fresh context; mpmath contexts are not shared between threads"""
        return PrecisionContext(bits=self.config.precision_bits, guard_bits=self.config.guard_bits)

    async def fan_out(self, task: Callable[[Any, PrecisionContext], T], items: Iterable[Any]) -> List[T]:
        semaphore = asyncio.Semaphore(self.threads)

        async def one(item):
            async with semaphore:
                return await asyncio.to_thread(task, item, self.context())

        return list(await asyncio.gather(*(one(item) for item in items)))

    def stream(self) -> PartialQuotientStream:
        point = self.config.point
        if point is not None and point.stream is not None:
            return stream_from_description(point.stream)
        kind = self.config.kind
        if kind in NAMED_STREAMS:
            return NAMED_STREAMS[kind]()
        return ThresholdStream(kind, kappa=parse_fraction(self.config.kappa),
                               constant=self.config.constant, ctx=self.context())

    def point(self, ctx: PrecisionContext) -> PointLike:
        point = self.config.point
        if point is None or point.stream is not None:
            raise ConfigInvalidError(f"{self.config.subcommand.value} needs an angle or disk point")
        if point.angle is not None:
            return circle_point(point.angle_fraction(), ctx)
        re, im = point.gaussian()
        return re if im == 0 else (re, im)

    def roots(self) -> List[RootOfUnity]:
        orders = self.config.m_values or ([self.config.m] if self.config.m else [])
        if not orders:
            raise ConfigInvalidError("set m or m_values")
        return [root for m in orders for root in primitive_roots(m)]

    def record(self, result: RunResult, report: TraceReport, name: Optional[str] = None) -> None:
        result.reports.append(report)
        result.artifacts.update(self.writer.report(report, name))

    # run --------------------------------------------------------------------

    async def run(self) -> RunResult:
        result = RunResult(subcommand=self.config.subcommand)
        logger.info("experiment started", subcommand=self.config.subcommand.value,
                    precision_bits=self.config.precision_bits, threads=self.threads)
        await self._handlers[self.config.subcommand](result)
        result.artifacts["SUMMARY.md"] = self.writer.summary(result)
        logger.info("experiment finished", subcommand=self.config.subcommand.value,
                    passed=result.passed, artifacts=len(result.artifacts))
        return result

    # subcommands ------------------------------------------------------------

    async def _schur_catalog(self, result: RunResult) -> None:
        ctx = self.context()
        values = await asyncio.to_thread(schur_catalog, self.config.m_max, ctx)
        digits = self.writer.digits
        result.artifacts["schur_catalog.csv"] = self.writer.table(
            "schur_catalog", SCHUR_COLUMNS, schur_rows(values, digits)
        )
        result.artifacts["schur_catalog.json"] = self.writer.document("schur_catalog", values)
        at_one = next((v for v in values if v.root.m == 1), None)
        result.summary["roots"] = len(values)
        if at_one is not None:
            result.summary["K(1)"] = format_real(at_one.k_value.real, 30)

    async def _trace(self, result: RunResult) -> None:
        ctx = self.context()
        trace = await asyncio.to_thread(classical_approximants, self.point(ctx), self.config.N, ctx)
        result.artifacts["approximants.csv"] = self.writer.table(
            "approximants", APPROXIMANT_COLUMNS, approximant_rows(trace, self.writer.digits),
            extra={"blowups": [n for n, _ in trace.blowups]},
        )
        result.artifacts["approximants.json"] = self.writer.document("approximants", trace)
        result.summary["N"] = self.config.N
        result.summary["blowups"] = len(trace.blowups)

    async def _diverge(self, result: RunResult) -> None:
        stream = self.stream()
        ctx = self.context()
        report = await asyncio.to_thread(divergence_trace, stream, self.config.levels, ctx)
        self.record(result, report)
        if isinstance(stream, TowerStream):
            certificates = await asyncio.to_thread(tower_point_certificates, stream, 3, self.context())
            self.record(result, certificates)
        result.summary["levels"] = self.config.levels
        result.summary["bits"] = report.metadata["bits"]

    async def _ten_limits(self, result: RunResult) -> None:
        report = await asyncio.to_thread(ten_limits_trace, self.stream(),
                                         self.config.levels, self.context())
        self.record(result, report)
        result.summary["reachable_depth"] = report.metadata["reachable_depth"]

    async def _general_probe(self, result: RunResult) -> None:
        candidates = [constant_pair(complex(v.replace(" ", "")), complex(w.replace(" ", "")))
                      for v, w in self.config.candidates] or None
        outcome = await asyncio.to_thread(
            general_divergence_probe, self.stream(), self.config.levels, self.context(),
            candidates, self.config.monotone_from,
        )
        self.record(result, outcome.report)
        result.artifacts["probe.json"] = self.writer.document("probe", {
            "indices": outcome.indices,
            "forced_tails": outcome.forced_tails,
            "subsequences": outcome.subsequences,
            "r_distances": outcome.r_distances,
            "v_sums": outcome.v_sums,
            "w_sums": outcome.w_sums,
            "distances": outcome.distances,
            "limit_gaps": outcome.limit_gaps,
            "candidates": outcome.candidate_verdicts,
            "targets": list(outcome.targets),
            "verdict": outcome.verdict,
        })
        result.summary["verdict"] = outcome.verdict
        if self.config.m and self.config.m % 5 == 0:
            contrast = await asyncio.to_thread(
                check_general_convergence, RootOfUnity(self.config.k or 1, self.config.m), self.context()
            )
            self.record(result, contrast)

    async def _lipschitz(self, result: RunResult) -> None:
        point = self.config.point
        if point is not None and point.angle is not None and self.config.perturbation is not None:
            x = point.angle_fraction()
            pairs = [(x, min(x + parse_fraction(self.config.perturbation), Fraction(1)))]
        else:
            pairs = random_angle_pairs(self.config.pairs, self.config.seed)
        N = self.config.N

        def task(pair, ctx):
            x, y = pair
            return check_lipschitz(circle_point(x, ctx), circle_point(y, ctx), N, ctx)

        reports = await self.fan_out(task, pairs)
        self.record(result, merge_reports(reports, "lipschitz"))
        result.summary["pairs"] = len(pairs)

    async def _growth(self, result: RunResult) -> None:
        q_max = self.config.q_max
        reports = await self.fan_out(lambda root, ctx: check_growth(root, q_max, ctx), self.roots())
        self.record(result, merge_reports(reports, "growth"))
        result.summary["roots"] = len(reports)

    async def _k_rate(self, result: RunResult) -> None:
        q_max = self.config.q_max
        reports = await self.fan_out(lambda root, ctx: check_K_rate(root, q_max, ctx), self.roots())
        self.record(result, merge_reports(reports, "k-rate"))
        result.summary["roots"] = len(reports)

    async def _perturb(self, result: RunResult) -> None:
        if self.config.m is None:
            raise ConfigInvalidError("perturb needs m")
        root = RootOfUnity(self.config.k if self.config.k is not None else 1, self.config.m)
        offset = parse_fraction(self.config.perturbation or "0")
        angle = root.angle + offset
        if not 0 <= angle <= 1:
            raise ConfigInvalidError(f"perturbed angle {angle} leaves [0, 1]")
        n = self.config.n if self.config.n is not None else 6 * root.m - 1
        epsilon = parse_fraction(self.config.epsilon) if self.config.epsilon else None
        ctx = self.context()
        report = await asyncio.to_thread(check_perturbation, root, circle_point(angle, ctx), n, ctx, epsilon)
        self.record(result, report)

    async def _outside(self, result: RunResult) -> None:
        if self.config.point is None or self.config.point.disk is None:
            raise ConfigInvalidError("outside needs a disk point")
        ctx = self.context()
        x = self.point(ctx)
        limits = await asyncio.to_thread(odd_even_limits, x, self.config.N, ctx)
        report = await asyncio.to_thread(ratio_blowup_probe, x, self.config.N, self.context())
        self.record(result, report)
        result.artifacts["limits.json"] = self.writer.document("limits", limits)
        result.summary["gap"] = format_real(limits.gap, 20)
        result.summary["worpitsky"] = limits.worpitsky

    async def _mod_pattern(self, result: RunResult) -> None:
        pattern = await asyncio.to_thread(mod_convergents, self.stream(), self.config.modulus)
        result.artifacts["mod_pattern.txt"] = self.writer.text("mod_pattern.txt", pattern_text(pattern))
        result.artifacts["mod_pattern.json"] = self.writer.document("mod_pattern", {
            "modulus": pattern.modulus,
            "preperiod": pattern.preperiod,
            "period": pattern.period,
            "residues": pattern.render(),
        })
        result.summary["period"] = pattern.period
        result.summary["preperiod"] = pattern.preperiod

    async def _build_point(self, result: RunResult) -> None:
        stream, certificates = await asyncio.to_thread(
            build_S_point, self.config.kind, self.config.levels, None,
            parse_fraction(self.config.kappa), self.config.constant, self.context(),
        )
        rows = [certificate.describe() for certificate in certificates]
        result.artifacts["certificates.csv"] = self.writer.table(
            "certificates",
            ("level", "d", "threshold", "next_quotient", "holds"),
            [[r["level"], r["d"], r["threshold"], r["next_quotient"], "true" if r["holds"] else "false"]
             for r in rows],
        )
        result.artifacts["point.json"] = self.writer.document("point", {
            "stream": stream.describe(), "certificates": rows,
        })
        if not all(certificate.holds for certificate in certificates):
            result.errors.append("a level certificate does not hold")
        result.summary["levels"] = len(certificates)

    async def _sample_measure(self, result: RunResult) -> None:
        sample = await asyncio.to_thread(
            measure_sampler, self.config.rule, self.config.depth, self.config.samples,
            self.config.seed, self.context(), Fraction(self.config.constant),
            parse_fraction(self.config.kappa),
        )
        result.artifacts["tail_frequencies.csv"] = self.writer.table(
            "tail_frequencies",
            ("start", "frequency", "partial_sum"),
            [[start, repr(freq), partial]
             for start, (freq, partial) in enumerate(zip(sample.tail_frequencies, sample.partial_sums), 1)],
        )
        result.artifacts["sample.json"] = self.writer.document("sample", sample)
        result.summary["frequency"] = sample.frequency
