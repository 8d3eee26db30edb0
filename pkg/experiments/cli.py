"""
Command-line interface for rrlab.

    rrlab <subcommand> [--config PATH] [--precision-bits N] [--out DIR] [--seed N]
    rrlab verify --profile quick|full [--out DIR]
    rrlab schema
"""

import argparse
import asyncio
import json
import sys
from pathlib import Path
from typing import List, Optional

import structlog

from config.settings import get_settings
from services.exceptions import RRLabException

from .acceptance import parse_profile, verify_all
from .config import ConfigurationManager, config_schema
from .models import Subcommand
from .runner import ExperimentRunner

logger = structlog.get_logger()

SUBCOMMAND_HELP = {
    Subcommand.SCHUR_CATALOG: "closed-form K and R at primitive roots of unity",
    Subcommand.TRACE: "K_n, R_n, |Q_n| and critical tails along one point",
    Subcommand.DIVERGE: "divergence certificate for a constructed point",
    Subcommand.TEN_LIMITS: "residue-driven trace through the ten limit values",
    Subcommand.GENERAL_PROBE: "forced-tail probe against candidate tail sequences",
    Subcommand.LIPSCHITZ: "Lipschitz envelopes of P_n and Q_n on random pairs",
    Subcommand.GROWTH: "growth of |Q_n| at roots of unity",
    Subcommand.K_RATE: "convergence rate of K_n at roots of unity",
    Subcommand.PERTURB: "perturbation envelopes near a root of unity",
    Subcommand.OUTSIDE: "odd and even limits for |x| > 1",
    Subcommand.MOD_PATTERN: "convergent numerators and denominators modulo M",
    Subcommand.BUILD_POINT: "construct a point of the divergence set with certificates",
    Subcommand.SAMPLE_MEASURE: "Monte Carlo frequency of the divergence conditions",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rrlab",
        description="Rogers-Ramanujan continued fraction laboratory",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s schur-catalog --out ./results
  %(prog)s diverge --config diverge.json --precision-bits 512
  %(prog)s verify --profile quick
        """,
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    for subcommand, help_text in SUBCOMMAND_HELP.items():
        sub = subparsers.add_parser(subcommand.value, help=help_text)
        sub.add_argument("--config", type=Path, help="JSON or YAML experiment config")
        sub.add_argument("--precision-bits", type=int, dest="precision_bits")
        sub.add_argument("--out", dest="output_dir", help="output directory")
        sub.add_argument("--seed", type=int)
        sub.add_argument("--threads", type=int, help="worker threads (default RRLAB_THREADS)")

    verify = subparsers.add_parser("verify", help="run the acceptance suite")
    verify.add_argument("--profile", default="quick", help="quick or full")
    verify.add_argument("--out", dest="output_dir", help="output directory")
    verify.add_argument("--seed", type=int)
    verify.add_argument("--threads", type=int)

    subparsers.add_parser("schema", help="print the ExperimentConfig JSON schema")
    return parser


async def run_experiment(args: argparse.Namespace) -> int:
    subcommand = Subcommand(args.command)
    config = ConfigurationManager().load(
        subcommand,
        config_path=args.config,
        overrides={"precision_bits": args.precision_bits, "output_dir": args.output_dir,
                   "seed": args.seed},
    )
    result = await ExperimentRunner(config, threads=args.threads).run()

    print(f"{subcommand.value}: {'PASSED' if result.passed else 'FAILED'}")
    for key, value in sorted(result.summary.items()):
        print(f"  {key}: {value}")
    for error in result.errors:
        print(f"  error: {error}")
    print(f"  artifacts: {len(result.artifacts)} under {config.output_dir}")
    return 0 if result.passed else 1


async def run_verify(args: argparse.Namespace) -> int:
    profile = parse_profile(args.profile)
    output_dir = Path(args.output_dir or get_settings().OUTPUT_DIR) / "verify"
    summary = await verify_all(profile, output_dir, seed=args.seed, threads=args.threads)

    print(f"acceptance ({profile.value}): {'PASSED' if summary.passed else 'FAILED'}")
    for criterion in summary.criteria:
        mark = "pass" if criterion.passed else "FAIL"
        print(f"  {criterion.number:>2} {mark:<4} {criterion.title} ({criterion.elapsed:.1f}s) {criterion.detail}")
    return 0 if summary.passed else 1


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "schema":
            print(json.dumps(config_schema(), indent=2, sort_keys=True))
            return 0
        if args.command == "verify":
            return asyncio.run(run_verify(args))
        return asyncio.run(run_experiment(args))
    except RRLabException as exc:
        logger.error("rrlab failed", error_code=exc.error_code, message=exc.message)
        print(f"error [{exc.error_code}]: {exc.message}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
