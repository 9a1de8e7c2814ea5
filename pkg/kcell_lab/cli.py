# kcell_lab/cli.py
"""
Command-line front end.

    run <config> [--workers N] [--check] [--out DIR] [--no-svg]
    replay <csv> <config> [--workers N]

Exit codes: 0 success, 1 failed acceptance check / replay mismatch /
simulation error, 2 configuration error.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from kcell_lab.core.config import get_settings
from kcell_lab.core.exceptions import (
    ConfigValidationError, KCellError, ReplayMismatch, ValidationError,
)
from kcell_lab.core.logging import LoggerManager
from kcell_lab.models.campaign import load_campaign
from kcell_lab.services.campaign_runner import CampaignRunner, RunResult

logger = LoggerManager.get_logger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kcell-lab",
        description="Monte Carlo campaigns for K-cells of isotropic Poisson hyperplane processes",
    )
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: WORKERS env var, else 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a campaign")
    run.add_argument("config", type=Path)
    run.add_argument("--check", action="store_true", help="exit 1 when an acceptance check fails")
    run.add_argument("--out", type=Path, default=None, help="output directory (default: OUTPUT_DIR)")
    run.add_argument("--no-svg", action="store_true", help="skip plots")
    run.add_argument("--workers", type=int, default=argparse.SUPPRESS)

    replay = sub.add_parser("replay", help="re-run a campaign and byte-compare its CSV")
    replay.add_argument("csv", type=Path)
    replay.add_argument("config", type=Path)
    replay.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    return parser


def _print_result(result: RunResult):
    status = "✅ passed" if result.passed else "❌ failed"
    print(f"{result.campaign_id}: {status} (seed {result.seed})")
    for failure in result.report.failures:
        print(f"  - {failure}")
    for kind, path in sorted(result.outputs.items()):
        print(f"  {kind}: {path}")


def _run(args) -> int:
    campaign = load_campaign(args.config)
    runner = CampaignRunner(args.workers)
    result = runner.run(campaign, args.out, svg=False if args.no_svg else None)
    _print_result(result)
    if (args.check or campaign.config.check) and not result.passed:
        return EXIT_FAILED
    return EXIT_OK


def _replay(args) -> int:
    if not args.csv.exists():
        print(f"❌ CSV not found: {args.csv}", file=sys.stderr)
        return EXIT_CONFIG
    campaign = load_campaign(args.config)
    runner = CampaignRunner(args.workers)
    try:
        runner.replay(args.csv, campaign)
    except ReplayMismatch as e:
        print(f"❌ {e.message}", file=sys.stderr)
        return EXIT_FAILED
    print(f"✅ {campaign.campaign_id}: replay identical")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers is None:
        args.workers = get_settings().WORKERS
    if args.workers < 1:
        print("❌ --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "run":
            return _run(args)
        return _replay(args)
    except ConfigValidationError as e:
        print(f"❌ {e.message}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as e:
        where = f"{e.field}: " if e.field else ""
        print(f"❌ Invalid input: {where}{e.message}", file=sys.stderr)
        return EXIT_CONFIG
    except KCellError as e:
        LoggerManager.log_error_with_context(logger, e, {"command": args.command})
        print(f"❌ {type(e).__name__}: {e.message}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
