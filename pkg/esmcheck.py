#!/usr/bin/env python3
"""
esmcheck - Main Entry Point
Verification of generalized Einstein-Scalar-Maxwell configurations
"""

import argparse
import sys
from typing import Optional, Sequence

from core.verifier import COMMANDS, EXIT_INPUT, EsmVerifier


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esmcheck",
        description="Check scenario files against the twisted Einstein-Scalar-Maxwell equations.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=sorted(COMMANDS), help="Check to run")
    parser.add_argument("--scenario", type=str, default=None, help="Scenario YAML file")
    parser.add_argument("--report", type=str, default=None, help="Write the JSON report here instead of stdout")
    parser.add_argument("--config", type=str, default="config.yaml", help="Configuration file")
    parser.add_argument(
        "--tol",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="Override a tolerance (repeatable)",
    )
    parser.add_argument("--refine", type=int, default=1, help="Also run on a grid refined by this factor")
    parser.add_argument("--dump-fields", action="store_true", help="Include residual fields in the report")
    parser.add_argument("--seed", type=int, default=None, help="Seed for random duality transformations")
    parser.add_argument("--random-count", type=int, default=None, help="Number of random transformations")
    parser.add_argument("--max-len", type=int, default=None, help="Word length bound for holonomy samples")
    parser.add_argument("--timings", action="store_true", help="Record wall times in the report")
    parser.add_argument("--strict", action="store_true", help="Treat twisted periodicity violations as errors")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for esmcheck."""
    try:
        parser = build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            return EXIT_INPUT if e.code else 0
        if args.refine < 1:
            print("[ERROR] --refine must be at least 1", file=sys.stderr)
            return EXIT_INPUT

        options = {
            "report": args.report,
            "tol": args.tol,
            "refine": args.refine,
            "dump_fields": args.dump_fields,
            "seed": args.seed,
            "random_count": args.random_count,
            "max_len": args.max_len,
            "timings": args.timings,
            "strict": args.strict,
        }
        verifier = EsmVerifier(args.config)
        return verifier.run(args.command, args.scenario, options)

    except KeyboardInterrupt:
        print("\n[INFO] esmcheck interrupted by user", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"[ERROR] Critical error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
