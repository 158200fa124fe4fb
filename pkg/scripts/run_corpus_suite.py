#!/usr/bin/env python3
"""Run the built-in corpus suite (scenario x seed x engine variant) and print
the profit matrix. A JSON report can be written alongside the table.

Examples:
    python3 scripts/run_corpus_suite.py
    python3 scripts/run_corpus_suite.py --scenario public_burn --seeds 2
    python3 scripts/run_corpus_suite.py --json suite.json --workers 8
"""

import argparse
import sys

from popfuzz.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenario", action="append",
                        help="restrict to one built-in scenario (repeatable)")
    parser.add_argument("--seeds", type=int, default=5,
                        help="number of seeds, starting at 1 (default: 5)")
    parser.add_argument("--no-ablations", action="store_true",
                        help="run only the full engine variant")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--json", metavar="PATH",
                        help="also write the matrix as JSON to PATH")
    args = parser.parse_args()

    base = ["corpus-suite", "--seeds", str(args.seeds)]
    for name in args.scenario or []:
        base += ["--scenario", name]
    if args.no_ablations:
        base += ["--no-ablations"]
    if args.workers is not None:
        base += ["--workers", str(args.workers)]

    code = cli_main(base)
    if code == 0 and args.json:
        code = cli_main(base + ["--json", "--out", args.json])
        if code == 0:
            print(f"wrote {args.json}")
    return code


if __name__ == "__main__":
    sys.exit(main())
