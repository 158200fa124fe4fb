#!/usr/bin/env python3
"""Run one campaign and dump plot-ready convergence data as TSV: each row is
an iteration at which the best verified profit improved. Optionally also dump
every recorded optimizer step-schedule entry.

Examples:
    python3 scripts/convergence_data.py --scenario public_burn --seed 1 \\
        --iterations 15000 > burn_convergence.tsv
    python3 scripts/convergence_data.py --scenario fee_transfer --schedules sched.tsv
"""

import argparse
import sys

from popfuzz.engine import CampaignConfig, run_campaign, verify_result
from popfuzz.scenarios import builtin_scenario


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenario", required=True)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--iterations", type=int, default=4000)
    parser.add_argument("--sgd-budget", type=int, default=600)
    parser.add_argument("--sgd-total-budget", type=int, default=6000)
    parser.add_argument("--schedules", metavar="PATH",
                        help="also write optimizer step-schedule entries to PATH")
    args = parser.parse_args()

    scenario = builtin_scenario(args.scenario)
    config = CampaignConfig(
        seed=args.seed,
        iterations=args.iterations,
        sgd_budget=args.sgd_budget,
        sgd_total_budget=args.sgd_total_budget,
        record_schedule=args.schedules is not None,
    )
    result = run_campaign(scenario, config)
    verify_result(scenario, result)

    print("iteration\tprofit")
    for iteration, profit in result.stats.profit_timeline:
        print(f"{iteration}\t{profit}")
    print(
        f"# best={result.best_profit} proofs={len(result.proofs)} "
        f"elapsed={result.stats.elapsed:.1f}s sgd_evals={result.stats.sgd_evals}",
        file=sys.stderr,
    )

    if args.schedules:
        with open(args.schedules, "w") as fh:
            fh.write("run\tvar\tbefore\tafter\tkind\n")
            for run_idx, sched in enumerate(result.schedules):
                for e in sched:
                    fh.write(f"{run_idx}\t{e.var}\t{e.before}\t{e.after}\t{e.kind}\n")
        print(f"# wrote {args.schedules}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
