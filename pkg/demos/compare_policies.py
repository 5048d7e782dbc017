"""Benchmark the agent against exploration baselines on the small maps.

Runs the bundled "small" suite and prints the SPL / SR table.

    python demos/compare_policies.py [--seeds 0-9] [--jobs 4]
"""

import argparse

from semnav.benchmark import bundled_suite, run_benchmark
from semnav.cli import parse_seeds

POLICIES = ["ours+rule", "ours+oracle", "ours+abstain", "frontier", "step-random"]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", default="0-4")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    report = run_benchmark(bundled_suite("small"), POLICIES, parse_seeds(args.seeds), jobs=args.jobs)
    print(report.to_table())


if __name__ == "__main__":
    main()
