"""Sweep payload sizes through the fog and cloud-only cost models and print
the reduction bands.

Usage: python scripts/run_fog_sweep.py [--min-mb N] [--max-mb N]
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from epimob.fog import MB_BITS, compare_architectures, delay_total, power_total, reference_scenarios


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--min-mb", type=int, default=1)
    parser.add_argument("--max-mb", type=int, default=100)
    parser.add_argument("--step-mb", type=int, default=10)
    args = parser.parse_args()
    print(f"{'MB':>5} {'fog delay':>10} {'cloud delay':>12} {'delay red':>10} {'fog J':>9} {'cloud J':>9} {'power red':>10}")
    delays, powers = [], []
    sizes = sorted(set([args.min_mb, args.max_mb] + list(range(args.min_mb, args.max_mb + 1, args.step_mb))))
    for mb in sizes:
        fog, cloud = reference_scenarios(mb * MB_BITS)
        cmp = compare_architectures(fog, cloud)
        delays.append(cmp.delay_reduction_pct)
        powers.append(cmp.power_reduction_pct)
        print(
            f"{mb:>5} {delay_total(fog).total:>10.2f} {delay_total(cloud).total:>12.2f}"
            f" {cmp.delay_reduction_pct:>9.2f}% {power_total(fog).total:>9.1f} {power_total(cloud).total:>9.1f}"
            f" {cmp.power_reduction_pct:>9.2f}%"
        )
    print(f"\ndelay reductions span [{min(delays):.2f}, {max(delays):.2f}]%")
    print(f"power reductions span [{min(powers):.2f}, {max(powers):.2f}]%")


if __name__ == "__main__":
    main()
