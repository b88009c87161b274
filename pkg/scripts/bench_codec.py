#!/usr/bin/env python3
"""Codec throughput sweep with the scaling ratios spelled out."""

import argparse

from lsnode.bench import format_report, run_benchmarks


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--k", type=int, nargs="+", default=[25, 50, 100])
    parser.add_argument("--r", type=int, nargs="+", default=[5, 10, 20])
    parser.add_argument("--block-size", type=int, default=1_000_000)
    parser.add_argument("--reps", type=int, default=5)
    args = parser.parse_args()

    report = run_benchmarks(args.k, args.r, args.block_size, args.reps)
    print(format_report(report))
    print()

    r_sorted = sorted(args.r)
    for r_low, r_high in zip(r_sorted, r_sorted[1:]):
        for k in args.k:
            ratio = report.encode_ratio(k, r_high, r_low)
            print(
                f"encode k={k:>4}: r={r_high} runs at {ratio:.2f}x the "
                f"throughput of r={r_low} (expect ~{r_low/r_high:.2f})"
            )
    k_sorted = sorted(args.k)
    for k_low, k_high in zip(k_sorted, k_sorted[1:]):
        ratio = report.decode_ratio(k_high, k_low)
        print(
            f"decode: k={k_high} runs at {ratio:.2f}x the throughput of "
            f"k={k_low} (expect ~{k_low/k_high:.2f})"
        )
    for r in args.r:
        print(f"encode spread across k at r={r}: {report.encode_spread(r):.1%}")


if __name__ == "__main__":
    main()
