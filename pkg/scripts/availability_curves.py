#!/usr/bin/env python3
"""Regenerate the availability comparison data.

Writes three curve files (coded model, random replication, and the
per-node fragment-count pmf) plus a threshold summary, and optionally
cross-checks a few grid points against the simulator.
"""

import argparse
from pathlib import Path

from lsnode.analysis import (
    Distribution,
    emit_curves,
    irrecoverability_coded,
    min_nodes_for_threshold,
)
from lsnode.simnet import SimConfig, run_availability


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--k", type=int, default=100)
    parser.add_argument("--p", type=float, default=0.2, help="geometric parameter")
    parser.add_argument("--n-max", type=int, default=100)
    parser.add_argument("--out-dir", default="out")
    parser.add_argument("--simulate", action="store_true",
                        help="cross-check three grid points empirically")
    parser.add_argument("--trials", type=int, default=50_000)
    args = parser.parse_args()

    c = args.k * args.p  # same storage budget as k/mean(r)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    emit_curves("coded", out / "coded.dat", k=args.k, p=args.p, n_max=args.n_max)
    emit_curves("replicated", out / "replicated.dat", c=c, n_max=3 * args.n_max)
    emit_curves("geometric", out / "fragment_pmf.dat", p=args.p, n_max=25)
    print(f"curves written to {out}/")

    for threshold in (5e-5, 5e-6):
        coded_n = min_nodes_for_threshold(
            "coded", k=args.k, p=args.p, threshold=threshold
        )
        repl_n = min_nodes_for_threshold("replicated", c=c, threshold=threshold)
        print(
            f"threshold {threshold:g}: coded reaches it at n={coded_n}, "
            f"replication at n={repl_n}"
        )

    if args.simulate:
        f = Distribution.geometric(args.p)
        for n in (args.n_max // 10, args.n_max // 5, 3 * args.n_max // 10):
            config = SimConfig(
                master_seed=1_000 + n, n_nodes=n, k=args.k,
                max_block_size=20 * args.k, r_assignment=f, chain_length=100,
            )
            metrics = run_availability(config, args.trials)
            theory = irrecoverability_coded(f, n, args.k)
            print(
                f"n={n}: simulated {metrics.irrecoverability:.6f} "
                f"(sigma {metrics.binomial_sigma:.6f}), model {theory:.6f}"
            )


if __name__ == "__main__":
    main()
