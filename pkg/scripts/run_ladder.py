#!/usr/bin/env python3
"""Sparsity-ladder experiment: FDR/FNR of the three procedures as n/s grows.

Holds the number of signals fixed while the problem dimension grows, so the
log-sparsity log(n/s) sweeps a decade; writes one CSV row per (ladder point,
procedure) plus a per-replicate CSV per point when --dump-replicates is set.
"""

import argparse
import csv
import sys

from ebtest.simulate import SignalConfig, replicates_to_csv, run_experiment


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--s", type=int, default=500)
    parser.add_argument("--ratios", default="20,200,2000",
                        help="comma-separated n/s values")
    parser.add_argument("--v", type=float, default=5.0)
    parser.add_argument("--t", type=float, default=0.1)
    parser.add_argument("--reps", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=2)
    parser.add_argument("--out", default="ladder.csv")
    parser.add_argument("--dump-replicates", action="store_true")
    args = parser.parse_args(argv)

    ratios = [int(r) for r in args.ratios.split(",")]
    rows = []
    for ratio in ratios:
        cfg = SignalConfig(n=args.s * ratio, s_n=args.s, v_n=args.v)
        report = run_experiment(
            cfg, args.t, args.reps, seed=args.seed + ratio,
            parallelism=args.threads,
        )
        for tag in report.procedures:
            rows.append({
                "ratio": ratio,
                "n": cfg.n,
                "s_n": cfg.s_n,
                "procedure": tag,
                "fdr": repr(report.fdr[tag]),
                "fdr_se": repr(report.fdr_se[tag]),
                "fnr": repr(report.fnr[tag]),
                "fnr_se": repr(report.fnr_se[tag]),
                "max_rejection_ratio": repr(report.max_rejection_ratio[tag]),
            })
        if args.dump_replicates:
            replicates_to_csv(report, f"ladder_reps_{ratio}.csv")
        print(f"n/s={ratio}: FDR(cl)={report.fdr['cl']:.4f} "
              f"FNR(cl)={report.fnr['cl']:.5f} ({report.runtime_s:.0f}s)")

    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
