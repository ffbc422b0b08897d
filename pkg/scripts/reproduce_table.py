"""Run all four methods on shared scenes and print the final-iteration table.

    python3 scripts/reproduce_table.py --trials 50 --workers 4 --out results/table
"""

import argparse
import time

from jamloc.harness import ALL_METHODS, TrialConfig, run_experiment, write_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", help="TrialConfig JSON (defaults used if omitted)")
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/table")
    args = ap.parse_args()

    cfg = TrialConfig.from_json(open(args.config).read()) if args.config else TrialConfig()
    t0 = time.perf_counter()
    ex = run_experiment(cfg, ALL_METHODS, args.trials, args.workers)
    write_experiment(ex, args.out)
    table = ex.table()["methods"]
    print(f"{'method':16s} {'SME median [25-75] m':>26s} {'BOE median [25-75] m':>26s}")
    for m, row in table.items():
        s, b = row["sme"], row["boe"]
        print(f"{m:16s} {s['median']:8.1f} [{s['q25']:.1f}-{s['q75']:.1f}]{'':6s} {b['median']:8.1f} [{b['q25']:.1f}-{b['q75']:.1f}]")
    print(f"{len(ex.failures)} failed trials, {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
