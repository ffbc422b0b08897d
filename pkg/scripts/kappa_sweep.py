"""BOE at a checkpoint iteration across exploration weights kappa.

    python3 scripts/kappa_sweep.py --trials 30 --kappas 0.1,0.5,1,2,3,5,10
"""

import argparse
from pathlib import Path

from jamloc.harness import DEFAULT_KAPPAS, TrialConfig, kappa_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config")
    ap.add_argument("--kappas", default=",".join(f"{k:g}" for k in DEFAULT_KAPPAS))
    ap.add_argument("--checkpoint", type=int, default=30)
    ap.add_argument("--trials", type=int, default=30)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/sweep.csv")
    args = ap.parse_args()

    cfg = TrialConfig.from_json(open(args.config).read()) if args.config else TrialConfig()
    sw = kappa_sweep(cfg, [float(k) for k in args.kappas.split(",")], args.checkpoint, args.trials, args.workers)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(sw.to_csv())
    print(sw.to_csv(), end="")


if __name__ == "__main__":
    main()
