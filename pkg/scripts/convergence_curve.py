"""Per-iteration median BOE with interquartile band, from a ``run`` output directory.

    python3 scripts/convergence_curve.py results/table --png curve.png
"""

import argparse
import json
from pathlib import Path


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("run_dir")
    ap.add_argument("--png", help="optional plot path (needs matplotlib)")
    args = ap.parse_args()

    table = json.loads((Path(args.run_dir) / "summary.json").read_text())["methods"]
    for m, row in table.items():
        med = row["boe_per_iter"]["median"]
        marks = [k for k in (1, 10, 30, 50, 80) if k <= len(med)]
        print(m, " ".join(f"it{k}={med[k - 1]:.1f}" for k in marks))
    if args.png:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        for m, row in table.items():
            q = row["boe_per_iter"]
            x = range(1, len(q["median"]) + 1)
            ax.plot(x, q["median"], label=m)
            ax.fill_between(x, q["q25"], q["q75"], alpha=0.2)
        ax.set_xlabel("iteration")
        ax.set_ylabel("BOE [m]")
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.png, dpi=120)


if __name__ == "__main__":
    main()
