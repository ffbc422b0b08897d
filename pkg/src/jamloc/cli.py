"""Command-line entry point: ``run``, ``sweep-kappa`` and ``gen-map``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .gridworld import gen_random_map, save_map
from .harness import ALL_METHODS, DEFAULT_KAPPAS, ConfigError, Method, TrialConfig, kappa_sweep, run_experiment, write_experiment


def _load_config(path: str) -> TrialConfig:
    return TrialConfig.from_json(Path(path).read_text())


def _methods(text: str | None, cfg: TrialConfig) -> list[Method]:
    if not text:
        return [cfg.method]
    if text == "all":
        return list(ALL_METHODS)
    return [Method(m.strip()) for m in text.split(",")]


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("size must look like 64x64") from exc


def _kappas(text: str) -> list[float]:
    return [float(k) for k in text.split(",") if k.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jamloc", description="Active jammer localization simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run a Monte-Carlo experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default="results")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--trials", type=int, default=1)
    r.add_argument("--methods", help="comma-separated method names, or 'all' (default: config method)")

    s = sub.add_parser("sweep-kappa", help="BOE at a checkpoint iteration across kappa values")
    s.add_argument("--config", required=True)
    s.add_argument("--kappas", type=_kappas, default=list(DEFAULT_KAPPAS))
    s.add_argument("--checkpoint", type=int, default=30)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", default="results")

    g = sub.add_parser("gen-map", help="write a random rectangular-building map")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--size", type=_size, default=(64, 64))
    g.add_argument("--buildings", type=int, default=12)
    g.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.cmd == "gen-map":
            w, h = args.size
            Path(args.out).write_text(save_map(gen_random_map(args.seed, w, h, args.buildings)))
            return 0
        cfg = _load_config(args.config)
        out = Path(args.out)
        if args.cmd == "run":
            ex = run_experiment(cfg, _methods(args.methods, cfg), args.trials, args.workers)
            write_experiment(ex, out)
            for f in ex.failures:
                print(f"trial {f['trial']} {f['method']} failed: {f['error']}", file=sys.stderr)
            return 1 if ex.failures else 0
        sw = kappa_sweep(cfg, args.kappas, args.checkpoint, args.trials, args.workers)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(sw.to_csv())
        return 0
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
