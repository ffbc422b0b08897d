"""BO loop (sense, update, acquire, plan), Monte-Carlo experiments, metrics and result files."""

from __future__ import annotations

import csv
import dataclasses
import functools
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path as FsPath

import numpy as np

from . import planner as pl
from .acquisition import select_target, ucb
from .gridworld import Cell, GridMap, gen_random_map, lex_key, load_map
from .propagation import PropagationParams, build_field, gen_crowdsourced, measurements_to_dataset, sample_measurement
from .surrogate import DEFAULT_HEIGHT_RADIUS, Bounds, Dataset, FeatureSpace, KernelParams, GridPosterior, Posterior, fit

log = logging.getLogger(__name__)


class Method(str, Enum):
    AUCB_BUDGET = "AUCB_BUDGET"
    AUCB_UNBOUNDED = "AUCB_UNBOUNDED"
    RM = "RM"
    RIS = "RIS"


ALL_METHODS = (Method.AUCB_BUDGET, Method.AUCB_UNBOUNDED, Method.RM, Method.RIS)

DEFAULT_MAP_SPEC = {
    "width": 64,
    "height": 64,
    "n_buildings": 12,
    "building_size_range": [4, 12],
    "height_range": [10.0, 60.0],
    "cell_size": 2.0,
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrialConfig:
    method: Method = Method.AUCB_BUDGET
    iterations: int = 80
    b0: int = 35
    bn: int = 2
    kappa: float = 2.0
    noise_var: float = 2.5
    delta: int = 50
    edge_params: pl.EdgeCostParams = field(default_factory=pl.EdgeCostParams)
    gp_restarts: int = 8
    seed: int = 0
    # generator params (optionally with "seed"), or {"file": path} / {"text": map-file content}
    map_spec: dict = field(default_factory=lambda: dict(DEFAULT_MAP_SPEC))
    jammer: tuple[int, int] | str = "random-feasible"
    propagation: PropagationParams = field(default_factory=PropagationParams)
    height_radius: float = DEFAULT_HEIGHT_RADIUS
    gp_max_evals: int = 100
    refit_until: int = 60
    refit_every: int = 5

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.iterations < 1 or self.bn < 1 or self.b0 < 0:
            raise ConfigError("need iterations >= 1, bn >= 1, b0 >= 0")
        if self.kappa < 0 or self.noise_var < 0:
            raise ConfigError("kappa and noise_var must be non-negative")
        if self.delta is not None and self.delta < 1:
            raise ConfigError("delta must be >= 1 or null")
        if self.gp_restarts < 1:
            raise ConfigError("gp_restarts must be >= 1")
        if self.jammer != "random-feasible":
            object.__setattr__(self, "jammer", tuple(int(v) for v in self.jammer))

    def replace(self, **kw) -> "TrialConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["method"] = self.method.value
        d["edge_params"] = dataclasses.asdict(self.edge_params)
        d["propagation"] = dataclasses.asdict(self.propagation)
        d["jammer"] = self.jammer if isinstance(self.jammer, str) else list(self.jammer)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrialConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        try:
            if "edge_params" in d:
                d["edge_params"] = pl.EdgeCostParams(**d["edge_params"])
            if "propagation" in d:
                d["propagation"] = PropagationParams(**d["propagation"])
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "TrialConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class TrialResult:
    method: Method
    seed: int
    jammer: Cell
    start: Cell
    sme_per_iter: list[float]
    boe_per_iter: list[float]
    boe_raw_per_iter: list[float]
    best_sampled_cell: Cell
    posterior_argmax_cell: Cell
    visited: list[list[Cell]]
    measured: list[list[Cell]]
    theta_final: KernelParams
    dataset_size: int
    wallclock: float = 0.0
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "seed": self.seed,
            "jammer": list(self.jammer),
            "start": list(self.start),
            "sme_per_iter": self.sme_per_iter,
            "boe_per_iter": self.boe_per_iter,
            "boe_raw_per_iter": self.boe_raw_per_iter,
            "best_sampled_cell": list(self.best_sampled_cell),
            "posterior_argmax_cell": list(self.posterior_argmax_cell),
            "visited": [[list(c) for c in it] for it in self.visited],
            "measured": [[list(c) for c in it] for it in self.measured],
            "theta_final": self.theta_final.to_dict(),
            "dataset_size": self.dataset_size,
            "wallclock": self.wallclock,
            "config": self.config,
        }


def _lex_argmax(cells, values) -> Cell:
    values = np.asarray(values)
    top = values.max()
    return min((c for c, v in zip(cells, values) if v == top), key=lex_key)


def compute_sme(post: Posterior | np.ndarray, gmap: GridMap, jammer) -> float:
    """Distance (m) from the jammer to the arg-max of the posterior mean over the feasible set."""
    mu = post.mu if isinstance(post, Posterior) else np.asarray(post)
    return gmap.distance(jammer, _lex_argmax(gmap.feasible_cells, mu))


def best_sample(data: Dataset) -> Cell:
    if len(data) == 0:
        raise ValueError("empty dataset")
    return data.cells[int(np.argmax(data.y))]


def compute_boe(data: Dataset, gmap: GridMap, jammer) -> float:
    """Distance (m) from the jammer to the highest-RSS sample (earliest wins ties)."""
    return gmap.distance(jammer, best_sample(data))


def build_map(cfg: TrialConfig, seed_seq: np.random.SeedSequence) -> GridMap:
    spec = dict(cfg.map_spec)
    if "file" in spec:
        return load_map(FsPath(spec["file"]).read_text())
    if "text" in spec:
        return load_map(spec["text"])
    seed = spec.pop("seed", None)
    if seed is None:
        seed = int(seed_seq.generate_state(1)[0])
    spec = {**DEFAULT_MAP_SPEC, **spec}
    return gen_random_map(
        seed,
        spec["width"],
        spec["height"],
        spec["n_buildings"],
        tuple(spec["building_size_range"]),
        tuple(spec["height_range"]),
        spec["cell_size"],
    )


@dataclass
class _Scene:
    gmap: GridMap
    field: object
    features: FeatureSpace
    jammer: Cell
    start: Cell
    d0: Dataset


def _scene_key(cfg: TrialConfig) -> str:
    keep = ("seed", "b0", "noise_var", "map_spec", "jammer", "propagation", "height_radius")
    d = cfg.to_dict()
    return json.dumps({k: d[k] for k in keep}, sort_keys=True)


@functools.lru_cache(maxsize=8)
def _cached_scene(key: str) -> _Scene:
    cfg = TrialConfig.from_dict(json.loads(key))
    # fixed spawn order: everything but the agent stream is method-independent
    ss_map, ss_jam, ss_field, ss_d0, ss_start, _ = np.random.SeedSequence(cfg.seed).spawn(6)
    gmap = build_map(cfg, ss_map)
    feas = gmap.feasible_cells
    if cfg.jammer == "random-feasible":
        jammer = feas[int(np.random.default_rng(ss_jam).integers(len(feas)))]
    else:
        jammer = Cell(*cfg.jammer)
    prop = dataclasses.replace(cfg.propagation, seed=int(ss_field.generate_state(1)[0] % 2**31))
    gt = build_field(gmap, jammer, prop)
    features = FeatureSpace(gmap, cfg.height_radius)
    features.feasible()
    d0 = gen_crowdsourced(gt, cfg.b0, cfg.noise_var, np.random.default_rng(ss_d0), features)
    start = feas[int(np.random.default_rng(ss_start).integers(len(feas)))]
    return _Scene(gmap, gt, features, jammer, start, d0)


def _scene(cfg: TrialConfig) -> tuple[_Scene, np.random.Generator]:
    """Shared scene for a trial seed plus the method's own agent rng (scenes are immutable)."""
    scene = _cached_scene(_scene_key(cfg))
    ss_agent = np.random.SeedSequence(cfg.seed).spawn(6)[5]
    return scene, np.random.default_rng(ss_agent)


def _initial_theta() -> KernelParams:
    return KernelParams(1.0, 0.1, (0.3, 0.3, 0.3), (0.05, 0.05, 0.3), 0.1)


def run_trial(cfg: TrialConfig) -> TrialResult:
    t0 = time.perf_counter()
    sc, rng = _scene(cfg)
    gmap, feas = sc.gmap, sc.gmap.feasible_cells
    grid_post = GridPosterior(sc.features.feasible())
    data = sc.d0
    pos = sc.start
    theta = None
    bounds = Bounds()
    delta = None if cfg.method is Method.AUCB_UNBOUNDED else cfg.delta
    sme, boe, boe_raw, visited, measured = [], [], [], [], []
    for n in range(1, cfg.iterations + 1):
        if len(data) >= 2 and (theta is None or len(data) <= cfg.refit_until or n % cfg.refit_every == 0):
            # a cold start has no warm restart to lean on
            evals = cfg.gp_max_evals if theta is not None else 5 * cfg.gp_max_evals
            theta = fit(data, cfg.gp_restarts, bounds, rng, init=theta, max_evals=evals)
        elif theta is None:
            theta = _initial_theta()

        if cfg.method in (Method.AUCB_BUDGET, Method.AUCB_UNBOUNDED):
            if len(data):
                post = grid_post(data, theta)
            else:
                post = Posterior(np.zeros(len(feas)), np.full(len(feas), theta.prior_var))
            acq = ucb(post, cfg.kappa, feas)
            target = select_target(acq)
            path = pl.plan_aucb(gmap, pos, target, acq, cfg.edge_params, delta)
            wps = pl.subsample_waypoints(path, cfg.bn)
            pos = path.cells[-1]
            cells = list(path.cells)
        elif cfg.method is Method.RM:
            path = pl.random_motion(gmap, pos, cfg.delta, rng)
            wps = pl.subsample_waypoints(path, cfg.bn)
            pos = path.cells[-1]
            cells = list(path.cells)
        else:
            wps = pl.random_iid(feas, cfg.bn, rng)
            pos = wps[-1]
            cells = list(wps)

        ms = [sample_measurement(sc.field, c, cfg.noise_var, rng, n) for c in wps]
        data = measurements_to_dataset(sc.features, ms, data)
        visited.append(cells)
        measured.append(list(wps))

        mu = grid_post.mean(data, theta)
        sme.append(compute_sme(mu, gmap, sc.jammer))
        raw = compute_boe(data, gmap, sc.jammer)
        boe_raw.append(raw)
        boe.append(min(raw, boe[-1]) if boe else raw)

    return TrialResult(
        method=cfg.method,
        seed=cfg.seed,
        jammer=sc.jammer,
        start=sc.start,
        sme_per_iter=sme,
        boe_per_iter=boe,
        boe_raw_per_iter=boe_raw,
        best_sampled_cell=best_sample(data),
        posterior_argmax_cell=_lex_argmax(feas, mu),
        visited=visited,
        measured=measured,
        theta_final=theta,
        dataset_size=len(data),
        wallclock=time.perf_counter() - t0,
        config=cfg.to_dict(),
    )


def trial_seed(base_seed: int, t: int) -> int:
    return int(np.random.SeedSequence([base_seed, t]).generate_state(1)[0])


def _job(args):
    t, cfg = args
    try:
        return t, cfg.method, run_trial(cfg), None
    except Exception as exc:  # recorded and excluded from aggregates
        log.exception("trial %d (%s) failed", t, cfg.method.value)
        return t, cfg.method, None, f"{type(exc).__name__}: {exc}"


def quantiles(x) -> dict:
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return {"median": None, "q25": None, "q75": None}
    q25, med, q75 = np.percentile(x, [25, 50, 75], method="linear")
    return {"median": float(med), "q25": float(q25), "q75": float(q75)}


@dataclass
class ExperimentSummary:
    base_seed: int
    trials: int
    methods: list[Method]
    results: dict[Method, dict[int, TrialResult]]
    failures: list[dict]

    def final(self, method: Method, metric: str = "boe", iteration: int | None = None) -> list[float]:
        key = "boe_per_iter" if metric == "boe" else "sme_per_iter"
        out = []
        for t in sorted(self.results[method]):
            trace = getattr(self.results[method][t], key)
            out.append(trace[-1] if iteration is None else trace[iteration - 1])
        return out

    def table(self) -> dict:
        rows = {}
        for m in self.methods:
            res = self.results[m]
            iters = len(next(iter(res.values())).boe_per_iter) if res else 0
            per_iter = [quantiles(self.final(m, "boe", k)) for k in range(1, iters + 1)]
            rows[m.value] = {
                "n_trials": len(res),
                "sme": quantiles(self.final(m, "sme")),
                "boe": quantiles(self.final(m, "boe")),
                "boe_per_iter": {
                    "median": [q["median"] for q in per_iter],
                    "q25": [q["q25"] for q in per_iter],
                    "q75": [q["q75"] for q in per_iter],
                },
            }
        return {"base_seed": self.base_seed, "trials": self.trials, "methods": rows, "failures": self.failures}

    def trials_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "method", "iter", "sme_m", "boe_m"])
        for t in range(self.trials):
            for m in self.methods:
                r = self.results[m].get(t)
                if r is None:
                    continue
                for k, (s, b) in enumerate(zip(r.sme_per_iter, r.boe_per_iter), start=1):
                    w.writerow([t, m.value, k, f"{s:.6f}", f"{b:.6f}"])
        return buf.getvalue()


def run_experiment(cfg_base: TrialConfig, methods=ALL_METHODS, trials: int = 100, workers: int = 1) -> ExperimentSummary:
    """Run every method on ``trials`` shared scenes (map, jammer, D0, start per trial)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    methods = [Method(m) for m in methods]
    jobs = [
        (t, cfg_base.replace(method=m, seed=trial_seed(cfg_base.seed, t)))
        for t in range(trials)
        for m in methods
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_job, jobs))
    else:
        out = [_job(j) for j in jobs]
    results: dict[Method, dict[int, TrialResult]] = {m: {} for m in methods}
    failures = []
    for t, m, res, err in out:
        if res is None:
            failures.append({"trial": t, "method": m.value, "error": err})
        else:
            results[m][t] = res
    return ExperimentSummary(cfg_base.seed, trials, methods, results, failures)


@dataclass
class SweepSummary:
    checkpoint: int
    rows: list[dict]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kappa", "median_boe_m", "q25", "q75"])
        for r in self.rows:
            w.writerow([f"{r['kappa']:g}", f"{r['median']:.6f}", f"{r['q25']:.6f}", f"{r['q75']:.6f}"])
        return buf.getvalue()


DEFAULT_KAPPAS = (0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0)


def kappa_sweep(
    cfg_base: TrialConfig,
    kappas=DEFAULT_KAPPAS,
    checkpoint_iter: int = 30,
    trials: int = 100,
    workers: int = 1,
) -> SweepSummary:
    """BOE at ``checkpoint_iter`` per kappa; trials share scenes across kappas."""
    if checkpoint_iter > cfg_base.iterations:
        raise ValueError("checkpoint_iter exceeds iterations")
    # later iterations cannot affect BOE at the checkpoint
    cfg = cfg_base.replace(iterations=checkpoint_iter)
    rows = []
    for k in kappas:
        ex = run_experiment(cfg.replace(kappa=float(k)), [cfg.method], trials, workers)
        q = quantiles(ex.final(cfg.method, "boe", checkpoint_iter))
        rows.append({"kappa": float(k), **q, "failures": len(ex.failures)})
    return SweepSummary(checkpoint_iter, rows)


def write_experiment(ex: ExperimentSummary, out_dir) -> None:
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trials.csv").write_text(ex.trials_csv())
    (out / "summary.json").write_text(json.dumps(ex.table(), indent=2) + "\n")
