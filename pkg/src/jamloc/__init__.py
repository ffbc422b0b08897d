"""Active jammer localization: GP surrogate, UCB acquisition and acquisition-aware A* on urban grids."""

from .acquisition import AcquisitionField, select_target, ucb
from .gridworld import Cell, GridMap, gen_random_map, load_map, save_map
from .harness import Method, TrialConfig, TrialResult, kappa_sweep, run_experiment, run_trial
from .planner import EdgeCostParams, Path, astar, plan_aucb
from .propagation import GroundTruthField, PropagationParams, build_field, sample_measurement
from .surrogate import Dataset, KernelParams, Posterior, fit, posterior

__all__ = [
    "AcquisitionField",
    "Cell",
    "Dataset",
    "EdgeCostParams",
    "GridMap",
    "GroundTruthField",
    "KernelParams",
    "Method",
    "Path",
    "Posterior",
    "PropagationParams",
    "TrialConfig",
    "TrialResult",
    "astar",
    "build_field",
    "fit",
    "gen_random_map",
    "kappa_sweep",
    "load_map",
    "plan_aucb",
    "posterior",
    "run_experiment",
    "run_trial",
    "sample_measurement",
    "save_map",
    "select_target",
    "ucb",
]
