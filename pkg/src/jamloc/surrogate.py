"""Gaussian-process surrogate over ``[px, py, z]`` features with a two-scale RBF kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .gridworld import Cell, GridMap, height_feature_raster

JITTERS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)
STD_FLOOR = 1e-8
DEFAULT_HEIGHT_RADIUS = 10.0


class NotPDError(LinAlgError):
    pass


@dataclass(frozen=True)
class KernelParams:
    sigma2_long: float
    sigma2_short: float
    ls_long: tuple[float, float, float]
    ls_short: tuple[float, float, float]
    sigma2_noise: float

    def __post_init__(self):
        object.__setattr__(self, "ls_long", tuple(float(v) for v in self.ls_long))
        object.__setattr__(self, "ls_short", tuple(float(v) for v in self.ls_short))
        vals = [self.sigma2_long, self.sigma2_short, self.sigma2_noise, *self.ls_long, *self.ls_short]
        if len(self.ls_long) != 3 or len(self.ls_short) != 3:
            raise ValueError("need three length scales per component")
        if not all(v > 0 and math.isfinite(v) for v in vals):
            raise ValueError("kernel parameters must be finite and strictly positive")

    @property
    def prior_var(self) -> float:
        return self.sigma2_long + self.sigma2_short

    def to_log(self) -> np.ndarray:
        return np.log([self.sigma2_long, self.sigma2_short, *self.ls_long, *self.ls_short, self.sigma2_noise])

    @classmethod
    def from_log(cls, v) -> "KernelParams":
        e = np.exp(np.asarray(v, dtype=float))
        return cls(float(e[0]), float(e[1]), tuple(e[2:5]), tuple(e[5:8]), float(e[8]))

    def canonical(self) -> "KernelParams":
        """Swap long/short length scales per spatial dimension so short <= long."""
        lo, sh = list(self.ls_long), list(self.ls_short)
        for d in (0, 1):
            if sh[d] > lo[d]:
                lo[d], sh[d] = sh[d], lo[d]
        return KernelParams(self.sigma2_long, self.sigma2_short, tuple(lo), tuple(sh), self.sigma2_noise)

    def to_dict(self) -> dict:
        return {
            "sigma2_long": self.sigma2_long,
            "sigma2_short": self.sigma2_short,
            "ls_long": list(self.ls_long),
            "ls_short": list(self.ls_short),
            "sigma2_noise": self.sigma2_noise,
        }


@dataclass(frozen=True)
class Bounds:
    """Box constraints on hyperparameters (natural scale; searched in log space)."""

    variance: tuple[float, float] = (1e-3, 1e3)
    length_scale: tuple[float, float] = (1e-2, 3.0)
    noise: tuple[float, float] = (1e-4, 1e2)

    def log_box(self) -> list[tuple[float, float]]:
        v = tuple(np.log(self.variance))
        ls = tuple(np.log(self.length_scale))
        return [v, v] + [ls] * 6 + [tuple(np.log(self.noise))]


DEFAULT_BOUNDS = Bounds()


class FeatureSpace:
    """Maps cells to feature vectors ``[px, py, z]`` in ``[0, 1]^3`` for one map."""

    def __init__(self, gmap: GridMap, radius: float = DEFAULT_HEIGHT_RADIUS):
        self.map = gmap
        self.radius = radius
        self._z = height_feature_raster(gmap, radius)

    def of(self, cells) -> np.ndarray:
        cells = list(cells)
        if not cells:
            return np.zeros((0, 3))
        c = np.asarray(cells, dtype=int).reshape(-1, 2)
        w = self.map.width - 1
        h = self.map.height - 1
        # (ix * cell_size) / ((width - 1) * cell_size)
        return np.column_stack([c[:, 0] / w, c[:, 1] / h, self._z[c[:, 1], c[:, 0]]])

    def feasible(self) -> np.ndarray:
        cached = getattr(self, "_feasible", None)
        if cached is None:
            cached = self._feasible = self.of(self.map.feasible_cells)
        return cached


@dataclass(frozen=True)
class Dataset:
    """Ordered, value-semantic collection of measurements. ``extend`` returns a new instance."""

    X: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cells: tuple[Cell, ...] = ()
    iterations: tuple[int, ...] = ()

    def __post_init__(self):
        X = np.array(self.X, dtype=float).reshape(-1, 3)
        y = np.array(self.y, dtype=float).reshape(-1)
        if not (len(X) == len(y) == len(self.cells) == len(self.iterations)):
            raise ValueError("dataset columns have mismatched lengths")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "cells", tuple(Cell(*c) for c in self.cells))
        object.__setattr__(self, "iterations", tuple(int(i) for i in self.iterations))

    def __len__(self) -> int:
        return len(self.y)

    def extend(self, X, y, cells, iterations) -> "Dataset":
        return Dataset(
            np.vstack([self.X, np.asarray(X, dtype=float).reshape(-1, 3)]),
            np.concatenate([self.y, np.asarray(y, dtype=float).reshape(-1)]),
            self.cells + tuple(cells),
            self.iterations + tuple(iterations),
        )

    @property
    def norm(self) -> tuple[float, float]:
        """Target (mean, std); std falls back to 1 for (near-)constant targets."""
        if len(self.y) == 0:
            return 0.0, 1.0
        mean = float(self.y.mean())
        std = float(self.y.std())
        return mean, (std if std >= STD_FLOOR else 1.0)

    def targets(self, normalize: bool = True) -> tuple[np.ndarray, float, float]:
        if not normalize:
            return self.y.copy(), 0.0, 1.0
        mean, std = self.norm
        return (self.y - mean) / std, mean, std


@dataclass(frozen=True)
class Posterior:
    mu: np.ndarray
    var: np.ndarray
    noise_var: float = 0.0

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(self.var)

    @property
    def observed_var(self) -> np.ndarray:
        """Predictive variance of a new noisy measurement (latent + noise)."""
        return self.var + self.noise_var


def _sqdist(A: np.ndarray, B: np.ndarray, ls) -> np.ndarray:
    a = A / np.asarray(ls)
    b = B / np.asarray(ls)
    d = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def _sqdist_exact(A: np.ndarray, B: np.ndarray, ls) -> np.ndarray:
    diff = (A[:, None, :] - B[None, :, :]) / np.asarray(ls)
    return (diff * diff).sum(-1)


def kernel_matrix(theta: KernelParams, A, B, include_noise: bool = False) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    sq = _sqdist_exact if len(A) * len(B) <= 4096 else _sqdist
    K = theta.sigma2_long * np.exp(-0.5 * sq(A, B, theta.ls_long))
    K += theta.sigma2_short * np.exp(-0.5 * sq(A, B, theta.ls_short))
    if include_noise:
        same = np.all(A[:, None, :] == B[None, :, :], axis=-1)
        K += theta.sigma2_noise * same
    return K


def kernel(theta: KernelParams, a, b, include_noise: bool = False) -> float:
    return float(kernel_matrix(theta, [a], [b], include_noise)[0, 0])


def _factor(M: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, escalating diagonal jitter on failure."""
    try:
        return cholesky(M, lower=True, check_finite=False)
    except LinAlgError:
        pass
    eye = np.eye(len(M))
    for j in JITTERS:
        try:
            return cholesky(M + j * eye, lower=True, check_finite=False)
        except LinAlgError:
            continue
    raise NotPDError("kernel matrix not PD")


def _train_factor(data: Dataset, theta: KernelParams) -> np.ndarray:
    K = kernel_matrix(theta, data.X, data.X)
    K[np.diag_indices_from(K)] += theta.sigma2_noise
    return _factor(K)


def log_marginal_likelihood(data: Dataset, theta: KernelParams, normalize: bool = True) -> float:
    if len(data) < 1:
        raise ValueError("log marginal likelihood needs at least one observation")
    y, _, _ = data.targets(normalize)
    L = _train_factor(data, theta)
    alpha = cho_solve((L, True), y, check_finite=False)
    n = len(y)
    return float(-0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * n * math.log(2 * math.pi))


class _LMLObjective:
    """Negative LML in log-parameter space with the pairwise differences cached."""

    def __init__(self, data: Dataset):
        y, _, _ = data.targets(True)
        self.y = y
        self.n = len(y)
        diff = data.X[:, None, :] - data.X[None, :, :]
        self.d2 = np.ascontiguousarray(np.moveaxis(diff * diff, -1, 0)).reshape(3, -1)
        self.diag = np.arange(self.n) * (self.n + 1)
        self.const = 0.5 * self.n * math.log(2 * math.pi)

    @staticmethod
    def _canon(v: np.ndarray) -> np.ndarray:
        v = np.array(v, dtype=float)
        lo, sh = v[2:4].copy(), v[5:7].copy()
        v[2:4], v[5:7] = np.maximum(lo, sh), np.minimum(lo, sh)
        return v

    def params(self, v) -> KernelParams:
        return KernelParams.from_log(self._canon(v))

    def __call__(self, v) -> float:
        v = self._canon(v)
        e = np.exp(v)
        inv = np.exp(-2.0 * v[2:8])
        q = -0.5 * (inv.reshape(2, 3) @ self.d2)
        K = e[0] * np.exp(q[0]) + e[1] * np.exp(q[1])
        K[self.diag] += e[8]
        K = K.reshape(self.n, self.n)
        try:
            L = np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            try:
                L = _factor(K)
            except NotPDError:
                return np.inf
        a = solve_triangular(L, self.y, lower=True, check_finite=False)
        return float(0.5 * a @ a + np.log(np.diag(L)).sum() + self.const)


def fit(
    data: Dataset,
    restarts: int = 8,
    bounds: Bounds = DEFAULT_BOUNDS,
    rng: np.random.Generator | None = None,
    init: KernelParams | None = None,
    max_evals: int = 2000,
) -> KernelParams:
    """Maximise the log marginal likelihood with bounded Nelder-Mead restarts.

    Starts are drawn log-uniformly inside ``bounds``. If ``init`` is given it
    replaces the first random start (warm start from a previous fit). The
    returned parameters are in canonical form (short <= long length scale on
    both spatial axes), which is also the form the objective is evaluated in.
    """
    if len(data) < 2:
        raise ValueError("fitting needs at least two observations")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    box = bounds.log_box()
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    obj = _LMLObjective(data)
    best_v, best_f = None, np.inf
    for r in range(restarts):
        x0 = rng.uniform(lo, hi)
        if r == 0 and init is not None:
            x0 = np.clip(init.to_log(), lo, hi)
        res = minimize(
            obj,
            x0,
            method="Nelder-Mead",
            bounds=box,
            options={"maxfev": max_evals, "xatol": 1e-4, "fatol": 1e-6, "adaptive": True},
        )
        if np.isfinite(res.fun) and res.fun < best_f:
            best_v, best_f = res.x, res.fun
    if best_v is None:
        raise NotPDError("kernel matrix not PD for every restart")
    return obj.params(best_v)


def _predict(data: Dataset, theta: KernelParams, Ks: np.ndarray, normalize: bool, want_var: bool):
    y, mean, std = data.targets(normalize)
    L = _train_factor(data, theta)
    alpha = cho_solve((L, True), y, check_finite=False)
    mu = Ks @ alpha * std + mean
    if not want_var:
        return mu, None
    v = solve_triangular(L, Ks.T, lower=True, check_finite=False)
    var = theta.prior_var - np.einsum("ij,ij->j", v, v)
    return mu, np.maximum(var, 0.0) * std * std


def posterior(data: Dataset, theta: KernelParams, queries, normalize: bool = True) -> Posterior:
    """Closed-form predictive mean and latent variance at ``queries``."""
    if len(data) < 1:
        raise ValueError("posterior needs at least one observation")
    Ks = kernel_matrix(theta, queries, data.X)
    mu, var = _predict(data, theta, Ks, normalize, True)
    _, std = data.norm if normalize else (0.0, 1.0)
    return Posterior(mu, var, theta.sigma2_noise * std * std)


def posterior_mean(data: Dataset, theta: KernelParams, queries, normalize: bool = True) -> np.ndarray:
    return _predict(data, theta, kernel_matrix(theta, queries, data.X), normalize, False)[0]


class GridPosterior:
    """Posterior over a fixed query set for a dataset that only grows by appending.

    Cross-covariance columns are kept while ``theta`` is unchanged, so each
    call only evaluates the kernel against newly appended observations.
    """

    def __init__(self, queries):
        self.Q = np.atleast_2d(np.asarray(queries, dtype=float))
        self._reset(None)

    def _reset(self, theta):
        self._theta = theta
        self._X = np.zeros((0, 3))
        self._Ks = np.zeros((len(self.Q), 0))

    def _cross(self, data: Dataset, theta: KernelParams) -> np.ndarray:
        k = len(self._X)
        if theta != self._theta or k > len(data) or not np.array_equal(data.X[:k], self._X):
            self._reset(theta)
            k = 0
        if k < len(data):
            self._Ks = np.hstack([self._Ks, kernel_matrix(theta, self.Q, data.X[k:])])
            self._X = data.X.copy()
        return self._Ks

    def mean(self, data: Dataset, theta: KernelParams, normalize: bool = True) -> np.ndarray:
        return _predict(data, theta, self._cross(data, theta), normalize, False)[0]

    def __call__(self, data: Dataset, theta: KernelParams, normalize: bool = True) -> Posterior:
        if len(data) < 1:
            raise ValueError("posterior needs at least one observation")
        mu, var = _predict(data, theta, self._cross(data, theta), normalize, True)
        _, std = data.norm if normalize else (0.0, 1.0)
        return Posterior(mu, var, theta.sigma2_noise * std * std)
