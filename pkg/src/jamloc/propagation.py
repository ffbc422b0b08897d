"""Synthetic jammer RSS field (log-distance + wall loss + correlated shadowing) and noisy sensing."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .gridworld import Cell, GridMap, crossed_cells, lex_key
from .surrogate import Dataset, FeatureSpace

WALL_LOSS_CAP_DB = 30.0
MAX_SHADOW_RETRIES = 50


class FieldError(ValueError):
    pass


@dataclass(frozen=True)
class PropagationParams:
    p0: float = 30.0
    d0: float = 1.0
    gamma: float = 2.7
    wall_loss: float = 1.5
    shadow_sigma: float = 3.0
    shadow_corr_len: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.wall_loss < 0 or self.shadow_sigma < 0:
            raise ValueError("wall_loss and shadow_sigma must be non-negative")
        if not self.shadow_corr_len > 0 or not self.d0 > 0:
            raise ValueError("shadow_corr_len and d0 must be positive")


@dataclass(frozen=True)
class Measurement:
    cell: Cell
    y: float
    iteration: int = 0


@dataclass(frozen=True, eq=False)
class GroundTruthField:
    """Hidden RSS field on the feasible cells. ``grid`` holds NaN on obstacles."""

    map: GridMap
    jammer: Cell
    grid: np.ndarray
    params: PropagationParams
    shadow_seed: int = field(default=0)

    def value(self, c) -> float:
        if not self.map.is_feasible(c):
            raise FieldError(f"cell {tuple(c)} is not feasible")
        return float(self.grid[c[1], c[0]])

    @property
    def values(self) -> np.ndarray:
        """Field values aligned with ``map.feasible_cells``."""
        return self.grid[~self.map.obstacle_mask]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("ix,iy,rss_dbm\n")
        for c in self.map.feasible_cells:
            buf.write(f"{c.ix},{c.iy},{self.grid[c.iy, c.ix]:.6f}\n")
        return buf.getvalue()


def nearest_feasible(gmap: GridMap, target) -> Cell:
    return min(gmap.feasible_cells, key=lambda c: (gmap.distance(c, target), lex_key(c)))


def shadowing_surface(gmap: GridMap, sigma: float, corr_len: float, seed: int) -> np.ndarray:
    """Zero-mean Gaussian-smoothed white noise rescaled to standard deviation ``sigma``."""
    if sigma == 0:
        return np.zeros((gmap.height, gmap.width))
    rng = np.random.default_rng(seed)
    white = rng.standard_normal((gmap.height, gmap.width))
    s = ndimage.gaussian_filter(white, sigma=corr_len / gmap.cell_size, mode="reflect")
    s -= s.mean()
    sd = s.std()
    return s * (sigma / sd) if sd > 0 else s


def wall_counts(gmap: GridMap, jammer) -> np.ndarray:
    """Obstacle cells crossed by the line from each cell to the jammer."""
    W = np.zeros((gmap.height, gmap.width), dtype=int)
    obst = gmap.obstacle_mask
    for c in gmap.feasible_cells:
        W[c.iy, c.ix] = sum(1 for x, y in crossed_cells(gmap, c, jammer) if obst[y, x])
    return W


def deterministic_part(gmap: GridMap, jammer, params: PropagationParams) -> np.ndarray:
    yy, xx = np.mgrid[0 : gmap.height, 0 : gmap.width]
    d = gmap.cell_size * np.hypot(xx - jammer[0], yy - jammer[1])
    pl = params.p0 - 10.0 * params.gamma * np.log10(np.maximum(d, params.d0) / params.d0)
    if params.wall_loss > 0:
        pl -= np.minimum(params.wall_loss * wall_counts(gmap, jammer), WALL_LOSS_CAP_DB)
    return pl


def _argmax_cell(gmap: GridMap, grid: np.ndarray) -> Cell:
    cells = gmap.feasible_cells
    vals = grid[~gmap.obstacle_mask]
    # feasible_cells is in lexicographic order, so argmax's first hit is the tie-break
    return cells[int(np.argmax(vals))]


def build_field(gmap: GridMap, jammer, params: PropagationParams = PropagationParams()) -> GroundTruthField:
    jammer = Cell(*jammer)
    if not gmap.is_feasible(jammer):
        raise FieldError("jammer must lie on a feasible cell")
    base = deterministic_part(gmap, jammer, params)
    target = nearest_feasible(gmap, jammer)
    for k in range(MAX_SHADOW_RETRIES):
        seed = params.seed + k
        grid = base + shadowing_surface(gmap, params.shadow_sigma, params.shadow_corr_len, seed)
        grid = np.where(gmap.obstacle_mask, np.nan, grid)
        if _argmax_cell(gmap, grid) == target:
            grid.flags.writeable = False
            return GroundTruthField(gmap, jammer, grid, params, seed)
    raise FieldError("could not draw shadowing that keeps the field maximum at the jammer")


def sample_measurement(field: GroundTruthField, cell, noise_var: float, rng: np.random.Generator, iteration: int = 0) -> Measurement:
    if noise_var < 0:
        raise ValueError("noise_var must be non-negative")
    v = field.value(cell)
    # always draw so the rng stream does not depend on noise_var being zero
    xi = rng.standard_normal() * np.sqrt(noise_var)
    return Measurement(Cell(*cell), v + float(xi), iteration)


def measurements_to_dataset(features: FeatureSpace, ms, base: Dataset | None = None) -> Dataset:
    ms = list(ms)
    base = Dataset() if base is None else base
    if not ms:
        return base
    cells = [m.cell for m in ms]
    return base.extend(features.of(cells), [m.y for m in ms], cells, [m.iteration for m in ms])


def gen_crowdsourced(
    field: GroundTruthField,
    b0: int,
    noise_var: float,
    rng: np.random.Generator,
    features: FeatureSpace | None = None,
) -> Dataset:
    """``b0`` measurements at cells drawn uniformly with replacement from the feasible set."""
    if b0 < 0:
        raise ValueError("b0 must be non-negative")
    features = FeatureSpace(field.map) if features is None else features
    cells = field.map.feasible_cells
    idx = rng.integers(0, len(cells), size=b0)
    ms = [sample_measurement(field, cells[i], noise_var, rng, 0) for i in idx]
    return measurements_to_dataset(features, ms)
