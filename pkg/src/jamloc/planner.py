"""Grid search: A*, the acquisition-aware A-UCB* planner, and the random baselines."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .acquisition import AcquisitionField
from .gridworld import Cell, GridMap, lex_key, neighbors, reachable_from


class PlanningError(ValueError):
    pass


@dataclass(frozen=True)
class Path:
    cells: tuple[Cell, ...]
    length: float
    cost: float = 0.0

    @property
    def steps(self) -> int:
        return len(self.cells) - 1


@dataclass(frozen=True)
class EdgeCostParams:
    lambda_len: float = 1.0
    lambda_info: float = 0.8
    epsilon: float = 1e-6

    def __post_init__(self):
        if not self.lambda_len > 0 or self.lambda_info < 0 or not self.epsilon > 0:
            raise ValueError("need lambda_len > 0, lambda_info >= 0, epsilon > 0")


def edge_cost(params: EdgeCostParams, acq_a: float, acq_b: float, dist: float) -> float:
    rate = params.lambda_len - params.lambda_info * 0.5 * (acq_a + acq_b)
    return max(rate, params.epsilon) * dist


CostFn = Callable[[Cell, Cell, float], float]


def _make_path(gmap: GridMap, cells, cost: float = 0.0) -> Path:
    cells = tuple(Cell(*c) for c in cells)
    moves = sum(1 for a, b in zip(cells, cells[1:]) if a != b)
    return Path(cells, gmap.cell_size * moves, cost)


def astar(gmap: GridMap, start, goal, cost_fn: CostFn, heuristic_rate: float) -> Path | None:
    """Minimum-cost 4-connected path, or ``None`` when ``goal`` is unreachable.

    ``h(x) = heuristic_rate * |x - goal|``; the caller guarantees the rate does
    not exceed the cheapest per-meter edge cost. Equal ``f`` prefers larger
    ``g``, then the lexicographically smaller cell.
    """
    start, goal = Cell(*start), Cell(*goal)
    if not gmap.is_feasible(start) or not gmap.is_feasible(goal):
        raise PlanningError("start and goal must be feasible")
    cs = gmap.cell_size
    gx, gy = goal

    def h(c):
        return heuristic_rate * cs * math.hypot(c[0] - gx, c[1] - gy)

    g = {start: 0.0}
    parent: dict[Cell, Cell | None] = {start: None}
    closed = set()
    heap = [(h(start), -0.0, start.iy, start.ix, start)]
    while heap:
        _, _, _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == goal:
            out = []
            c = cur
            while c is not None:
                out.append(c)
                c = parent[c]
            out.reverse()
            return _make_path(gmap, out, g[cur])
        closed.add(cur)
        gc = g[cur]
        for n in neighbors(gmap, cur):
            if n in closed:
                continue
            ng = gc + cost_fn(cur, n, cs)
            if ng < g.get(n, math.inf):
                g[n] = ng
                parent[n] = cur
                heapq.heappush(heap, (ng + h(n), -ng, n.iy, n.ix, n))
    return None


def path_cost(path: Path, cost_fn: CostFn, cell_size: float) -> float:
    return sum(cost_fn(a, b, cell_size) for a, b in zip(path.cells, path.cells[1:]))


def aucb_cost_fn(gmap: GridMap, acq: AcquisitionField, params: EdgeCostParams) -> CostFn:
    grid = np.zeros((gmap.height, gmap.width))
    for c, v in zip(acq.cells, acq.normalized):
        grid[c.iy, c.ix] = v
    ll, li, eps = params.lambda_len, params.lambda_info, params.epsilon

    def cost(a, b, dist):
        rate = ll - li * 0.5 * (grid[a[1], a[0]] + grid[b[1], b[0]])
        return (rate if rate > eps else eps) * dist

    return cost


def plan_aucb(
    gmap: GridMap,
    start,
    target,
    acq: AcquisitionField,
    params: EdgeCostParams = EdgeCostParams(),
    delta: int | None = None,
) -> Path:
    """Acquisition-aware A* toward ``target``, truncated to ``delta`` steps when bounded."""
    start, target = Cell(*start), Cell(*target)
    if not gmap.is_feasible(start):
        raise PlanningError("start must be feasible")
    if delta is not None and delta < 1:
        raise ValueError("delta must be >= 1 or None")
    cost = aucb_cost_fn(gmap, acq, params)
    path = astar(gmap, start, target, cost, params.epsilon) if gmap.is_feasible(target) else None
    if path is None:
        reach = reachable_from(gmap, start)
        cand = [(c, v) for c, v in zip(acq.cells, acq.values) if c in reach]
        if not cand:
            raise PlanningError("no reachable cell carries an acquisition value")
        alt = min(cand, key=lambda cv: (-cv[1], lex_key(cv[0])))[0]
        path = astar(gmap, start, alt, cost, params.epsilon)
    if delta is not None and path.steps > delta:
        cells = path.cells[: delta + 1]
        path = _make_path(gmap, cells, path_cost(_make_path(gmap, cells), cost, gmap.cell_size))
    return path


def subsample_waypoints(path: Path, b: int) -> list[Cell]:
    """``b`` cells spread uniformly along the path (always including its last cell)."""
    if b < 1:
        raise ValueError("b must be >= 1")
    L = len(path.cells)
    if L == 0:
        raise ValueError("empty path")
    if b == 1:
        return [path.cells[-1]]
    # round-half-even, matching Python's round
    return [path.cells[round(i * (L - 1) / (b - 1))] for i in range(b)]


def random_motion(gmap: GridMap, start, steps: int, rng: np.random.Generator) -> Path:
    cur = Cell(*start)
    if not gmap.is_feasible(cur):
        raise PlanningError("start must be feasible")
    cells = [cur]
    for _ in range(steps):
        nb = neighbors(gmap, cur)
        if nb:
            cur = nb[int(rng.integers(len(nb)))]
        cells.append(cur)
    return _make_path(gmap, cells)


def random_iid(feasible, b: int, rng: np.random.Generator) -> list[Cell]:
    pool = sorted(feasible, key=lex_key)
    if not pool:
        raise ValueError("empty feasible set")
    return [pool[i] for i in rng.integers(0, len(pool), size=b)]
