"""Discretized urban workspace: obstacle grid, adjacency, height feature, line traversal."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import ndimage


class MapError(ValueError):
    pass


class Cell(NamedTuple):
    ix: int
    iy: int


def lex_key(c: Cell) -> tuple[int, int]:
    """Sort key used for every deterministic tie-break: row first, then column."""
    return (c[1], c[0])


@dataclass(frozen=True, eq=False)
class GridMap:
    """Rectangular grid of square cells.

    Arrays are indexed ``[iy, ix]``. ``height_raster`` is zero on feasible
    cells and holds the building height (meters) on obstacle cells.
    """

    width: int
    height: int
    cell_size: float
    obstacle_mask: np.ndarray
    height_raster: np.ndarray
    max_height: float = field(init=False)

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise MapError("map must be at least 2x2 cells")
        if not self.cell_size > 0:
            raise MapError("non-positive cell size")
        mask = np.array(self.obstacle_mask, dtype=bool)
        hr = np.array(self.height_raster, dtype=float)
        if mask.shape != (self.height, self.width) or hr.shape != mask.shape:
            raise MapError("raster shape does not match map dimensions")
        if np.any(hr < 0) or not np.all(np.isfinite(hr)):
            raise MapError("heights must be finite and non-negative")
        if np.any((hr > 0) & ~mask):
            raise MapError("positive height on a feasible cell")
        if mask.all():
            raise MapError("empty feasible set")
        mask.flags.writeable = False
        hr.flags.writeable = False
        object.__setattr__(self, "obstacle_mask", mask)
        object.__setattr__(self, "height_raster", hr)
        object.__setattr__(self, "max_height", float(hr.max()))

    @classmethod
    def from_heights(cls, heights, cell_size: float = 2.0) -> "GridMap":
        """Build from a height raster where any positive value marks an obstacle."""
        hr = np.asarray(heights, dtype=float)
        return cls(hr.shape[1], hr.shape[0], cell_size, hr > 0, hr)

    def in_bounds(self, c) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def is_feasible(self, c) -> bool:
        return self.in_bounds(c) and not self.obstacle_mask[c[1], c[0]]

    @property
    def feasible_cells(self) -> list[Cell]:
        """Feasible cells in lexicographic ``(iy, ix)`` order."""
        cached = self.__dict__.get("_feasible")
        if cached is None:
            iy, ix = np.nonzero(~self.obstacle_mask)
            cached = [Cell(int(x), int(y)) for y, x in zip(iy, ix)]
            self.__dict__["_feasible"] = cached
        return cached

    @property
    def n_obstacles(self) -> int:
        return int(self.obstacle_mask.sum())

    def center(self, c) -> tuple[float, float]:
        return (c[0] * self.cell_size, c[1] * self.cell_size)

    def distance(self, a, b) -> float:
        """Center-to-center Euclidean distance in meters."""
        return self.cell_size * float(np.hypot(a[0] - b[0], a[1] - b[1]))


def neighbors(gmap: GridMap, c) -> list[Cell]:
    """Feasible 4-connected neighbours of ``c`` in E, N, W, S order."""
    x, y = c
    out = []
    for nx, ny in ((x + 1, y), (x, y + 1), (x - 1, y), (x, y - 1)):
        if 0 <= nx < gmap.width and 0 <= ny < gmap.height and not gmap.obstacle_mask[ny, nx]:
            out.append(Cell(nx, ny))
    return out


def _disk(radius_cells: float) -> np.ndarray:
    r = int(np.floor(radius_cells))
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return (xx * xx + yy * yy) <= radius_cells * radius_cells + 1e-9


def height_feature(gmap: GridMap, c, radius: float) -> float:
    """Normalized maximum building height within ``radius`` meters of ``c``."""
    if gmap.max_height == 0:
        return 0.0
    rc = radius / gmap.cell_size
    r = int(np.floor(rc))
    x0, x1 = max(c[0] - r, 0), min(c[0] + r, gmap.width - 1)
    y0, y1 = max(c[1] - r, 0), min(c[1] + r, gmap.height - 1)
    yy, xx = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    inside = ((xx - c[0]) ** 2 + (yy - c[1]) ** 2) <= rc * rc + 1e-9
    window = gmap.height_raster[y0 : y1 + 1, x0 : x1 + 1]
    return float(window[inside].max(initial=0.0)) / gmap.max_height


def height_feature_raster(gmap: GridMap, radius: float) -> np.ndarray:
    """``height_feature`` evaluated on every cell at once (indexed ``[iy, ix]``)."""
    if gmap.max_height == 0:
        return np.zeros((gmap.height, gmap.width))
    fp = _disk(radius / gmap.cell_size)
    mx = ndimage.maximum_filter(gmap.height_raster, footprint=fp, mode="constant", cval=0.0)
    return mx / gmap.max_height


def crossed_cells(gmap: GridMap, a, b) -> list[Cell]:
    """Supercover traversal of the segment between the centers of ``a`` and ``b``.

    Cells are treated as closed squares, so a segment grazing a corner picks
    up every square that touches it. Arithmetic is exact: coordinates are
    doubled so cell borders land on odd integers.
    """
    ax, ay = int(a[0]), int(a[1])
    bx, by = int(b[0]), int(b[1])
    if ax == bx:
        step = 1 if by >= ay else -1
        return [Cell(ax, y) for y in range(ay, by + step, step)]
    reverse = ax > bx
    if reverse:
        ax, ay, bx, by = bx, by, ax, ay
    dx, dy = bx - ax, by - ay
    out = []
    for ix in range(ax, bx + 1):
        xl = max(2 * ix - 1, 2 * ax)
        xr = min(2 * ix + 1, 2 * bx)
        # doubled y = (2*ay*dx + (x - 2*ax)*dy) / dx
        ya = 2 * ay * dx + (xl - 2 * ax) * dy
        yb = 2 * ay * dx + (xr - 2 * ax) * dy
        lo, hi = min(ya, yb), max(ya, yb)
        r0 = -((dx - lo) // (2 * dx))
        r1 = (hi + dx) // (2 * dx)
        rows = range(r0, r1 + 1) if dy >= 0 else range(r1, r0 - 1, -1)
        out.extend(Cell(ix, iy) for iy in rows)
    if reverse:
        out.reverse()
    return out


def is_connected(mask: np.ndarray) -> bool:
    """True if the False cells of ``mask`` form one 4-connected component."""
    _, n = ndimage.label(~mask)
    return n == 1


def gen_random_map(
    seed: int,
    width: int = 64,
    height: int = 64,
    n_buildings: int = 12,
    building_size_range: tuple[int, int] = (4, 12),
    height_range: tuple[float, float] = (10.0, 60.0),
    cell_size: float = 2.0,
    max_tries: int = 200,
) -> GridMap:
    """Place axis-aligned rectangular buildings while keeping the street network connected."""
    smin, smax = building_size_range
    hmin, hmax = height_range
    if n_buildings < 0 or smin < 1 or smax < smin or hmin <= 0 or hmax < hmin:
        raise MapError("degenerate generator ranges")
    if smax > min(width, height):
        raise MapError("building size exceeds map")
    rng = np.random.default_rng(seed)
    hr = np.zeros((height, width))
    for _ in range(n_buildings):
        for _attempt in range(max_tries):
            bw, bh = rng.integers(smin, smax + 1, size=2)
            x0 = rng.integers(0, width - bw + 1)
            y0 = rng.integers(0, height - bh + 1)
            h = round(float(rng.uniform(hmin, hmax)), 3)
            trial = hr.copy()
            block = trial[y0 : y0 + bh, x0 : x0 + bw]
            np.maximum(block, h, out=block)
            if is_connected(trial > 0):
                hr = trial
                break
        else:
            raise MapError("could not place building without disconnecting the feasible set")
    return GridMap.from_heights(hr, cell_size)


def load_map(source: str) -> GridMap:
    """Parse ``GRIDMAP v1 <width> <height> <cell_size_m>`` text."""
    lines = [ln for ln in source.splitlines() if ln.strip()]
    if not lines:
        raise MapError("empty map file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "GRIDMAP" or head[1] != "v1":
        raise MapError(f"bad header: {lines[0]!r}")
    try:
        w, h, cs = int(head[2]), int(head[3]), float(head[4])
    except ValueError as exc:
        raise MapError(f"bad header: {lines[0]!r}") from exc
    if cs <= 0:
        raise MapError("non-positive cell size")
    rows = lines[1:]
    if len(rows) != h:
        raise MapError(f"expected {h} rows, got {len(rows)}")
    try:
        hr = np.array([[float(v) for v in row.split()] for row in rows])
    except ValueError as exc:
        raise MapError("non-numeric cell value") from exc
    if hr.shape != (h, w):
        raise MapError(f"expected {w} values per row")
    if np.any(hr < 0):
        raise MapError("negative cell value")
    return GridMap.from_heights(hr, cs)


def save_map(gmap: GridMap) -> str:
    lines = [f"GRIDMAP v1 {gmap.width} {gmap.height} {gmap.cell_size:g}"]
    for row in gmap.height_raster:
        lines.append(" ".join("0" if v == 0 else f"{v:.3f}" for v in row))
    return "\n".join(lines) + "\n"


def reachable_from(gmap: GridMap, start) -> set[Cell]:
    seen = {Cell(*start)}
    q = deque(seen)
    while q:
        c = q.popleft()
        for n in neighbors(gmap, c):
            if n not in seen:
                seen.add(n)
                q.append(n)
    return seen
