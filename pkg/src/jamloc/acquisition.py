"""UCB acquisition over the feasible cells and next-target selection."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .gridworld import Cell, lex_key
from .surrogate import Posterior


@dataclass(frozen=True, eq=False)
class AcquisitionField:
    values: np.ndarray
    kappa: float
    normalized: np.ndarray
    cells: tuple[Cell, ...] = ()

    def lookup(self, normalized: bool = True) -> dict[Cell, float]:
        src = self.normalized if normalized else self.values
        return dict(zip(self.cells, src.tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("ix,iy,alpha,alpha_norm\n")
        for c, a, an in zip(self.cells, self.values, self.normalized):
            buf.write(f"{c.ix},{c.iy},{a:.6f},{an:.6f}\n")
        return buf.getvalue()


def normalize(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if not hi > lo:
        return np.full(values.shape, 0.5)
    return (values - lo) / (hi - lo)


def ucb(post: Posterior, kappa: float, cells=()) -> AcquisitionField:
    """``mu + kappa * sd`` per query; ``cells`` labels the queries (map order)."""
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    values = np.asarray(post.mu, dtype=float) + kappa * np.sqrt(post.var)
    cells = tuple(c if isinstance(c, Cell) else Cell(*c) for c in cells)
    return AcquisitionField(values, float(kappa), normalize(values), cells)


def select_target(acq: AcquisitionField, feasible=None) -> Cell:
    """Arg-max acquisition cell; ties go to the smallest ``(iy, ix)``."""
    cells = acq.cells
    if feasible is None:
        allowed = range(len(cells))
    else:
        feasible = set(feasible)
        allowed = [i for i, c in enumerate(cells) if c in feasible]
        if not allowed:
            raise ValueError("no feasible cell carries an acquisition value")
    best = None
    for i in allowed:
        v = acq.values[i]
        if best is None or v > acq.values[best] or (v == acq.values[best] and lex_key(cells[i]) < lex_key(cells[best])):
            best = i
    return cells[best]
